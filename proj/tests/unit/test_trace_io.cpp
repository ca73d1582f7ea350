#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "dashsim/trace_io.hpp"

namespace {

using namespace dashsim;

FrameTrace parse(const std::string& text, const std::string& origin = "test") {
  std::istringstream in(text);
  return parse_trace(in, origin);
}

std::string message_of(const std::string& text) {
  try {
    parse(text, "trace.csv");
  } catch (const IoError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("canonical trace files parse header and rows", "[trace_io]") {
  const FrameTrace t = parse(
      "frame_rate=25,gop_frames=4,label=crew\n"
      "0,3000\n"
      "1,1200\n"
      "2,900\n");
  CHECK(t.frame_rate == 25.0);
  CHECK(t.gop_frames == 4);
  CHECK(t.label == "crew");
  CHECK(t.frame_bits == std::vector<std::int64_t>{3000, 1200, 900});

  // label is optional, blank lines are tolerated
  const FrameTrace u = parse("gop_frames=2,frame_rate=30\n0,10\n\n1,20\n");
  CHECK(u.label.empty());
  CHECK(u.frame_bits.size() == 2);
}

TEST_CASE("trace parsing rejects malformed input with file and line", "[trace_io]") {
  CHECK_THROWS_AS(parse(""), IoError);
  CHECK_THROWS_AS(parse("frame_rate=30\n0,10\n"), IoError);            // gop_frames missing
  CHECK_THROWS_AS(parse("frame_rate=30,gop_frames=4\n"), IoError);     // no rows
  CHECK_THROWS_AS(parse("frame_rate=30,gop_frames=4,fps=1\n0,1\n"), IoError);
  CHECK_THROWS_AS(parse("frame_rate;30,gop_frames=4\n0,1\n"), IoError);
  CHECK_THROWS_AS(parse("frame_rate=abc,gop_frames=4\n0,1\n"), IoError);
  CHECK_THROWS_AS(parse("frame_rate=0,gop_frames=4\n0,1\n"), IoError);
  CHECK_THROWS_AS(parse("frame_rate=30,gop_frames=-1\n0,1\n"), IoError);

  CHECK_THROWS_AS(parse("frame_rate=30,gop_frames=4\n0,10\n2,10\n"), IoError);  // index gap
  CHECK_THROWS_AS(parse("frame_rate=30,gop_frames=4\n1,10\n"), IoError);        // starts at 1
  CHECK_THROWS_AS(parse("frame_rate=30,gop_frames=4\n0,10,3\n"), IoError);      // three fields
  CHECK_THROWS_AS(parse("frame_rate=30,gop_frames=4\n0,x\n"), IoError);
  CHECK_THROWS_AS(parse("frame_rate=30,gop_frames=4\n0,0\n"), IoError);         // empty frame

  const std::string msg = message_of("frame_rate=30,gop_frames=4\n0,10\n1,-5\n");
  CHECK(msg.find("trace.csv:3") != std::string::npos);
}

TEST_CASE("writing and reparsing a trace is lossless", "[trace_io]") {
  FrameTrace t;
  t.frame_rate = 30.0;
  t.gop_frames = 16;
  t.label = "hall";
  t.frame_bits = {40000, 1500, 1501, 2000};

  std::ostringstream out;
  write_trace(out, t);
  const FrameTrace back = parse(out.str());
  CHECK(back.frame_rate == t.frame_rate);
  CHECK(back.gop_frames == t.gop_frames);
  CHECK(back.label == t.label);
  CHECK(back.frame_bits == t.frame_bits);

  const std::string path = "/tmp/dashsim_trace_io_roundtrip.csv";
  save_trace(path, t);
  const FrameTrace loaded = load_trace(path);
  CHECK(loaded.frame_bits == t.frame_bits);
  CHECK(loaded.label == t.label);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_trace("/nonexistent/dir/trace.csv"), IoError);
  CHECK_THROWS_AS(save_trace("/nonexistent/dir/trace.csv", t), IoError);
}

TEST_CASE("whitespace listings convert to canonical traces", "[trace_io]") {
  std::istringstream in(
      "# frame dump\n"
      "\n"
      "1 4000\n"
      "2\t2500\n"
      "  7   999\n");  // source indices are ignored, order is kept
  const FrameTrace t = convert_whitespace_trace(in, "dump.txt", 24.0, 8, "clip");
  CHECK(t.frame_rate == 24.0);
  CHECK(t.gop_frames == 8);
  CHECK(t.label == "clip");
  CHECK(t.frame_bits == std::vector<std::int64_t>{4000, 2500, 999});

  std::istringstream wide("0 100 7\n");
  CHECK_THROWS_AS(convert_whitespace_trace(wide, "dump.txt", 24.0, 8, ""), IoError);
  std::istringstream bare("0\n");
  CHECK_THROWS_AS(convert_whitespace_trace(bare, "dump.txt", 24.0, 8, ""), IoError);
  std::istringstream negative("0 -4\n");
  CHECK_THROWS_AS(convert_whitespace_trace(negative, "dump.txt", 24.0, 8, ""), IoError);
  std::istringstream empty("# nothing\n");
  CHECK_THROWS_AS(convert_whitespace_trace(empty, "dump.txt", 24.0, 8, ""), IoError);

  std::istringstream late_error("0 10\n1 10\nbroken row here\n");
  try {
    convert_whitespace_trace(late_error, "dump.txt", 24.0, 8, "");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("dump.txt:3") != std::string::npos);
  }
}

TEST_CASE("frames group into GoPs with trailing leftovers dropped", "[trace_io]") {
  FrameTrace frames;
  frames.frame_rate = 30.0;
  frames.gop_frames = 4;
  frames.label = "news";
  frames.frame_bits = {10000, 2000, 2000, 2000, 9000, 1000, 1000, 1000, 55, 55, 55};

  std::string warning;
  const VideoTrace t = to_gops(frames, 1500, 5, &warning);
  REQUIRE(t.gops.size() == 2);
  CHECK(t.label == "news");
  CHECK(t.gop_frames == 4);
  CHECK(t.packet_size_bytes == 1500);
  CHECK(t.gops[0].size_bits == 16000);
  CHECK(t.gops[1].size_bits == 12000);
  CHECK(t.gops[0].size_packets == packets_of_gop(16000, 1500));
  CHECK(t.gops[0].duration_slots == 5);
  CHECK(t.gops[1].index == 1);
  CHECK(warning.find("3 trailing frame") != std::string::npos);

  frames.frame_bits.resize(8);  // exact multiple leaves the warning untouched
  warning.clear();
  const VideoTrace whole = to_gops(frames, 1500, 5, &warning);
  CHECK(whole.gops.size() == 2);
  CHECK(warning.empty());
  CHECK_NOTHROW(to_gops(frames, 1500, 5));  // warning sink is optional

  frames.frame_bits.resize(3);
  CHECK_THROWS_AS(to_gops(frames, 1500, 5), std::invalid_argument);
  frames.frame_bits.resize(8);
  CHECK_THROWS_AS(to_gops(frames, 0, 5), std::invalid_argument);
  CHECK_THROWS_AS(to_gops(frames, 1500, 0), std::invalid_argument);
}

TEST_CASE("synthetic traces hit the requested moments deterministically", "[trace_io]") {
  const double mean = 200000.0;
  const double cv = 0.8;
  const int gops = 5000;
  const VideoTrace a = synth_trace(mean, cv, gops, 777, 1500, 4, 30.0, 16, "synthetic");
  const VideoTrace b = synth_trace(mean, cv, gops, 777, 1500, 4);
  REQUIRE(a.gops.size() == static_cast<std::size_t>(gops));
  CHECK(a.label == "synthetic");
  CHECK(a.packet_size_bytes == 1500);
  CHECK(a.gops[0].duration_slots == 4);
  for (int g = 0; g < gops; ++g) {
    REQUIRE(a.gops[g].size_bits == b.gops[g].size_bits);  // same seed, same trace
    REQUIRE(a.gops[g].size_packets == packets_of_gop(a.gops[g].size_bits, 1500));
  }
  const VideoTrace c = synth_trace(mean, cv, gops, 778, 1500, 4);
  CHECK(a.gops[0].size_bits != c.gops[0].size_bits);

  double sum = 0.0;
  for (const auto& gop : a.gops) sum += static_cast<double>(gop.size_bits);
  const double sample_mean = sum / gops;
  double ss = 0.0;
  for (const auto& gop : a.gops) {
    const double d = static_cast<double>(gop.size_bits) - sample_mean;
    ss += d * d;
  }
  const double sample_cv = std::sqrt(ss / (gops - 1)) / sample_mean;
  CHECK(std::abs(sample_mean - mean) <= 0.06 * mean);
  CHECK(std::abs(sample_cv - cv) <= 0.1);

  const VideoTrace flat = synth_trace(90000.0, 0.0, 3, 1, 1500, 4);
  for (const auto& gop : flat.gops) CHECK(gop.size_bits == 90000);

  CHECK_THROWS_AS(synth_trace(0.0, 0.5, 3, 1, 1500, 4), std::invalid_argument);
  CHECK_THROWS_AS(synth_trace(1e5, -0.1, 3, 1, 1500, 4), std::invalid_argument);
  CHECK_THROWS_AS(synth_trace(1e5, 0.5, 0, 1, 1500, 4), std::invalid_argument);
}

TEST_CASE("frame rendering preserves GoP totals with a heavy lead frame", "[trace_io]") {
  const VideoTrace t = synth_trace(100000.0, 0.6, 20, 5, 1500, 4, 30.0, 16, "x");
  const FrameTrace frames = to_frames(t);
  REQUIRE(frames.frame_bits.size() == t.gops.size() * 16);
  CHECK(frames.gop_frames == 16);
  CHECK(frames.label == "x");
  for (std::size_t g = 0; g < t.gops.size(); ++g) {
    std::int64_t total = 0;
    for (std::size_t f = 0; f < 16; ++f) total += frames.frame_bits[g * 16 + f];
    REQUIRE(total == t.gops[g].size_bits);  // bit totals survive exactly
    CHECK(frames.frame_bits[g * 16] == (t.gops[g].size_bits * 2) / 5);
    for (std::size_t f = 0; f < 16; ++f) REQUIRE(frames.frame_bits[g * 16 + f] > 0);
  }

  // grouping the rendered frames recovers the original GoP sizes
  const VideoTrace back = to_gops(frames, t.packet_size_bytes, 4);
  REQUIRE(back.gops.size() == t.gops.size());
  for (std::size_t g = 0; g < t.gops.size(); ++g)
    CHECK(back.gops[g].size_bits == t.gops[g].size_bits);
}

TEST_CASE("frame rendering covers tiny GoPs without zero frames", "[trace_io]") {
  VideoTrace t;
  t.packet_size_bytes = 1500;
  t.gop_frames = 4;
  t.gops.push_back({0, 5, 1, 2});  // five bits over four frames
  const FrameTrace frames = to_frames(t);
  CHECK(frames.frame_bits == std::vector<std::int64_t>{2, 1, 1, 1});

  VideoTrace single;
  single.packet_size_bytes = 1500;
  single.gop_frames = 1;
  single.gops.push_back({0, 7, 1, 2});
  CHECK(to_frames(single).frame_bits == std::vector<std::int64_t>{7});

  VideoTrace starved;
  starved.packet_size_bytes = 1500;
  starved.gop_frames = 8;
  starved.gops.push_back({0, 5, 1, 2});
  CHECK_THROWS_AS(to_frames(starved), std::invalid_argument);
}
