#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dashsim/errors.hpp"
#include "dashsim/model.hpp"
#include "dashsim/rng.hpp"

namespace dashsim {

// Frame-granularity video trace as stored on disk. The canonical file format
// is a header line "frame_rate=<f>,gop_frames=<g>,label=<s>" followed by one
// "frame_index,size_bits" row per frame, indices consecutive from zero.
struct FrameTrace {
  double frame_rate = 30.0;
  int gop_frames = 16;
  std::string label;
  std::vector<std::int64_t> frame_bits;
};

namespace trace_detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  return out;
}

}  // namespace trace_detail

inline FrameTrace parse_trace(std::istream& in, const std::string& origin) {
  FrameTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw IoError(origin + ": empty trace file");
  bool saw_rate = false, saw_gop = false;
  for (const auto& field : trace_detail::split(line, ',')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos)
      throw IoError(origin + ": malformed header field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    try {
      if (key == "frame_rate") {
        trace.frame_rate = std::stod(value);
        saw_rate = true;
      } else if (key == "gop_frames") {
        trace.gop_frames = std::stoi(value);
        saw_gop = true;
      } else if (key == "label") {
        trace.label = value;
      } else {
        throw IoError(origin + ": unknown header key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw IoError(origin + ": non-numeric header value '" + value + "'");
    }
  }
  if (!saw_rate || !saw_gop)
    throw IoError(origin + ": header must name frame_rate and gop_frames");
  if (trace.frame_rate <= 0.0) throw IoError(origin + ": frame_rate must be positive");
  if (trace.gop_frames <= 0) throw IoError(origin + ": gop_frames must be positive");
  std::int64_t expected = 0;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = trace_detail::split(line, ',');
    if (fields.size() != 2)
      throw IoError(origin + ":" + std::to_string(line_no) + ": expected frame_index,size_bits");
    std::int64_t index, bits;
    try {
      index = std::stoll(fields[0]);
      bits = std::stoll(fields[1]);
    } catch (const std::exception&) {
      throw IoError(origin + ":" + std::to_string(line_no) + ": non-numeric row");
    }
    if (index != expected)
      throw IoError(origin + ":" + std::to_string(line_no) + ": frame indices must be consecutive from 0");
    if (bits <= 0)
      throw IoError(origin + ":" + std::to_string(line_no) + ": frame size must be positive");
    trace.frame_bits.push_back(bits);
    ++expected;
  }
  if (trace.frame_bits.empty()) throw IoError(origin + ": no frame rows");
  return trace;
}

inline FrameTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file: " + path);
  return parse_trace(in, path);
}

inline void write_trace(std::ostream& out, const FrameTrace& trace) {
  out << "frame_rate=" << trace.frame_rate << ",gop_frames=" << trace.gop_frames
      << ",label=" << trace.label << '\n';
  for (std::size_t i = 0; i < trace.frame_bits.size(); ++i)
    out << i << ',' << trace.frame_bits[i] << '\n';
}

inline void save_trace(const std::string& path, const FrameTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file: " + path);
  write_trace(out, trace);
  if (!out) throw IoError("write failed: " + path);
}

// Two-column whitespace listing (frame index, size in bits) to canonical form.
// Lines starting with '#' and blank lines are skipped; indices are ignored
// apart from ordering, sizes must be positive.
inline FrameTrace convert_whitespace_trace(std::istream& in, const std::string& origin,
                                           double frame_rate, int gop_frames,
                                           const std::string& label) {
  FrameTrace trace;
  trace.frame_rate = frame_rate;
  trace.gop_frames = gop_frames;
  trace.label = label;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream row(line);
    std::string first;
    if (!(row >> first) || first[0] == '#') continue;
    std::int64_t bits;
    std::string extra;
    if (!(row >> bits) || (row >> extra))
      throw IoError(origin + ":" + std::to_string(line_no) + ": expected two columns");
    if (bits <= 0)
      throw IoError(origin + ":" + std::to_string(line_no) + ": frame size must be positive");
    trace.frame_bits.push_back(bits);
  }
  if (trace.frame_bits.empty()) throw IoError(origin + ": no frame rows");
  return trace;
}

// Groups consecutive frames into GoPs of gop_frames each. A trailing partial
// group is dropped and reported through `warning` when provided.
inline VideoTrace to_gops(const FrameTrace& frames, std::int64_t packet_size_bytes,
                          Slot duration_slots, std::string* warning = nullptr) {
  if (packet_size_bytes <= 0) throw std::invalid_argument("to_gops: packet size must be positive");
  if (duration_slots <= 0) throw std::invalid_argument("to_gops: duration must be positive");
  const std::size_t per_gop = static_cast<std::size_t>(frames.gop_frames);
  const std::size_t whole = frames.frame_bits.size() / per_gop;
  if (whole == 0) throw std::invalid_argument("to_gops: fewer frames than one GoP");
  const std::size_t leftover = frames.frame_bits.size() - whole * per_gop;
  if (leftover > 0 && warning)
    *warning = "dropped " + std::to_string(leftover) + " trailing frame(s) short of a GoP";
  VideoTrace trace;
  trace.label = frames.label;
  trace.frame_rate = frames.frame_rate;
  trace.gop_frames = frames.gop_frames;
  trace.packet_size_bytes = packet_size_bytes;
  trace.gops.reserve(whole);
  for (std::size_t g = 0; g < whole; ++g) {
    std::int64_t bits = 0;
    for (std::size_t f = 0; f < per_gop; ++f) bits += frames.frame_bits[g * per_gop + f];
    trace.gops.push_back({static_cast<int>(g), bits, packets_of_gop(bits, packet_size_bytes),
                          duration_slots});
  }
  return trace;
}

// Lognormal GoP sizes with the requested mean and coefficient of variation;
// cv = 0 gives constant sizes. Deterministic in the seed.
inline VideoTrace synth_trace(double mean_bits_per_gop, double cv, int gop_count,
                              std::uint64_t seed, std::int64_t packet_size_bytes,
                              Slot duration_slots, double frame_rate = 30.0, int gop_frames = 16,
                              const std::string& label = "synthetic") {
  if (mean_bits_per_gop <= 0.0) throw std::invalid_argument("synth_trace: mean must be positive");
  if (cv < 0.0) throw std::invalid_argument("synth_trace: cv must be nonnegative");
  if (gop_count <= 0) throw std::invalid_argument("synth_trace: need at least one GoP");
  VideoTrace trace;
  trace.label = label;
  trace.frame_rate = frame_rate;
  trace.gop_frames = gop_frames;
  trace.packet_size_bytes = packet_size_bytes;
  trace.gops.reserve(static_cast<std::size_t>(gop_count));
  CounterRng rng(seed, 0, StreamRole::trace);
  const double sigma2 = std::log(1.0 + cv * cv);
  const double mu = std::log(mean_bits_per_gop) - 0.5 * sigma2;
  const double sigma = std::sqrt(sigma2);
  for (int g = 0; g < gop_count; ++g) {
    const double raw = cv == 0.0 ? mean_bits_per_gop : rng.lognormal(mu, sigma);
    const auto bits = std::max<std::int64_t>(1, std::llround(raw));
    trace.gops.push_back({g, bits, packets_of_gop(bits, packet_size_bytes), duration_slots});
  }
  return trace;
}

// Frame-granularity rendering of a GoP trace: the leading frame carries about
// 40% of the GoP, the remainder is spread evenly. Bit totals are preserved
// exactly and every frame stays positive, which needs size_bits >= gop_frames.
inline FrameTrace to_frames(const VideoTrace& trace) {
  FrameTrace frames;
  frames.frame_rate = trace.frame_rate;
  frames.gop_frames = trace.gop_frames;
  frames.label = trace.label;
  const std::int64_t per_gop = trace.gop_frames;
  for (const auto& gop : trace.gops) {
    if (gop.size_bits < per_gop)
      throw std::invalid_argument("to_frames: GoP smaller than one bit per frame");
    if (per_gop == 1) {
      frames.frame_bits.push_back(gop.size_bits);
      continue;
    }
    const std::int64_t others = per_gop - 1;
    std::int64_t lead = std::max<std::int64_t>(1, (gop.size_bits * 2) / 5);
    lead = std::min(lead, gop.size_bits - others);  // leave one bit per trailing frame
    const std::int64_t rest = gop.size_bits - lead;
    const std::int64_t base = rest / others;
    const std::int64_t extra = rest % others;
    frames.frame_bits.push_back(lead);
    for (std::int64_t f = 0; f < others; ++f)
      frames.frame_bits.push_back(base + (f < extra ? 1 : 0));
  }
  return frames;
}

}  // namespace dashsim
