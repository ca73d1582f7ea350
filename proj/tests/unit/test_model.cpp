#include <catch2/catch_amalgamated.hpp>

#include <stdexcept>
#include <vector>

#include "dashsim/model.hpp"

namespace {

using namespace dashsim;

VideoTrace trace_from_packets(const std::vector<Packets>& packets, Slot duration_slots,
                              std::int64_t packet_size_bytes = 1000) {
  VideoTrace trace;
  trace.packet_size_bytes = packet_size_bytes;
  for (std::size_t i = 0; i < packets.size(); ++i) {
    GopRecord gop;
    gop.index = static_cast<int>(i);
    gop.size_packets = packets[i];
    gop.size_bits = packets[i] * 8 * packet_size_bytes;
    gop.duration_slots = duration_slots;
    trace.gops.push_back(gop);
  }
  return trace;
}

}  // namespace

TEST_CASE("packets_of_gop rounds payloads up to whole packets", "[model]") {
  CHECK(packets_of_gop(96000, 1000) == 12);  // exact multiple of 8000 bits
  CHECK(packets_of_gop(96001, 1000) == 13);
  CHECK(packets_of_gop(1, 1500) == 1);
  CHECK(packets_of_gop(12000, 1500) == 1);
  CHECK(packets_of_gop(12001, 1500) == 2);
  CHECK_THROWS_AS(packets_of_gop(0, 1000), std::invalid_argument);
  CHECK_THROWS_AS(packets_of_gop(-5, 1000), std::invalid_argument);
  CHECK_THROWS_AS(packets_of_gop(100, 0), std::invalid_argument);
}

TEST_CASE("quality scale is increasing and tops out at the source", "[model]") {
  CHECK(kQualityScale[kMaxQuality] == 1.0);
  CHECK(kQualityScale[1] == 0.05);
  CHECK(kQualityScale[5] == 0.47);
  for (int q = kMinQuality; q < kMaxQuality; ++q)
    CHECK(kQualityScale[static_cast<std::size_t>(q)] <
          kQualityScale[static_cast<std::size_t>(q + 1)]);
}

TEST_CASE("playout curve places increment m at buffer plus m durations", "[model]") {
  const VideoTrace trace = trace_from_packets({3, 2, 4}, 5);
  const PlayoutCurve curve = build_playout_curve(trace, 2, 0, 3);
  REQUIRE(curve.increments.size() == 3);
  CHECK(curve.increments[0].deadline == 7);
  CHECK(curve.increments[0].cumulative == 3);
  CHECK(curve.increments[1].deadline == 12);
  CHECK(curve.increments[1].cumulative == 5);
  CHECK(curve.increments[2].deadline == 17);
  CHECK(curve.increments[2].cumulative == 9);
  CHECK(curve.horizon == 17);
  CHECK(curve.total() == 9);
  CHECK(curve.jump(0) == 3);
  CHECK(curve.jump(1) == 2);
  CHECK(curve.jump(2) == 4);
}

TEST_CASE("playout curve windows start mid-trace", "[model]") {
  const VideoTrace trace = trace_from_packets({3, 2, 4}, 5);
  const PlayoutCurve curve = build_playout_curve(trace, 0, 1, 2);
  REQUIRE(curve.increments.size() == 2);
  CHECK(curve.increments[0].deadline == 5);
  CHECK(curve.increments[0].cumulative == 2);
  CHECK(curve.increments[1].deadline == 10);
  CHECK(curve.increments[1].cumulative == 6);
}

TEST_CASE("playout curve rejects bad windows", "[model]") {
  const VideoTrace trace = trace_from_packets({3, 2, 4}, 5);
  CHECK_THROWS_AS(build_playout_curve(trace, 0, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_playout_curve(trace, 0, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_playout_curve(trace, -1, 0, 3), std::invalid_argument);
  VideoTrace uneven = trace;
  uneven.gops[1].duration_slots = 4;
  CHECK_THROWS_AS(build_playout_curve(uneven, 0, 0, 3), std::invalid_argument);
}

TEST_CASE("playout evaluation is a right-continuous step", "[model]") {
  const VideoTrace trace = trace_from_packets({3, 2, 4}, 5);
  const PlayoutCurve curve = build_playout_curve(trace, 2, 0, 3);
  CHECK(playout_at(curve, 0) == 0);
  CHECK(playout_at(curve, 6) == 0);
  CHECK(playout_at(curve, 7) == 3);  // jumps exactly at the deadline
  CHECK(playout_at(curve, 11) == 3);
  CHECK(playout_at(curve, 12) == 5);
  CHECK(playout_at(curve, 16) == 5);
  CHECK(playout_at(curve, 17) == 9);
  CHECK_THROWS_AS(playout_at(curve, -1), std::out_of_range);
  CHECK_THROWS_AS(playout_at(curve, 18), std::out_of_range);
}

TEST_CASE("residuals net delivered packets against earliest increments", "[model]") {
  const VideoTrace t0 = trace_from_packets({3, 2}, 5);
  const VideoTrace t1 = trace_from_packets({2}, 5);
  std::vector<PlayoutCurve> curves = {build_playout_curve(t0, 2, 0, 2),
                                      build_playout_curve(t1, 0, 0, 1)};
  // user 0 owes 3 by slot 7 and 2 more by slot 12; user 1 owes 2 by slot 5

  SystemState fresh{0, {0, 0}};
  const DeadlineSchedule all = residual_deadlines(curves, fresh);
  REQUIRE(all.tasks.size() == 3);
  CHECK(all.tasks[0].deadline == 5);
  CHECK(all.tasks[0].residuals == std::vector<Packets>{0, 2});
  CHECK(all.tasks[1].deadline == 7);
  CHECK(all.tasks[1].residuals == std::vector<Packets>{3, 0});
  CHECK(all.tasks[2].deadline == 12);
  CHECK(all.tasks[2].residuals == std::vector<Packets>{2, 0});

  SystemState partial{0, {4, 1}};  // 4 clears the first jump and eats into the second
  const DeadlineSchedule some = residual_deadlines(curves, partial);
  REQUIRE(some.tasks.size() == 2);
  CHECK(some.tasks[0].deadline == 5);
  CHECK(some.tasks[0].residuals == std::vector<Packets>{0, 1});
  CHECK(some.tasks[1].deadline == 12);
  CHECK(some.tasks[1].residuals == std::vector<Packets>{1, 0});

  SystemState late{6, {0, 0}};  // slot past the first deadline drops that task
  const DeadlineSchedule rest = residual_deadlines(curves, late);
  REQUIRE(rest.tasks.size() == 2);
  CHECK(rest.tasks[0].deadline == 7);
  CHECK(rest.tasks[1].deadline == 12);

  SystemState bad{0, {0}};
  CHECK_THROWS_AS(residual_deadlines(curves, bad), std::invalid_argument);
  SystemState negative{0, {-1, 0}};
  CHECK_THROWS_AS(residual_deadlines(curves, negative), std::invalid_argument);
}

TEST_CASE("inverse utilization compares slot rate to aggregate demand", "[model]") {
  const std::vector<double> rates = {10.0, 20.0, 30.0};
  CHECK(inverse_utilization(66000.0, 1000, rates) == Catch::Approx(1.1).epsilon(1e-12));
  CHECK(inverse_utilization(60000.0, 1000, rates) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(inverse_utilization(0.0, 1000, rates), std::invalid_argument);
  CHECK_THROWS_AS(inverse_utilization(1.0, 0, rates), std::invalid_argument);
  const std::vector<double> none;
  CHECK_THROWS_AS(inverse_utilization(1.0, 1000, none), std::invalid_argument);
  const std::vector<double> zero = {0.0};
  CHECK_THROWS_AS(inverse_utilization(1.0, 1000, zero), std::invalid_argument);
}

TEST_CASE("trace aggregates match hand counts", "[model]") {
  VideoTrace trace = trace_from_packets({3, 2, 4}, 5);
  trace.frame_rate = 30.0;
  trace.gop_frames = 16;
  CHECK(trace.total_packets() == 9);
  CHECK(trace.gop_duration_seconds() == Catch::Approx(16.0 / 30.0).epsilon(1e-12));
  // 9 packets over 3 GoPs of 8/15 s each
  CHECK(trace.mean_packet_rate() == Catch::Approx(5.625).epsilon(1e-12));
}

TEST_CASE("config unit conversions round to nearest slot", "[model]") {
  SimConfig cfg;
  cfg.packet_size_bytes = 1000;
  cfg.rate_bytes_per_sec = 66000.0;
  CHECK(cfg.slots_per_second() == Catch::Approx(66.0).epsilon(1e-12));
  CHECK(cfg.seconds_to_slots(1.0) == 66);
  CHECK(cfg.seconds_to_slots(0.5) == 33);
  CHECK(cfg.seconds_to_slots(0.0227) == 1);  // 1.4982 slots rounds down
  cfg.segments = 2;
  cfg.gops_per_segment = 20;
  CHECK(cfg.nominal_video_minutes(16.0 / 30.0) == Catch::Approx(40 * (16.0 / 30.0) / 60.0));
}
