#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dashsim {

using Slot = std::int64_t;
using Packets = std::int64_t;

// Bit-rate scale per quality level, level 6 being the unscaled source.
inline constexpr int kMinQuality = 1;
inline constexpr int kMaxQuality = 6;
inline constexpr std::array<double, 7> kQualityScale = {0.0,  0.05, 0.08, 0.13,
                                                        0.26, 0.47, 1.0};

// Packets needed for a payload of size_bits with packet_size_bytes per packet.
inline Packets packets_of_gop(std::int64_t size_bits, std::int64_t packet_size_bytes) {
  if (size_bits <= 0) throw std::invalid_argument("packets_of_gop: size_bits must be positive");
  if (packet_size_bytes <= 0)
    throw std::invalid_argument("packets_of_gop: packet_size_bytes must be positive");
  const std::int64_t bits_per_packet = 8 * packet_size_bytes;
  return (size_bits + bits_per_packet - 1) / bits_per_packet;
}

struct GopRecord {
  int index = 0;             // position within the trace
  std::int64_t size_bits = 0;
  Packets size_packets = 0;  // ceil(size_bits / (8 * packet_size_bytes))
  Slot duration_slots = 0;   // equal for every GoP of a trace
};

struct VideoTrace {
  std::string label;
  double frame_rate = 30.0;
  int gop_frames = 16;
  std::int64_t packet_size_bytes = 1500;
  int quality_level = kMaxQuality;  // source material is level 6
  std::vector<GopRecord> gops;

  double gop_duration_seconds() const {
    return static_cast<double>(gop_frames) / frame_rate;
  }
  Packets total_packets() const {
    Packets sum = 0;
    for (const auto& g : gops) sum += g.size_packets;
    return sum;
  }
  // Mean demand in packets per second at this trace's quality.
  double mean_packet_rate() const {
    if (gops.empty()) throw std::invalid_argument("mean_packet_rate: empty trace");
    return static_cast<double>(total_packets()) /
           (static_cast<double>(gops.size()) * gop_duration_seconds());
  }
};

// Right-continuous cumulative demand curve: increments.back().deadline is the
// last slot at which data is due, horizon the decision horizon in slots.
struct PlayoutCurve {
  struct Increment {
    Slot deadline = 0;
    Packets cumulative = 0;
  };
  std::vector<Increment> increments;
  Slot horizon = 0;

  Packets total() const { return increments.empty() ? 0 : increments.back().cumulative; }
  Packets jump(std::size_t m) const {
    return increments[m].cumulative - (m == 0 ? 0 : increments[m - 1].cumulative);
  }
};

// Demand curve for gop_count GoPs of trace starting at first_gop. Increment m
// (1-based) falls due at initial_buffer_slots + m * duration_slots.
inline PlayoutCurve build_playout_curve(const VideoTrace& trace, Slot initial_buffer_slots,
                                        std::size_t first_gop, std::size_t gop_count) {
  if (gop_count == 0) throw std::invalid_argument("build_playout_curve: empty window");
  if (first_gop + gop_count > trace.gops.size())
    throw std::invalid_argument("build_playout_curve: window exceeds trace");
  if (initial_buffer_slots < 0)
    throw std::invalid_argument("build_playout_curve: negative initial buffer");
  PlayoutCurve curve;
  curve.increments.reserve(gop_count);
  const Slot duration = trace.gops[first_gop].duration_slots;
  Packets cumulative = 0;
  for (std::size_t m = 0; m < gop_count; ++m) {
    const auto& gop = trace.gops[first_gop + m];
    if (gop.duration_slots != duration)
      throw std::invalid_argument("build_playout_curve: GoP durations differ within window");
    cumulative += gop.size_packets;
    curve.increments.push_back({initial_buffer_slots + static_cast<Slot>(m + 1) * duration,
                                cumulative});
  }
  curve.horizon = initial_buffer_slots + static_cast<Slot>(gop_count) * duration;
  return curve;
}

// Cumulative packets due at slot t (right-continuous step evaluation).
inline Packets playout_at(const PlayoutCurve& curve, Slot t) {
  if (t < 0 || t > curve.horizon) throw std::out_of_range("playout_at: slot outside horizon");
  Packets due = 0;
  for (const auto& inc : curve.increments) {
    if (inc.deadline <= t)
      due = inc.cumulative;
    else
      break;
  }
  return due;
}

// Delivered packet counts per user at the start of a slot.
struct SystemState {
  Slot slot = 0;
  std::vector<Packets> delivered;
};

// Outstanding demand grouped by deadline and sorted by it.
struct DeadlineSchedule {
  struct Task {
    Slot deadline = 0;
    std::vector<Packets> residuals;  // per user, zero where nothing is owed
  };
  std::vector<Task> tasks;
};

// Unmet demand per deadline given delivered counts: delivered packets are
// netted against each user's earliest increments first; deadlines earlier
// than state.slot and fully served increments are dropped.
inline DeadlineSchedule residual_deadlines(std::span<const PlayoutCurve> curves,
                                           const SystemState& state) {
  if (state.delivered.size() != curves.size())
    throw std::invalid_argument("residual_deadlines: state size mismatch");
  const std::size_t n = curves.size();
  std::map<Slot, std::vector<Packets>> by_deadline;
  for (std::size_t i = 0; i < n; ++i) {
    if (state.delivered[i] < 0)
      throw std::invalid_argument("residual_deadlines: negative delivered count");
    Packets credit = state.delivered[i];
    for (std::size_t m = 0; m < curves[i].increments.size(); ++m) {
      const Packets q = curves[i].jump(m);
      const Packets used = std::min(q, credit);
      credit -= used;
      const Packets residual = q - used;
      if (residual > 0 && curves[i].increments[m].deadline >= state.slot) {
        auto& row = by_deadline[curves[i].increments[m].deadline];
        if (row.empty()) row.assign(n, 0);
        row[i] += residual;
      }
    }
  }
  DeadlineSchedule schedule;
  schedule.tasks.reserve(by_deadline.size());
  for (auto& [deadline, residuals] : by_deadline)
    schedule.tasks.push_back({deadline, std::move(residuals)});
  return schedule;
}

// Ratio of channel capacity to aggregate mean demand; > 1 means spare capacity.
inline double inverse_utilization(double rate_bytes_per_sec, std::int64_t packet_size_bytes,
                                  std::span<const double> packet_rates_per_sec) {
  if (rate_bytes_per_sec <= 0.0)
    throw std::invalid_argument("inverse_utilization: rate must be positive");
  if (packet_size_bytes <= 0)
    throw std::invalid_argument("inverse_utilization: packet size must be positive");
  double total = 0.0;
  for (double r : packet_rates_per_sec) {
    if (r <= 0.0) throw std::invalid_argument("inverse_utilization: demand must be positive");
    total += r;
  }
  if (total <= 0.0) throw std::invalid_argument("inverse_utilization: no demand");
  const double slots_per_sec = rate_bytes_per_sec / static_cast<double>(packet_size_bytes);
  return slots_per_sec / total;
}

enum class Transport { ideal };
enum class RequestMode { per_gop, super_gop };

// Fully resolved run description in slot units; produced by config resolution.
struct SimConfig {
  int num_users = 0;
  std::int64_t packet_size_bytes = 1500;
  double rate_bytes_per_sec = 0.0;  // server transmit rate r
  double rho_inverse = 0.0;         // capacity over aggregate source demand
  Slot gop_duration_slots = 0;
  int gops_per_segment = 20;
  int segments = 1;
  Slot initial_buffer_slots = 0;
  Slot rebuffer_slots = 1;
  Transport transport = Transport::ideal;
  RequestMode request_mode = RequestMode::per_gop;
  bool adaptation_enabled = false;
  int adapt_threshold_gops = 3;
  int initial_quality = kMaxQuality;
  std::uint64_t seed = 1;
  int episodes = 1;

  double slots_per_second() const {
    return rate_bytes_per_sec / static_cast<double>(packet_size_bytes);
  }
  Slot seconds_to_slots(double seconds) const {
    return static_cast<Slot>(std::llround(seconds * slots_per_second()));
  }
  double nominal_video_minutes(double gop_duration_seconds) const {
    return static_cast<double>(segments) * gops_per_segment * gop_duration_seconds / 60.0;
  }
};

}  // namespace dashsim
