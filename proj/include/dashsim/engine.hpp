#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dashsim/channel.hpp"
#include "dashsim/model.hpp"
#include "dashsim/rng.hpp"
#include "dashsim/scheduler.hpp"

namespace dashsim {

// One level step per segment boundary: a stalled segment drops the level, a
// comfortable delivery lead raises it, anything else holds.
inline int adapt_quality(int level, bool segment_stalled, Slot lead_slots, int threshold_gops,
                         Slot gop_duration_slots) {
  if (level < kMinQuality || level > kMaxQuality)
    throw std::invalid_argument("adapt_quality: level outside range");
  if (segment_stalled) return level > kMinQuality ? level - 1 : level;
  if (level < kMaxQuality &&
      lead_slots >= static_cast<Slot>(threshold_gops) * gop_duration_slots)
    return level + 1;
  return level;
}

// Packet demand of a GoP re-encoded at the given level.
inline Packets scaled_gop_packets(std::int64_t source_bits, std::int64_t packet_size_bytes,
                                  int level) {
  if (level < kMinQuality || level > kMaxQuality)
    throw std::invalid_argument("scaled_gop_packets: level outside range");
  const double scale = kQualityScale[static_cast<std::size_t>(level)];
  const auto bits = std::max<std::int64_t>(
      1, std::llround(static_cast<double>(source_bits) * scale));
  return packets_of_gop(bits, packet_size_bytes);
}

// Whole-trace re-encode at the given level; level 6 reproduces the source.
inline VideoTrace apply_quality(const VideoTrace& source, int level) {
  if (level < kMinQuality || level > kMaxQuality)
    throw std::invalid_argument("apply_quality: level outside range");
  VideoTrace scaled = source;
  scaled.quality_level = level;
  const double scale = kQualityScale[static_cast<std::size_t>(level)];
  for (auto& gop : scaled.gops) {
    gop.size_bits = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(gop.size_bits) * scale));
    gop.size_packets = packets_of_gop(gop.size_bits, source.packet_size_bytes);
  }
  return scaled;
}

// Per-user request plan. Trace-driven plans enqueue one segment at a time at
// the client's current quality level; explicit unit lists bypass traces and
// follow an arbitrary demand curve instead.
struct UserPlan {
  const VideoTrace* source = nullptr;  // level-6 material, trace mode only
  std::vector<PendingUnit> explicit_units;
  Slot first_deadline = 0;
  Slot gop_duration_slots = 0;
  int total_gops = 0;
};

struct EpisodeSetup {
  std::vector<UserPlan> plans;
  RequestMode request_mode = RequestMode::per_gop;
  int gops_per_segment = 1;
  int segments = 1;
  Slot rebuffer_slots = 1;
  bool adaptation_enabled = false;
  int adapt_threshold_gops = 3;
  int initial_quality = kMaxQuality;
  double minutes_nominal = 0.0;  // denominator for stall-rate metrics
  Slot max_slots = 0;            // defensive cap, 0 picks a generous default

  int num_users() const { return static_cast<int>(plans.size()); }
};

// Trace-driven setup; traces must cover segments * gops_per_segment GoPs each.
inline EpisodeSetup make_setup(const SimConfig& cfg, std::span<const VideoTrace> traces) {
  if (static_cast<int>(traces.size()) != cfg.num_users)
    throw std::invalid_argument("make_setup: one trace per user required");
  if (cfg.rebuffer_slots <= 0) throw std::invalid_argument("make_setup: rebuffer must be positive");
  if (cfg.gop_duration_slots <= 0)
    throw std::invalid_argument("make_setup: GoP duration must be at least one slot");
  EpisodeSetup setup;
  setup.request_mode = cfg.request_mode;
  setup.gops_per_segment = cfg.gops_per_segment;
  setup.segments = cfg.segments;
  setup.rebuffer_slots = cfg.rebuffer_slots;
  setup.adaptation_enabled = cfg.adaptation_enabled;
  setup.adapt_threshold_gops = cfg.adapt_threshold_gops;
  setup.initial_quality = cfg.initial_quality;
  const int total_gops = cfg.segments * cfg.gops_per_segment;
  setup.plans.reserve(traces.size());
  for (const auto& trace : traces) {
    if (static_cast<int>(trace.gops.size()) < total_gops)
      throw std::invalid_argument("make_setup: trace too short for requested video length");
    for (const auto& gop : trace.gops)
      if (gop.duration_slots != cfg.gop_duration_slots)
        throw std::invalid_argument("make_setup: trace slot timing disagrees with config");
    UserPlan plan;
    plan.source = &trace;
    plan.gop_duration_slots = cfg.gop_duration_slots;
    plan.first_deadline = cfg.initial_buffer_slots + cfg.gop_duration_slots;
    plan.total_gops = total_gops;
    setup.plans.push_back(plan);
    setup.minutes_nominal = cfg.nominal_video_minutes(trace.gop_duration_seconds());
  }
  return setup;
}

// Demand-curve-driven setup: each increment becomes one request unit whose
// deadline advance is the gap to the next increment. Adaptation stays off.
inline EpisodeSetup make_setup_from_curves(std::span<const PlayoutCurve> curves,
                                           Slot rebuffer_slots) {
  if (curves.empty()) throw std::invalid_argument("make_setup_from_curves: no users");
  if (rebuffer_slots <= 0)
    throw std::invalid_argument("make_setup_from_curves: rebuffer must be positive");
  EpisodeSetup setup;
  setup.rebuffer_slots = rebuffer_slots;
  setup.segments = 1;
  int max_units = 1;
  for (const auto& curve : curves) {
    if (curve.increments.empty())
      throw std::invalid_argument("make_setup_from_curves: empty demand curve");
    UserPlan plan;
    plan.first_deadline = curve.increments.front().deadline;
    plan.total_gops = static_cast<int>(curve.increments.size());
    for (std::size_t m = 0; m < curve.increments.size(); ++m) {
      const Slot advance = m + 1 < curve.increments.size()
                               ? curve.increments[m + 1].deadline - curve.increments[m].deadline
                               : 1;
      plan.explicit_units.push_back(
          {curve.jump(m), advance, 0, static_cast<int>(m)});
    }
    max_units = std::max(max_units, plan.total_gops);
    setup.plans.push_back(std::move(plan));
  }
  setup.gops_per_segment = max_units + 1;  // only the final unit closes the segment
  return setup;
}

struct EpisodeMetrics {
  std::vector<std::int64_t> user_stalls;
  std::int64_t total_stalls = 0;
  // Sample per (user, segment): index is the stall count of that segment.
  std::vector<std::int64_t> histogram;
  // quality_tally[user][level] counts segments received at that level.
  std::vector<std::array<std::int64_t, kMaxQuality + 1>> quality_tally;
  std::vector<std::int64_t> segments_completed;
  double average_quality = 0.0;
  double worst_user_quality = 0.0;
  double stalls_per_minute = 0.0;
  Slot end_slot = 0;
  bool truncated = false;

  bool zero_stall() const { return total_stalls == 0; }
};

namespace engine_detail {

inline void emit(std::ostream* sink, Slot slot, const char* event, int user,
                 std::int64_t detail) {
  if (!sink) return;
  (*sink) << slot << ',' << event << ',' << user << ',' << detail << '\n';
}

struct ClientRuntime {
  int level = kMaxQuality;
  int level_in_service = kMaxQuality;  // level of the segment currently arriving
  int next_segment = 0;                // next segment to enqueue
  std::int64_t seg_stalls = 0;
  Slot last_lead = 0;
};

// Queues one segment's request units at the given level.
inline void enqueue_segment(DeadlineTracker& tracker, const EpisodeSetup& setup, int user,
                            int segment, int level) {
  const UserPlan& plan = setup.plans[static_cast<std::size_t>(user)];
  const int first = segment * setup.gops_per_segment;
  const int last = std::min(plan.total_gops, first + setup.gops_per_segment) - 1;
  if (setup.request_mode == RequestMode::super_gop) {
    Packets packets = 0;
    for (int g = first; g <= last; ++g)
      packets += scaled_gop_packets(plan.source->gops[static_cast<std::size_t>(g)].size_bits,
                                    plan.source->packet_size_bytes, level);
    tracker.enqueue(user, {packets,
                           static_cast<Slot>(last - first + 1) * plan.gop_duration_slots,
                           segment, last});
  } else {
    for (int g = first; g <= last; ++g) {
      const Packets packets =
          scaled_gop_packets(plan.source->gops[static_cast<std::size_t>(g)].size_bits,
                             plan.source->packet_size_bytes, level);
      tracker.enqueue(user, {packets, plan.gop_duration_slots, segment, g});
    }
  }
}

}  // namespace engine_detail

// One slotted episode: expiry checks, one scheduling decision, one channel
// draw per slot, completions advance deadlines and enqueue further segments.
// All randomness derives from (seed, episode_index), so identical inputs give
// identical runs, and runs differing only in the scheduler share channel draws.
inline EpisodeMetrics run_episode(const EpisodeSetup& setup, const SchedulerSpec& spec,
                                  const ChannelModel& channel_template, std::uint64_t seed,
                                  std::uint64_t episode_index, std::ostream* events = nullptr) {
  const int n = setup.num_users();
  if (n <= 0) throw std::invalid_argument("run_episode: no users");
  if (channel_template.num_users() != n)
    throw std::invalid_argument("run_episode: channel sized for a different user count");

  ChannelModel channel = channel_template;
  CounterRng channel_rng(seed, episode_index, StreamRole::channel);
  CounterRng tiebreak_rng(seed, episode_index, StreamRole::tiebreak);
  DeadlineTracker tracker(n);
  Scheduler scheduler(spec, n);

  std::vector<engine_detail::ClientRuntime> clients(static_cast<std::size_t>(n));
  EpisodeMetrics metrics;
  metrics.user_stalls.assign(static_cast<std::size_t>(n), 0);
  metrics.quality_tally.assign(static_cast<std::size_t>(n), {});
  metrics.segments_completed.assign(static_cast<std::size_t>(n), 0);

  Packets total_demand = 0;
  for (int i = 0; i < n; ++i) {
    const UserPlan& plan = setup.plans[static_cast<std::size_t>(i)];
    auto& client = clients[static_cast<std::size_t>(i)];
    client.level = setup.initial_quality;
    client.level_in_service = setup.initial_quality;
    if (plan.explicit_units.empty()) {
      engine_detail::enqueue_segment(tracker, setup, i, 0, client.level);
      client.next_segment = 1;
    } else {
      for (const auto& unit : plan.explicit_units) tracker.enqueue(i, unit);
      client.next_segment = setup.segments;
    }
    tracker.begin_stream(i, plan.first_deadline);
    total_demand += tracker.user(i).residual;
    for (const auto& unit : tracker.user(i).pending) total_demand += unit.packets;
  }

  const Slot cap = setup.max_slots > 0
                       ? setup.max_slots
                       : 1000 * (total_demand + setup.plans.front().first_deadline) + 100000;

  const auto record_segment = [&](int user, std::int64_t stalls, int level) {
    if (static_cast<std::size_t>(stalls) >= metrics.histogram.size())
      metrics.histogram.resize(static_cast<std::size_t>(stalls) + 1, 0);
    ++metrics.histogram[static_cast<std::size_t>(stalls)];
    ++metrics.quality_tally[static_cast<std::size_t>(user)][static_cast<std::size_t>(level)];
    ++metrics.segments_completed[static_cast<std::size_t>(user)];
  };

  Slot slot = 0;
  while (!tracker.all_done()) {
    if (slot >= cap) {
      metrics.truncated = true;
      break;
    }
    channel.advance(slot, channel_rng);
    for (int i = 0; i < n; ++i) {
      if (const auto stall = tracker.on_deadline_expiry(i, slot, setup.rebuffer_slots)) {
        ++metrics.user_stalls[static_cast<std::size_t>(i)];
        ++metrics.total_stalls;
        ++clients[static_cast<std::size_t>(i)].seg_stalls;
        engine_detail::emit(events, slot, "stall", i, stall->segment);
      }
    }
    const auto pick = scheduler.decide(tracker, slot, tiebreak_rng);
    if (!pick) break;  // defensive; loop condition already covers completion
    const int user = *pick;
    engine_detail::emit(events, slot, "decide", user, tracker.user(user).residual);
    if (channel.sample(user, channel_rng)) {
      tracker.on_packet_delivered(user);
      engine_detail::emit(events, slot, "deliver", user, tracker.user(user).residual);
      if (tracker.unit_complete(user)) {
        const auto& entry = tracker.user(user);
        auto& client = clients[static_cast<std::size_t>(user)];
        const Slot lead = entry.next_deadline - (slot + 1);
        client.last_lead = lead;
        const int gop = entry.gop_index;
        const int segment = entry.segment;
        const UserPlan& plan = setup.plans[static_cast<std::size_t>(user)];
        const bool last_overall = gop == plan.total_gops - 1;
        const bool last_of_segment = setup.request_mode == RequestMode::super_gop ||
                                     (gop + 1) % setup.gops_per_segment == 0 || last_overall;
        Slot advance_slots;
        if (!plan.explicit_units.empty()) {
          advance_slots = plan.explicit_units[static_cast<std::size_t>(gop)].advance_slots;
        } else if (setup.request_mode == RequestMode::super_gop) {
          advance_slots = plan.gop_duration_slots *
                          static_cast<Slot>(std::min(plan.total_gops, (segment + 1) *
                                                                          setup.gops_per_segment) -
                                            segment * setup.gops_per_segment);
        } else {
          advance_slots = plan.gop_duration_slots;
        }
        if (last_of_segment) {
          record_segment(user, client.seg_stalls, client.level_in_service);
          const bool stalled = client.seg_stalls > 0;
          client.seg_stalls = 0;
          if (client.next_segment < setup.segments && plan.explicit_units.empty()) {
            if (setup.adaptation_enabled) {
              const int next_level =
                  adapt_quality(client.level, stalled, lead, setup.adapt_threshold_gops,
                                plan.gop_duration_slots);
              if (next_level != client.level)
                engine_detail::emit(events, slot, "adapt", user, next_level);
              client.level = next_level;
            }
            engine_detail::enqueue_segment(tracker, setup, user, client.next_segment,
                                           client.level);
            ++client.next_segment;
            client.level_in_service = client.level;
          }
        }
        tracker.on_gop_complete(user, advance_slots);
        engine_detail::emit(events, slot, "gop_complete", user, gop);
      }
    } else {
      engine_detail::emit(events, slot, "loss", user, tracker.user(user).residual);
    }
    ++slot;
  }
  metrics.end_slot = slot;

  double quality_sum = 0.0;
  double worst = static_cast<double>(kMaxQuality);
  for (int i = 0; i < n; ++i) {
    const auto& tally = metrics.quality_tally[static_cast<std::size_t>(i)];
    std::int64_t segs = 0;
    std::int64_t weighted = 0;
    for (int l = kMinQuality; l <= kMaxQuality; ++l) {
      segs += tally[static_cast<std::size_t>(l)];
      weighted += static_cast<std::int64_t>(l) * tally[static_cast<std::size_t>(l)];
    }
    const double mean = segs > 0 ? static_cast<double>(weighted) / static_cast<double>(segs)
                                 : static_cast<double>(setup.initial_quality);
    quality_sum += mean;
    worst = std::min(worst, mean);
  }
  metrics.average_quality = quality_sum / static_cast<double>(n);
  metrics.worst_user_quality = worst;
  metrics.stalls_per_minute =
      setup.minutes_nominal > 0.0
          ? static_cast<double>(metrics.total_stalls) /
                (static_cast<double>(n) * setup.minutes_nominal)
          : 0.0;
  return metrics;
}

struct Stat {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline Stat summarize(std::span<const double> samples) {
  Stat s;
  if (samples.empty()) return s;
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean = sum / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(ss / (static_cast<double>(samples.size()) - 1.0) /
                          static_cast<double>(samples.size()));
  }
  return s;
}

struct MonteCarloSummary {
  int episodes = 0;
  Stat total_stalls;
  Stat stalls_per_minute;
  Stat average_quality;
  Stat worst_user_quality;
  Stat end_slot;
  double zero_stall_fraction = 0.0;
  double zero_stall_stderr = 0.0;
  std::vector<std::int64_t> histogram;
  std::vector<Stat> user_stalls;
  bool any_truncated = false;
};

// Fixed-seed batch of episodes; jobs > 1 parallelizes across episodes while
// keeping results bit-identical because episode i depends only on (seed, i).
inline MonteCarloSummary run_monte_carlo(const EpisodeSetup& setup, const SchedulerSpec& spec,
                                         const ChannelModel& channel, std::uint64_t seed,
                                         int episodes, int jobs = 1) {
  if (episodes <= 0) throw std::invalid_argument("run_monte_carlo: episodes must be positive");
  std::vector<EpisodeMetrics> results(static_cast<std::size_t>(episodes));
  const auto worker_count = std::max(1, std::min(jobs, episodes));
  if (worker_count == 1) {
    for (int e = 0; e < episodes; ++e)
      results[static_cast<std::size_t>(e)] =
          run_episode(setup, spec, channel, seed, static_cast<std::uint64_t>(e));
  } else {
    std::atomic<int> cursor{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(worker_count));
    for (int w = 0; w < worker_count; ++w)
      workers.emplace_back([&]() {
        for (int e = cursor.fetch_add(1); e < episodes; e = cursor.fetch_add(1))
          results[static_cast<std::size_t>(e)] =
              run_episode(setup, spec, channel, seed, static_cast<std::uint64_t>(e));
      });
    for (auto& t : workers) t.join();
  }

  MonteCarloSummary summary;
  summary.episodes = episodes;
  const int n = setup.num_users();
  std::vector<double> stalls, per_min, avg_q, worst_q, slots;
  stalls.reserve(results.size());
  per_min.reserve(results.size());
  avg_q.reserve(results.size());
  worst_q.reserve(results.size());
  slots.reserve(results.size());
  std::vector<std::vector<double>> per_user(static_cast<std::size_t>(n));
  for (auto& samples : per_user) samples.reserve(results.size());
  std::int64_t zero = 0;
  for (const auto& m : results) {
    stalls.push_back(static_cast<double>(m.total_stalls));
    per_min.push_back(m.stalls_per_minute);
    avg_q.push_back(m.average_quality);
    worst_q.push_back(m.worst_user_quality);
    slots.push_back(static_cast<double>(m.end_slot));
    if (m.zero_stall()) ++zero;
    if (m.truncated) summary.any_truncated = true;
    if (m.histogram.size() > summary.histogram.size())
      summary.histogram.resize(m.histogram.size(), 0);
    for (std::size_t b = 0; b < m.histogram.size(); ++b)
      summary.histogram[b] += m.histogram[b];
    for (int i = 0; i < n; ++i)
      per_user[static_cast<std::size_t>(i)].push_back(
          static_cast<double>(m.user_stalls[static_cast<std::size_t>(i)]));
  }
  summary.user_stalls.reserve(per_user.size());
  for (const auto& samples : per_user) summary.user_stalls.push_back(summarize(samples));
  summary.total_stalls = summarize(stalls);
  summary.stalls_per_minute = summarize(per_min);
  summary.average_quality = summarize(avg_q);
  summary.worst_user_quality = summarize(worst_q);
  summary.end_slot = summarize(slots);
  summary.zero_stall_fraction = static_cast<double>(zero) / static_cast<double>(episodes);
  summary.zero_stall_stderr =
      std::sqrt(summary.zero_stall_fraction * (1.0 - summary.zero_stall_fraction) /
                static_cast<double>(episodes));
  return summary;
}

}  // namespace dashsim
