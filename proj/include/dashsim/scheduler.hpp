#pragma once

#include <cassert>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dashsim/model.hpp"
#include "dashsim/rng.hpp"

namespace dashsim {

enum class SchedulerPolicy { bdra, rfra, wrfra, dwrfra, random };

inline const char* to_string(SchedulerPolicy p) {
  switch (p) {
    case SchedulerPolicy::bdra: return "bdra";
    case SchedulerPolicy::rfra: return "rfra";
    case SchedulerPolicy::wrfra: return "wrfra";
    case SchedulerPolicy::dwrfra: return "dwrfra";
    case SchedulerPolicy::random: return "random";
  }
  return "?";
}

inline SchedulerPolicy scheduler_from_string(const std::string& s) {
  if (s == "bdra") return SchedulerPolicy::bdra;
  if (s == "rfra") return SchedulerPolicy::rfra;
  if (s == "wrfra") return SchedulerPolicy::wrfra;
  if (s == "dwrfra") return SchedulerPolicy::dwrfra;
  if (s == "random") return SchedulerPolicy::random;
  throw std::invalid_argument("unknown scheduler: " + s);
}

// One outstanding request unit (a GoP, or a whole segment in super-GoP mode).
// advance_slots is the gap from this unit's deadline to the next one's.
struct PendingUnit {
  Packets packets = 0;
  Slot advance_slots = 0;
  int segment = 0;
  int gop_index = 0;
};

struct StallEvent {
  int user = 0;
  Slot slot = 0;
  int segment = 0;
};

// Per-user deadline and residual-demand bookkeeping. The scheduler side sees
// exactly this view: no channel statistics enter any decision.
class DeadlineTracker {
 public:
  struct UserEntry {
    Slot next_deadline = 0;
    Packets residual = 0;    // unsent packets of the unit in service
    Packets unit_total = 0;  // full size of the unit in service
    int segment = 0;
    int gop_index = 0;
    std::deque<PendingUnit> pending;
    bool done = true;
    Slot completed_deadline = -1;  // deadline of the last finished unit
  };

  explicit DeadlineTracker(int num_users)
      : users_(static_cast<std::size_t>(num_users)) {}

  int num_users() const { return static_cast<int>(users_.size()); }
  const UserEntry& user(int i) const { return users_[static_cast<std::size_t>(i)]; }
  bool active(int i) const { return !users_[static_cast<std::size_t>(i)].done; }
  bool all_done() const {
    for (const auto& u : users_)
      if (!u.done) return false;
    return true;
  }

  void enqueue(int i, PendingUnit unit) {
    if (unit.packets <= 0) throw std::invalid_argument("tracker: unit must carry demand");
    users_[static_cast<std::size_t>(i)].pending.push_back(unit);
  }

  // Arms the user's first unit; first_deadline is the absolute due slot.
  void begin_stream(int i, Slot first_deadline) {
    auto& u = users_[static_cast<std::size_t>(i)];
    if (u.pending.empty()) throw std::invalid_argument("tracker: nothing queued");
    u.next_deadline = first_deadline;
    load_front(u);
  }

  // A later request for an already-served deadline is redundant and dropped.
  bool accept_request(int i, Slot deadline, PendingUnit unit) {
    auto& u = users_[static_cast<std::size_t>(i)];
    if (deadline <= u.completed_deadline) return false;
    u.pending.push_back(unit);
    if (u.done) {
      u.next_deadline = deadline;
      load_front(u);
    }
    return true;
  }

  void on_packet_delivered(int i) {
    auto& u = users_[static_cast<std::size_t>(i)];
    assert(!u.done && u.residual > 0);
    --u.residual;
  }

  bool unit_complete(int i) const {
    const auto& u = users_[static_cast<std::size_t>(i)];
    return !u.done && u.residual == 0;
  }

  // Completion of the unit in service: the next deadline moves forward by the
  // finished unit's advance, and the next pending unit (if any) is armed.
  void on_gop_complete(int i, Slot advance_slots) {
    auto& u = users_[static_cast<std::size_t>(i)];
    assert(!u.done && u.residual == 0);
    u.completed_deadline = u.next_deadline;
    u.next_deadline += advance_slots;
    if (u.pending.empty()) {
      u.done = true;
      u.unit_total = 0;
    } else {
      load_front(u);
    }
  }

  // Expiry of the armed deadline with demand still outstanding is a stall;
  // the deadline is pushed out by the rebuffer grant, which shifts every
  // later deadline implicitly because those are generated relative to it.
  std::optional<StallEvent> on_deadline_expiry(int i, Slot now, Slot rebuffer_slots) {
    auto& u = users_[static_cast<std::size_t>(i)];
    if (u.done || u.residual == 0 || u.next_deadline > now) return std::nullopt;
    if (rebuffer_slots <= 0) throw std::invalid_argument("tracker: rebuffer must be positive");
    u.next_deadline += rebuffer_slots;
    return StallEvent{i, now, u.segment};
  }

 private:
  static void load_front(UserEntry& u) {
    const PendingUnit next = u.pending.front();
    u.pending.pop_front();
    u.residual = next.packets;
    u.unit_total = next.packets;
    u.segment = next.segment;
    u.gop_index = next.gop_index;
    u.done = false;
  }

  std::vector<UserEntry> users_;
};

// Earliest deadline first; ties broken by smaller in-service unit, then by
// lower user index. Pure in the tracker: identical trackers give identical
// picks no matter what the channel looks like.
inline std::optional<int> bdra_decide(const DeadlineTracker& tracker, Slot /*slot*/) {
  int best = -1;
  for (int i = 0; i < tracker.num_users(); ++i) {
    if (!tracker.active(i)) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const auto& a = tracker.user(i);
    const auto& b = tracker.user(best);
    if (a.next_deadline < b.next_deadline ||
        (a.next_deadline == b.next_deadline && a.unit_total < b.unit_total))
      best = i;
  }
  if (best < 0) return std::nullopt;
  return best;
}

// Same selection with random choice among deadline ties.
inline std::optional<int> bdra_decide_random_ties(const DeadlineTracker& tracker, Slot /*slot*/,
                                                  CounterRng& rng) {
  Slot best_deadline = 0;
  int count = 0;
  for (int i = 0; i < tracker.num_users(); ++i) {
    if (!tracker.active(i)) continue;
    const Slot d = tracker.user(i).next_deadline;
    if (count == 0 || d < best_deadline) {
      best_deadline = d;
      count = 1;
    } else if (d == best_deadline) {
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  auto pick = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(count)));
  for (int i = 0; i < tracker.num_users(); ++i) {
    if (!tracker.active(i) || tracker.user(i).next_deadline != best_deadline) continue;
    if (pick-- == 0) return i;
  }
  return std::nullopt;
}

// Cursor plus per-user deficit credit for the round-robin family.
struct RoundRobinState {
  int cursor = 0;
  int served_in_turn = 0;
  bool arrival_pending = true;
  std::vector<double> deficit;

  explicit RoundRobinState(int num_users = 0)
      : deficit(static_cast<std::size_t>(num_users), 0.0) {}
};

// Strict round robin over users with outstanding demand: quantum packets per
// visit, demandless users skipped without consuming a turn.
inline std::optional<int> rfra_decide(RoundRobinState& rr, const DeadlineTracker& tracker,
                                      int quantum = 1) {
  const int n = tracker.num_users();
  if (quantum <= 0) throw std::invalid_argument("rfra: quantum must be positive");
  for (int step = 0; step <= n; ++step) {
    const int u = rr.cursor;
    if (tracker.active(u) && rr.served_in_turn < quantum) {
      ++rr.served_in_turn;
      return u;
    }
    rr.cursor = (u + 1) % n;
    rr.served_in_turn = 0;
  }
  return std::nullopt;
}

// Deficit round robin: each user earns quantum * w_i / max_active_w packet
// credits per cycle visit and is served while a whole packet is covered.
// Deficits of demandless users are cleared, so credit never accumulates
// beyond one maximal quantum. Equal weights reduce to rfra_decide exactly.
inline std::optional<int> wrfra_decide(RoundRobinState& rr, const DeadlineTracker& tracker,
                                       std::span<const double> weights, int quantum = 1) {
  const int n = tracker.num_users();
  if (static_cast<int>(weights.size()) != n)
    throw std::invalid_argument("wrfra: weight per user required");
  if (quantum <= 0) throw std::invalid_argument("wrfra: quantum must be positive");
  double max_active = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!tracker.active(i)) continue;
    if (weights[static_cast<std::size_t>(i)] <= 0.0)
      throw std::invalid_argument("wrfra: weights must be positive");
    max_active = std::max(max_active, weights[static_cast<std::size_t>(i)]);
  }
  if (max_active <= 0.0) return std::nullopt;  // nobody has demand
  for (int step = 0; step <= 2 * n + 1; ++step) {
    const int u = rr.cursor;
    auto& credit = rr.deficit[static_cast<std::size_t>(u)];
    if (tracker.active(u)) {
      if (rr.arrival_pending) {
        credit += static_cast<double>(quantum) * weights[static_cast<std::size_t>(u)] / max_active;
        rr.arrival_pending = false;
      }
      if (credit >= 1.0) {
        credit -= 1.0;
        return u;
      }
    } else {
      credit = 0.0;
    }
    rr.cursor = (u + 1) % n;
    rr.arrival_pending = true;
  }
  assert(false && "wrfra: no serviceable user found in two cycles");
  return std::nullopt;
}

// Deficit round robin weighted by the size of each user's unit in service;
// weights therefore change only at unit boundaries, never mid-unit.
inline std::optional<int> dwrfra_decide(RoundRobinState& rr, const DeadlineTracker& tracker,
                                        int quantum = 1) {
  const int n = tracker.num_users();
  std::vector<double> weights(static_cast<std::size_t>(n), 1.0);
  for (int i = 0; i < n; ++i)
    if (tracker.active(i))
      weights[static_cast<std::size_t>(i)] = static_cast<double>(tracker.user(i).unit_total);
  return wrfra_decide(rr, tracker, weights, quantum);
}

// Uniform choice over users with outstanding demand.
inline std::optional<int> random_decide(const DeadlineTracker& tracker, CounterRng& rng) {
  int count = 0;
  for (int i = 0; i < tracker.num_users(); ++i)
    if (tracker.active(i)) ++count;
  if (count == 0) return std::nullopt;
  auto pick = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(count)));
  for (int i = 0; i < tracker.num_users(); ++i) {
    if (!tracker.active(i)) continue;
    if (pick-- == 0) return i;
  }
  return std::nullopt;
}

// Policy selector plus the mutable round-robin state it may carry.
struct SchedulerSpec {
  SchedulerPolicy policy = SchedulerPolicy::bdra;
  std::vector<double> weights;  // wrfra only; defaulted from trace rates
  int rfra_quantum = 1;
  bool random_ties = false;  // bdra only
};

class Scheduler {
 public:
  Scheduler(SchedulerSpec spec, int num_users) : spec_(std::move(spec)), rr_(num_users) {}

  const SchedulerSpec& spec() const { return spec_; }

  std::optional<int> decide(const DeadlineTracker& tracker, Slot slot, CounterRng& tiebreak_rng) {
    switch (spec_.policy) {
      case SchedulerPolicy::bdra:
        return spec_.random_ties ? bdra_decide_random_ties(tracker, slot, tiebreak_rng)
                                 : bdra_decide(tracker, slot);
      case SchedulerPolicy::rfra:
        return rfra_decide(rr_, tracker, spec_.rfra_quantum);
      case SchedulerPolicy::wrfra:
        return wrfra_decide(rr_, tracker, spec_.weights, spec_.rfra_quantum);
      case SchedulerPolicy::dwrfra:
        return dwrfra_decide(rr_, tracker, spec_.rfra_quantum);
      case SchedulerPolicy::random:
        return random_decide(tracker, tiebreak_rng);
    }
    return std::nullopt;
  }

 private:
  SchedulerSpec spec_;
  RoundRobinState rr_;
};

}  // namespace dashsim
