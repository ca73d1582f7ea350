#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dashsim/model.hpp"
#include "dashsim/rng.hpp"

namespace dashsim {

// Finite-horizon success-probability recursion over delivered-count states.
// A state is admissible at slot k when its component sum is at most k (one
// packet can land per slot); it is feasible when every user's delivered count
// meets that user's demand curve at k. Values are the probability that all
// remaining deadlines are met under the chosen action rule.

using StateVec = std::vector<Packets>;

// Decision rule: 0-based user to serve, or -1 to idle the slot.
using PolicyFn = std::function<int(Slot k, std::span<const Packets> s)>;

struct OracleInstance {
  std::vector<PlayoutCurve> curves;  // one per user, equal horizon
  std::vector<double> beta;          // per-user per-slot success probability

  int num_users() const { return static_cast<int>(curves.size()); }
  Slot horizon() const { return curves.empty() ? 0 : curves.front().horizon; }
};

namespace oracle_detail {

inline std::uint64_t pack_state(std::span<const Packets> s) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    key |= static_cast<std::uint64_t>(s[i]) << (8 * i);
  return key;
}

inline std::int64_t state_count(int num_users, Slot horizon) {
  // C(horizon + num_users, num_users), the number of states with sum <= horizon.
  std::int64_t count = 1;
  for (int i = 1; i <= num_users; ++i) {
    count = count * (horizon + i) / i;
    if (count > (std::int64_t{1} << 40)) return count;  // caller guards
  }
  return count;
}

// Per-user cumulative demand at each slot, tabulated once per instance.
inline std::vector<std::vector<Packets>> demand_table(std::span<const PlayoutCurve> curves) {
  std::vector<std::vector<Packets>> demand(curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const Slot horizon = curves[i].horizon;
    demand[i].assign(static_cast<std::size_t>(horizon) + 1, 0);
    for (const auto& inc : curves[i].increments)
      for (Slot t = inc.deadline; t <= horizon; ++t) {
        auto& cell = demand[i][static_cast<std::size_t>(t)];
        cell = std::max(cell, inc.cumulative);
      }
  }
  return demand;
}

inline void validate_instance(std::span<const PlayoutCurve> curves, std::span<const double> beta) {
  if (curves.empty()) throw std::invalid_argument("oracle: at least one user required");
  if (beta.size() != curves.size())
    throw std::invalid_argument("oracle: one success probability per user required");
  for (double b : beta)
    if (b < 0.0 || b > 1.0) throw std::invalid_argument("oracle: beta outside [0, 1]");
  for (const auto& c : curves) {
    if (c.horizon != curves.front().horizon)
      throw std::invalid_argument("oracle: curves must share a horizon");
    if (c.horizon > 62) throw std::invalid_argument("oracle: horizon too large for exact solve");
  }
}

}  // namespace oracle_detail

// All delivered-count vectors with component sum <= horizon, lexicographic.
inline std::vector<StateVec> enumerate_states(int num_users, Slot horizon) {
  if (num_users <= 0 || num_users > 8)
    throw std::invalid_argument("enumerate_states: user count outside [1, 8]");
  if (horizon < 0 || horizon > 255)
    throw std::invalid_argument("enumerate_states: horizon outside [0, 255]");
  const std::int64_t count = oracle_detail::state_count(num_users, horizon);
  if (count > 20'000'000)
    throw std::invalid_argument("enumerate_states: state space too large");
  std::vector<StateVec> states;
  states.reserve(static_cast<std::size_t>(count));
  StateVec s(static_cast<std::size_t>(num_users), 0);
  std::function<void(int, Packets)> rec = [&](int i, Packets budget) {
    if (i == num_users) {
      states.push_back(s);
      return;
    }
    for (Packets v = 0; v <= budget; ++v) {
      s[static_cast<std::size_t>(i)] = v;
      rec(i + 1, budget - v);
    }
    s[static_cast<std::size_t>(i)] = 0;
  };
  rec(0, horizon);
  return states;
}

// Value and argmax tables for every admissible (slot, state) pair.
struct ValueTable {
  int num_users = 0;
  Slot horizon = 0;
  std::vector<StateVec> states;                       // all states with sum <= horizon
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<std::vector<double>> value;             // [slot][state]
  std::vector<std::vector<int>> action;               // [slot][state], -1 where moot

  std::size_t state_index(std::span<const Packets> s) const {
    auto it = index.find(oracle_detail::pack_state(s));
    if (it == index.end()) throw std::invalid_argument("value table: unknown state");
    return it->second;
  }
  double at(Slot k, std::span<const Packets> s) const {
    return value[static_cast<std::size_t>(k)][state_index(s)];
  }
};

namespace oracle_detail {

// Shared backward induction. choose() receives (k, state index, state) and
// returns the acting user, or -1 to idle; when maximize is true the Bellman
// max over real actions is used instead and choose() is ignored.
template <typename ChooseFn>
ValueTable backward_induction(std::span<const PlayoutCurve> curves, std::span<const double> beta,
                              bool maximize, ChooseFn&& choose) {
  validate_instance(curves, beta);
  const int n = static_cast<int>(curves.size());
  const Slot horizon = curves.front().horizon;
  ValueTable table;
  table.num_users = n;
  table.horizon = horizon;
  table.states = enumerate_states(n, horizon);
  table.index.reserve(table.states.size() * 2);
  for (std::size_t idx = 0; idx < table.states.size(); ++idx)
    table.index.emplace(pack_state(table.states[idx]), idx);
  table.value.assign(static_cast<std::size_t>(horizon) + 1,
                     std::vector<double>(table.states.size(), 0.0));
  table.action.assign(static_cast<std::size_t>(horizon) + 1,
                      std::vector<int>(table.states.size(), -1));
  const auto demand = demand_table(curves);

  const auto feasible = [&](const StateVec& s, Slot k) {
    for (int i = 0; i < n; ++i)
      if (s[static_cast<std::size_t>(i)] < demand[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)])
        return false;
    return true;
  };

  StateVec successor(static_cast<std::size_t>(n), 0);
  for (Slot k = horizon; k >= 0; --k) {
    auto& layer = table.value[static_cast<std::size_t>(k)];
    auto& acts = table.action[static_cast<std::size_t>(k)];
    const auto& next = table.value[static_cast<std::size_t>(std::min(k + 1, horizon))];
    for (std::size_t idx = 0; idx < table.states.size(); ++idx) {
      const StateVec& s = table.states[idx];
      Packets sum = 0;
      for (Packets v : s) sum += v;
      if (sum > k) continue;  // not admissible this early
      if (!feasible(s, k)) {
        layer[idx] = 0.0;
        continue;
      }
      if (k == horizon) {
        layer[idx] = 1.0;
        continue;
      }
      successor = s;
      const auto value_of = [&](int a) {
        const double b = beta[static_cast<std::size_t>(a)];
        ++successor[static_cast<std::size_t>(a)];
        const double up = next[table.index.at(pack_state(successor))];
        --successor[static_cast<std::size_t>(a)];
        return (1.0 - b) * next[idx] + b * up;
      };
      if (maximize) {
        double best = -1.0;
        int best_a = -1;
        for (int a = 0; a < n; ++a) {
          const double v = value_of(a);
          if (v > best) {
            best = v;
            best_a = a;
          }
        }
        layer[idx] = best;
        acts[idx] = best_a;
      } else {
        const int a = choose(k, s);
        if (a < 0) {
          layer[idx] = next[idx];  // idle slot
        } else {
          if (a >= n) throw std::invalid_argument("policy returned invalid user");
          layer[idx] = value_of(a);
        }
        acts[idx] = a;
      }
    }
  }
  return table;
}

}  // namespace oracle_detail

// Exact optimal success probabilities and an argmax action table.
inline ValueTable optimal_value(std::span<const PlayoutCurve> curves,
                                std::span<const double> beta) {
  return oracle_detail::backward_induction(curves, beta, true,
                                           [](Slot, const StateVec&) { return -1; });
}

// Exact success probabilities of a fixed decision rule, every admissible state.
inline ValueTable policy_table(const PolicyFn& policy, std::span<const PlayoutCurve> curves,
                               std::span<const double> beta) {
  return oracle_detail::backward_induction(
      curves, beta, false,
      [&policy](Slot k, const StateVec& s) { return policy(k, std::span<const Packets>(s)); });
}

// Success probability of a decision rule from one starting point.
inline double policy_value(const PolicyFn& policy, std::span<const PlayoutCurve> curves,
                           std::span<const double> beta, Slot k, std::span<const Packets> s) {
  oracle_detail::validate_instance(curves, beta);
  const Slot horizon = curves.front().horizon;
  if (k < 0 || k > horizon) throw std::invalid_argument("policy_value: slot outside horizon");
  if (s.size() != curves.size()) throw std::invalid_argument("policy_value: state size mismatch");
  Packets sum = 0;
  for (Packets v : s) {
    if (v < 0) throw std::invalid_argument("policy_value: negative delivered count");
    sum += v;
  }
  if (sum > k) throw std::invalid_argument("policy_value: state not reachable by slot");
  const ValueTable table = policy_table(policy, curves, beta);
  return table.at(k, s);
}

// Earliest-deadline decision rule read off demand curves: serve the user
// owning the earliest increment not yet covered by its delivered count; ties
// prefer the smaller increment, then the lower index. Never idles while any
// demand is unmet, and never looks at channel statistics.
inline PolicyFn bdra_curve_policy(std::vector<PlayoutCurve> curves) {
  return [curves = std::move(curves)](Slot, std::span<const Packets> s) -> int {
    int best = -1;
    Slot best_deadline = 0;
    Packets best_jump = 0;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      Packets credit = s[i];
      for (std::size_t m = 0; m < curves[i].increments.size(); ++m) {
        const Packets q = curves[i].jump(m);
        if (credit >= q) {
          credit -= q;
          continue;
        }
        const Slot d = curves[i].increments[m].deadline;
        if (best < 0 || d < best_deadline || (d == best_deadline && q < best_jump)) {
          best = static_cast<int>(i);
          best_deadline = d;
          best_jump = q;
        }
        break;  // earliest unmet increment found for this user
      }
    }
    return best;
  };
}

// Adversarial foil for verification runs: serves the latest unmet deadline.
inline PolicyFn latest_deadline_policy(std::vector<PlayoutCurve> curves) {
  return [curves = std::move(curves)](Slot, std::span<const Packets> s) -> int {
    int best = -1;
    Slot best_deadline = -1;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      Packets credit = s[i];
      for (std::size_t m = 0; m < curves[i].increments.size(); ++m) {
        const Packets q = curves[i].jump(m);
        if (credit >= q) {
          credit -= q;
          continue;
        }
        const Slot d = curves[i].increments[m].deadline;
        if (d > best_deadline) {
          best = static_cast<int>(i);
          best_deadline = d;
        }
        break;
      }
    }
    return best;
  };
}

struct VerifyReport {
  double max_gap = 0.0;       // max over admissible (k, s) of optimal minus policy value
  bool exchange_ok = true;    // one-step deviations never beat the policy
  double policy_root = 0.0;   // policy value at (0, zero state)
  double optimal_root = 0.0;
  Slot worst_slot = 0;
  StateVec worst_state;
  std::int64_t states_checked = 0;
};

// Compares a decision rule against the exact optimum on every admissible
// (slot, state) pair and checks the one-step-deviation inequality: serving
// any user for one slot and then following the rule never beats the rule.
inline VerifyReport verify_policy(const PolicyFn& policy, std::span<const PlayoutCurve> curves,
                                  std::span<const double> beta, double tolerance = 1e-12) {
  const ValueTable best = optimal_value(curves, beta);
  const ValueTable mine = policy_table(policy, curves, beta);
  const int n = best.num_users;
  VerifyReport report;
  report.worst_state.assign(static_cast<std::size_t>(n), 0);
  report.policy_root = mine.value[0][mine.state_index(report.worst_state)];
  report.optimal_root = best.value[0][best.state_index(report.worst_state)];
  StateVec successor(static_cast<std::size_t>(n), 0);
  for (Slot k = 0; k <= best.horizon; ++k) {
    const auto& opt_layer = best.value[static_cast<std::size_t>(k)];
    const auto& pol_layer = mine.value[static_cast<std::size_t>(k)];
    for (std::size_t idx = 0; idx < best.states.size(); ++idx) {
      const StateVec& s = best.states[idx];
      Packets sum = 0;
      for (Packets v : s) sum += v;
      if (sum > k) continue;
      ++report.states_checked;
      const double gap = opt_layer[idx] - pol_layer[idx];
      if (gap > report.max_gap) {
        report.max_gap = gap;
        report.worst_slot = k;
        report.worst_state = s;
      }
      if (k == best.horizon) continue;
      // One-step deviation: only meaningful where the value is not already
      // forced to zero by a violated deadline (both sides vanish there).
      if (pol_layer[idx] == 0.0 && opt_layer[idx] == 0.0) continue;
      const auto& pol_next = mine.value[static_cast<std::size_t>(k + 1)];
      for (int a = 0; a < n; ++a) {
        successor = s;
        ++successor[static_cast<std::size_t>(a)];
        const double b = beta[static_cast<std::size_t>(a)];
        const double dev = (1.0 - b) * pol_next[idx] +
                           b * pol_next[mine.index.at(oracle_detail::pack_state(successor))];
        if (dev > pol_layer[idx] + tolerance) report.exchange_ok = false;
      }
    }
  }
  return report;
}

inline VerifyReport verify_bdra(const OracleInstance& instance, double tolerance = 1e-12) {
  return verify_policy(bdra_curve_policy(instance.curves), instance.curves, instance.beta,
                       tolerance);
}

// Single-user success probability by direct negative-binomial convolution:
// the time to accumulate q further successes is negative-binomial, and every
// increment's completion time must land inside its deadline. Shares nothing
// with the recursion above.
inline double single_user_closed_form(const PlayoutCurve& curve, double beta) {
  if (beta < 0.0 || beta > 1.0)
    throw std::invalid_argument("closed form: beta outside [0, 1]");
  if (curve.increments.empty()) return 1.0;
  if (beta == 0.0) return 0.0;
  const Slot horizon = curve.increments.back().deadline;
  // Pascal's triangle keeps binomial coefficients exact in double.
  const std::size_t rows = static_cast<std::size_t>(horizon) + 1;
  std::vector<std::vector<double>> choose(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    choose[r].assign(r + 1, 1.0);
    for (std::size_t c = 1; c < r; ++c) choose[r][c] = choose[r - 1][c - 1] + choose[r - 1][c];
  }
  const auto neg_binomial = [&](Slot extra_slots, Packets successes) -> double {
    if (extra_slots < successes) return 0.0;
    return choose[static_cast<std::size_t>(extra_slots - 1)][static_cast<std::size_t>(successes - 1)] *
           std::pow(beta, static_cast<double>(successes)) *
           std::pow(1.0 - beta, static_cast<double>(extra_slots - successes));
  };
  // arrival[t]: probability the current increment's last packet lands exactly
  // at slot t with all earlier increments on time.
  std::vector<double> arrival(static_cast<std::size_t>(horizon) + 1, 0.0);
  const Packets q1 = curve.jump(0);
  for (Slot t = q1; t <= curve.increments[0].deadline; ++t)
    arrival[static_cast<std::size_t>(t)] = neg_binomial(t, q1);
  for (std::size_t m = 1; m < curve.increments.size(); ++m) {
    const Packets q = curve.jump(m);
    const Slot prev_deadline = curve.increments[m - 1].deadline;
    const Slot deadline = curve.increments[m].deadline;
    std::vector<double> next(static_cast<std::size_t>(horizon) + 1, 0.0);
    for (Slot u = 0; u <= prev_deadline; ++u) {
      const double mass = arrival[static_cast<std::size_t>(u)];
      if (mass == 0.0) continue;
      for (Slot t = u + q; t <= deadline; ++t)
        next[static_cast<std::size_t>(t)] += mass * neg_binomial(t - u, q);
    }
    arrival.swap(next);
  }
  double total = 0.0;
  for (Slot t = 0; t <= curve.increments.back().deadline; ++t)
    total += arrival[static_cast<std::size_t>(t)];
  return std::min(total, 1.0);
}

// Random solvable-size instance for verification sweeps.
struct InstanceOptions {
  int min_users = 2;
  int max_users = 3;
  Slot min_horizon = 4;
  Slot max_horizon = 10;
  double beta_lo = 0.1;
  double beta_hi = 0.95;
  int max_jumps_per_user = 3;
  Packets max_jump = 3;
  // Fraction of instances with one demand inflated past any feasible plan.
  double overload_fraction = 0.15;
  Slot max_deadline_slack = 2;
};

// Demands are read off a random single-server schedule, so unless overloaded
// the instance admits a plan meeting every deadline and the root value is
// positive. Each slot of the schedule owns one packet of capacity; a user's
// increment at deadline d asks for a prefix of its owned slots ending at or
// before d.
inline OracleInstance random_instance(CounterRng& rng, const InstanceOptions& opt = {}) {
  OracleInstance inst;
  const int n = static_cast<int>(rng.uniform_int(opt.min_users, opt.max_users));
  const Slot horizon = rng.uniform_int(opt.min_horizon, opt.max_horizon);
  std::vector<int> owner(static_cast<std::size_t>(horizon));
  for (Slot t = 0; t < horizon; ++t)
    owner[static_cast<std::size_t>(t)] =
        t < n ? static_cast<int>(t) : static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  for (Slot t = horizon - 1; t > 0; --t)
    std::swap(owner[static_cast<std::size_t>(t)],
              owner[rng.below(static_cast<std::uint64_t>(t) + 1)]);
  inst.curves.resize(static_cast<std::size_t>(n));
  inst.beta.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    inst.beta[static_cast<std::size_t>(i)] = rng.uniform(opt.beta_lo, opt.beta_hi);
    // owned[c-1] is the slot where the schedule delivers this user's c-th packet.
    std::vector<Slot> owned;
    for (Slot t = 0; t < horizon; ++t)
      if (owner[static_cast<std::size_t>(t)] == i) owned.push_back(t + 1);
    PlayoutCurve& curve = inst.curves[static_cast<std::size_t>(i)];
    curve.horizon = horizon;
    const int jumps = static_cast<int>(
        rng.uniform_int(1, std::min<Slot>(opt.max_jumps_per_user,
                                          static_cast<Slot>(owned.size()))));
    Packets cumulative = 0;
    Slot prev_deadline = 0;
    for (int k = 0; k < jumps; ++k) {
      const Packets room = static_cast<Packets>(owned.size()) - cumulative;
      if (room <= 0) break;
      cumulative += rng.uniform_int(1, std::min(opt.max_jump, room));
      const Slot earliest = owned[static_cast<std::size_t>(cumulative) - 1];
      const Slot d = std::max(prev_deadline + 1,
                              earliest + rng.uniform_int(0, opt.max_deadline_slack));
      if (d > horizon) break;
      curve.increments.push_back({d, cumulative});
      prev_deadline = d;
    }
    if (curve.increments.empty()) curve.increments.push_back({owned.front(), 1});
  }
  if (rng.next_double() < opt.overload_fraction) {
    const std::size_t victim = rng.below(static_cast<std::uint64_t>(n));
    auto& jumps = inst.curves[victim].increments;
    const std::size_t j = rng.below(jumps.size());
    const Packets bump = rng.uniform_int(1, 2);
    for (std::size_t k = j; k < jumps.size(); ++k) jumps[k].cumulative += bump;
  }
  return inst;
}

// Tight two-user instance where serving order decides the outcome: one packet
// due at slot 1 and one at slot 2 cannot both be saved by a late-first rule.
inline OracleInstance ordering_counterexample() {
  OracleInstance inst;
  inst.curves.resize(2);
  inst.curves[0].increments = {{1, 1}};
  inst.curves[0].horizon = 2;
  inst.curves[1].increments = {{2, 1}};
  inst.curves[1].horizon = 2;
  inst.beta = {0.6, 0.6};
  return inst;
}

}  // namespace dashsim
