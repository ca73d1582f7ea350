#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dashsim/model.hpp"
#include "dashsim/rng.hpp"

namespace dashsim {

// Per-user packet erasure process. Bernoulli draws an independent loss per
// transmission; the Markov variant modulates the loss probability with a
// per-user state chain that transitions once per dwell period.
class ChannelModel {
 public:
  enum class Kind { bernoulli, markov };

  static ChannelModel bernoulli(std::vector<double> success_probs) {
    for (double p : success_probs)
      if (p < 0.0 || p > 1.0)
        throw std::invalid_argument("channel: success probability outside [0, 1]");
    ChannelModel m;
    m.kind_ = Kind::bernoulli;
    m.success_ = std::move(success_probs);
    return m;
  }

  static ChannelModel markov(int num_users, std::vector<double> drop_probs,
                             std::vector<std::vector<double>> transition, Slot dwell_slots) {
    if (num_users <= 0) throw std::invalid_argument("channel: need at least one user");
    const std::size_t k = drop_probs.size();
    if (k == 0 || transition.size() != k)
      throw std::invalid_argument("channel: transition matrix must be square in the state count");
    for (double p : drop_probs)
      if (p < 0.0 || p > 1.0)
        throw std::invalid_argument("channel: drop probability outside [0, 1]");
    for (const auto& row : transition) {
      if (row.size() != k)
        throw std::invalid_argument("channel: transition matrix must be square");
      double sum = 0.0;
      for (double p : row) {
        if (p < 0.0) throw std::invalid_argument("channel: negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("channel: transition row must sum to 1");
    }
    if (dwell_slots <= 0) throw std::invalid_argument("channel: dwell_slots must be positive");
    ChannelModel m;
    m.kind_ = Kind::markov;
    m.drop_ = std::move(drop_probs);
    m.transition_ = std::move(transition);
    m.dwell_slots_ = dwell_slots;
    m.state_.assign(static_cast<std::size_t>(num_users), 0);
    return m;
  }

  // Widely used three-state loss profile: near-lossless states with a heavy
  // middle dwell, resampled every dwell period.
  static ChannelModel default_markov(int num_users, Slot dwell_slots) {
    return markov(num_users, {0.001, 0.002, 0.005},
                  {{0.3, 0.6, 0.1}, {0.2, 0.6, 0.2}, {0.1, 0.6, 0.3}}, dwell_slots);
  }

  Kind kind() const { return kind_; }
  int num_users() const {
    return static_cast<int>(kind_ == Kind::bernoulli ? success_.size() : state_.size());
  }
  Slot dwell_slots() const { return dwell_slots_; }
  const std::vector<int>& states() const { return state_; }
  double success_prob(int user) const {
    return kind_ == Kind::bernoulli
               ? success_[static_cast<std::size_t>(user)]
               : 1.0 - drop_[static_cast<std::size_t>(state_[static_cast<std::size_t>(user)])];
  }

  // Resamples every user's chain state at dwell boundaries; consumes exactly
  // one draw per user there and none otherwise. No-op for Bernoulli.
  void advance(Slot slot, CounterRng& rng) {
    if (kind_ != Kind::markov) return;
    if (slot % dwell_slots_ != 0) return;
    for (auto& s : state_) {
      const double u = rng.next_double();
      const auto& row = transition_[static_cast<std::size_t>(s)];
      double acc = 0.0;
      int next = static_cast<int>(row.size()) - 1;
      for (std::size_t j = 0; j < row.size(); ++j) {
        acc += row[j];
        if (u < acc) {
          next = static_cast<int>(j);
          break;
        }
      }
      s = next;
    }
  }

  // One transmission attempt toward user; consumes exactly one draw.
  bool sample(int user, CounterRng& rng) { return rng.next_double() < success_prob(user); }

 private:
  Kind kind_ = Kind::bernoulli;
  std::vector<double> success_;                   // bernoulli
  std::vector<double> drop_;                      // markov
  std::vector<std::vector<double>> transition_;   // markov
  Slot dwell_slots_ = 0;
  std::vector<int> state_;
};

}  // namespace dashsim
