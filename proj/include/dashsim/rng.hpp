#pragma once

#include <cmath>
#include <cstdint>

namespace dashsim {

// Stream roles keep independent random sequences per concern, so adding or
// removing draws in one stream never perturbs another.
enum class StreamRole : std::uint64_t {
  channel = 1,
  tiebreak = 2,
  trace = 3,
  instance = 4,
};

namespace detail {

// 64-bit finalizer (splitmix64 / murmur3 style avalanche).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Counter-based generator: output i is a pure function of (key, i), so any
// (seed, episode, role) triple names a reproducible stream independent of
// evaluation order elsewhere.
class CounterRng {
 public:
  CounterRng() : CounterRng(0, 0, StreamRole::channel) {}

  CounterRng(std::uint64_t seed, std::uint64_t episode, StreamRole role)
      : key_(detail::mix64(detail::mix64(seed ^ 0x5851f42d4c957f2dULL) +
                           detail::mix64(episode) +
                           static_cast<std::uint64_t>(role))) {}

  std::uint64_t next_u64() {
    return detail::mix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  // Uniform in [0, n). Fixed-point multiply keeps the draw count at one.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; consumes two draws per call, no cached spare.
  double normal(double mean, double stddev) {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace dashsim
