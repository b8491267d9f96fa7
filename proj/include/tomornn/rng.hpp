#pragma once

#include <cmath>
#include <cstdint>

#include "tomornn/common.hpp"

namespace tomornn {

/// Counter-seedable xoshiro256++ with hand-rolled draws.
///
/// Distribution code lives here (instead of <random>) so that streams are
/// bit-reproducible across standard library implementations, and so that
/// per-trial streams can be derived from (master seed, indices) without
/// sharing state between workers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  /// Independent stream for a (master seed, index...) tuple.
  static Rng stream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    std::uint64_t x = master;
    std::uint64_t h = splitmix64(x) ^ (0x9e3779b97f4a7c15ull * (a + 1));
    h = splitmix64(h) ^ (0xbf58476d1ce4e5b9ull * (b + 1));
    h = splitmix64(h) ^ (0x94d049bb133111ebull * (c + 1));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform over {0, 1, ..., n-1} via rejection (no modulo bias).
  int uniform_int(int n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return static_cast<int>(v % bound);
  }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(2.0 * kPi * u2);
    have_cached_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  /// Circular complex Gaussian with E|z|^2 = variance.
  Complex circular_complex(double variance) {
    const double s = std::sqrt(0.5 * variance);
    const double re = s * normal();
    const double im = s * normal();
    return {re, im};
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace tomornn
