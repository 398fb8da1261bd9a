#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace epow {

/// Seeded random source with hand-rolled distributions. std:: distribution
/// objects are implementation-defined, so anything that must replay
/// identically across toolchains draws through this wrapper instead.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Integer in [0, n), n > 0.
  uint64_t below(uint64_t n) { return eng_() % n; }

  /// Exponential with rate lambda > 0.
  double exponential(double lambda) {
    return -std::log1p(-uniform01()) / lambda;
  }

  /// Log-uniform in [lo, hi], 0 < lo <= hi.
  double log_uniform(double lo, double hi) {
    return lo * std::exp(uniform01() * std::log(hi / lo));
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace epow
