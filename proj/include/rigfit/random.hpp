#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rigfit {

/// Counter-based generator: draw i of (seed, stream) is
///   mix(key + i * 0x9E3779B97F4A7C15),  key = mix(seed) ^ mix(stream ^ 0xD1B54A32D192ED03)
/// where mix is the SplitMix64 finalizer. Streams are independent and any
/// draw can be recomputed from (seed, stream, counter) alone.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed) ^ mix(stream ^ 0xD1B54A32D192ED03ULL)) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two draws.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n).
  int index(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rigfit
