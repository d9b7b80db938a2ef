#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace d2ml {

/// SplitMix64 stream: output k is mix(state0 + k * 0x9E3779B97F4A7C15), with
/// state0 = mix(seed). Every variate below is a fixed transform of the raw
/// 64-bit outputs, so a seed pins the full sequence independent of the
/// standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed)) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform on the open interval (0, 1): (top 53 bits + 0.5) / 2^53.
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Box-Muller, cosine branch only: two uniforms per normal.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Chi-square with two degrees of freedom (exponential with mean 2).
  double chi2_2() { return -2.0 * std::log(uniform()); }

 private:
  std::uint64_t state_;
};

}  // namespace d2ml
