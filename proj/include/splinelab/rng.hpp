#ifndef SPLINELAB_RNG_HPP
#define SPLINELAB_RNG_HPP

#include <cmath>
#include <cstdint>

namespace splinelab {

/// SplitMix64: tiny deterministic generator with a platform-independent
/// sequence, enough for multistart sampling and test data.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : s_(seed) {}

  std::uint64_t next() {
    s_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

private:
  std::uint64_t s_;
};

} // namespace splinelab

#endif
