#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vadapt {

// Deterministic RNG. mt19937_64 has a standardized sequence, and the
// uniform/normal mappings below are implemented here rather than with
// std::*_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Degenerate stream that yields zeros; lets callers build a model for
  // shape/count inspection without paying for 10^8 normal draws.
  static Rng zeroed() {
    Rng r(0);
    r.zero_ = true;
    return r;
  }

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() {
    if (zero_) return 0.0;
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [lo, hi] inclusive
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (zero_) return lo;
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  // standard normal via Box-Muller (one value per call; the pair's second
  // half is cached)
  double normal() {
    if (zero_) return 0.0;
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  bool zero_ = false;
  double spare_ = 0.0;
};

}  // namespace vadapt
