#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace spt {

/// Seeded generator with a platform-independent draw sequence.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// algorithms behind std::normal_distribution and
/// std::uniform_real_distribution are not. Both transforms are therefore
/// written out here so that paths and chains are bit-reproducible across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1), 53 random bits.
  double uniform() {
    double u;
    do {
      u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    } while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate of each pair is
  /// cached, so draws come in a fixed order.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Derives an independent child seed; used to give chains and folds
  /// their own streams.
  std::uint64_t split() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace spt
