#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace yono {

/// Deterministic random source.
///
/// Wraps std::mt19937_64 but derives uniform and normal variates itself:
/// the standard-library distributions are implementation-defined, and run
/// reproducibility here is a contract, not a nicety.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  /// Standard normal via Box-Muller. Stateless between calls.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Child generator with an independent stream.
  Rng spawn() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle with a pinned visit order (std::shuffle is
/// implementation-defined).
template <class T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace yono
