#pragma once

#include <cstdint>
#include <random>

namespace trajkit {

/// Seeded generator whose derived draws are defined here rather than by the
/// standard library's distributions, so scenes and initialisations are
/// bit-reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal (Box–Muller, one draw per call).
  double normal();

  /// Gamma(shape, 1) by Marsaglia–Tsang.
  double gamma(double shape);

  /// Beta(a, b) from two gamma draws.
  double beta(double a, double b);

  /// Poisson(mean) by inversion; fine for small means.
  std::uint64_t poisson(double mean);

  /// Derives an independent child generator from a stream label.
  Rng fork(std::uint64_t label);

 private:
  std::mt19937_64 engine_;
};

}  // namespace trajkit
