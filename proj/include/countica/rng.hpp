#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace countica {

/// Deterministic random source. All distribution draws are implemented by
/// hand on top of mt19937_64 so that a seed produces the same stream on
/// every platform (the standard library's normal/poisson distributions are
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  /// Independent stream for (seed, index), used to parallelize across
  /// sequences without coupling draw order.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  /// Uniform on [0, 1).
  double uniform();

  /// Uniform on (0, 1].
  double uniform_pos();

  /// Standard normal via Box-Muller; consumes exactly two uniforms per draw.
  double normal();

  double normal(double mean, double var);

  /// Poisson(rate): sequential inversion for rate < 10, PTRS transformed
  /// rejection above.
  long poisson(double rate);

  /// Index k with probability probs[k]; probs must sum to ~1.
  int categorical(const Eigen::VectorXd& probs);

  std::uint64_t raw() { return engine_(); }

 private:
  static std::uint64_t mix(std::uint64_t x);  // splitmix64 finalizer
  long poisson_inversion(double rate);
  long poisson_ptrs(double rate);

  std::mt19937_64 engine_;
};

}  // namespace countica
