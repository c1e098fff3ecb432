#include "countica/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace countica {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::uint64_t Rng::mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t index) {
  return Rng(mix(seed) ^ mix(0x5851F42D4C957F2DULL * (index + 1)));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = uniform_pos();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double Rng::normal(double mean, double var) {
  if (!(var > 0.0)) throw std::invalid_argument("rng: normal variance must be > 0");
  return mean + std::sqrt(var) * normal();
}

long Rng::poisson(double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw std::invalid_argument("rng: poisson rate must be finite and >= 0");
  if (rate == 0.0) return 0;
  if (rate < 10.0) return poisson_inversion(rate);
  return poisson_ptrs(rate);
}

long Rng::poisson_inversion(double rate) {
  const double u = uniform();
  double p = std::exp(-rate);
  double cdf = p;
  long k = 0;
  while (u > cdf && k < 2000) {
    ++k;
    p *= rate / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Hormann's PTRS transformed rejection, valid for rate >= 10.
long Rng::poisson_ptrs(double rate) {
  const double log_rate = std::log(rate);
  const double b = 0.931 + 2.53 * std::sqrt(rate);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform_pos();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + rate + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    const double k = kf;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        k * log_rate - rate - std::lgamma(k + 1.0))
      return static_cast<long>(kf);
  }
}

int Rng::categorical(const Eigen::VectorXd& probs) {
  const double u = uniform();
  double cum = 0.0;
  const int n = static_cast<int>(probs.size());
  for (int k = 0; k < n; ++k) {
    cum += probs[k];
    if (u < cum) return k;
  }
  return n - 1;
}

}  // namespace countica
