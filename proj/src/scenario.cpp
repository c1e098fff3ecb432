#include "countica/scenario.hpp"

#include "countica/metrics.hpp"
#include "countica/mstep.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace countica {

ScenarioSpec ScenarioSpec::named(const std::string& name) {
  ScenarioSpec spec;
  spec.name = name;
  if (name == "moderate_coherence") {
    spec.target_max_coherence = 0.65;
  } else if (name == "high_coherence") {
    spec.target_max_coherence = 0.87;
  } else if (name == "low_excitation") {
    spec.target_max_coherence = 0.51;
    spec.excitation_scale = 0.5;
    spec.target_zero_fraction = 0.31;
  } else {
    throw std::invalid_argument("unknown scenario name: " + name);
  }
  return spec;
}

void ScenarioSpec::validate() const {
  dims.validate();
  if (n < 0) throw std::invalid_argument("scenario: n >= 0 required");
  if (!(target_max_coherence > 0.0 && target_max_coherence < 1.0))
    throw std::invalid_argument("scenario: coherence target must be in (0, 1)");
  if (!(excitation_scale > 0.0))
    throw std::invalid_argument("scenario: excitation_scale > 0 required");
}

namespace {

// Interpolate between the closest orthonormal frame (coherence 0) and a rank
// one anchor frame (coherence -> 1); max coherence grows continuously with
// lambda, so bisection pins the target.
MatrixXd shape_coherence(const MatrixXd& Gamma0, double target, double band) {
  Eigen::JacobiSVD<MatrixXd> svd(Gamma0, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const MatrixXd ortho = svd.matrixU() * svd.matrixV().transpose();
  VectorXd anchor = Gamma0.rowwise().sum();
  if (!(anchor.norm() > 0.0)) anchor = Gamma0.col(0);
  anchor /= anchor.norm();
  const MatrixXd collapsed = anchor * Eigen::RowVectorXd::Ones(Gamma0.cols());

  auto blend = [&](double lambda) {
    return project_gamma_columns((1.0 - lambda) * ortho + lambda * collapsed);
  };

  double lo = 0.0, hi = 1.0 - 1e-9;
  if (max_pairwise_coherence(blend(hi)) < target)
    throw std::runtime_error("scenario: coherence shaping cannot reach target");
  MatrixXd best;
  for (int iter = 0; iter < 10000; ++iter) {
    const double mid = 0.5 * (lo + hi);
    best = blend(mid);
    const double c = max_pairwise_coherence(best);
    if (std::abs(c - target) <= 0.25 * band) return best;
    (c < target ? lo : hi) = mid;
  }
  throw std::runtime_error("scenario: coherence shaping failed to converge");
}

double zero_fraction(const Dataset& data) {
  long zeros = 0;
  long total = 0;
  for (const Sequence& seq : data.sequences) {
    zeros += (seq.counts.array() == 0).count();
    total += seq.counts.size();
  }
  return total > 0 ? static_cast<double>(zeros) / total : 0.0;
}

}  // namespace

ScenarioResult generate_scenario(const ScenarioSpec& spec, Rng& rng) {
  spec.validate();
  const Dims& dims = spec.dims;

  MatrixXd Gamma0(dims.K, dims.d);
  for (int k = 0; k < dims.K; ++k)
    for (int j = 0; j < dims.d; ++j) Gamma0(k, j) = rng.normal();

  ScenarioResult out;
  out.oracle = default_init_model(dims);
  out.oracle.emission.Gamma = dims.d > 1
                                  ? shape_coherence(Gamma0, spec.target_max_coherence,
                                                    spec.coherence_band)
                                  : project_gamma_columns(Gamma0);
  out.oracle.emission.gamma_normalized = true;

  // Stationary AR sources with pairwise-distinct coefficients so the mixing
  // is identifiable from lagged second-order structure.
  for (int i = 0; i < dims.d; ++i) {
    const double Bi = dims.d > 1 ? 0.35 + 0.55 * i / (dims.d - 1) : 0.6;
    const double v = spec.excitation_scale * spec.excitation_scale;
    for (int c = 0; c < dims.C; ++c) {
      out.oracle.dynamics.B(i, c) = Bi;
      out.oracle.dynamics.b(i, c) = 0.0;
      out.oracle.dynamics.psi(i, c) = (1.0 - Bi * Bi) * v;
      out.oracle.dynamics.b_bar(i, c) = 0.0;
      out.oracle.dynamics.psi_bar(i, c) = v;
    }
  }

  // Baseline log-abundance with a small per-feature spread.
  double base = std::log(20.0);
  VectorXd jitter(dims.K);
  for (int k = 0; k < dims.K; ++k) jitter[k] = 0.3 * rng.normal();

  const std::uint64_t data_seed = rng.raw();
  auto simulate = [&](double baseline, int n_seq) {
    out.oracle.emission.eta = (jitter.array() + baseline).matrix();
    return sample_dataset(out.oracle, n_seq, OffsetsPolicy::zero(), data_seed);
  };

  if (spec.target_zero_fraction >= 0.0) {
    // Scale log-intensities down (shift the baseline) until the simulated
    // zero fraction lands in the band.
    const int probe_n = std::max(20, std::min(spec.n, 60));
    double lo = -4.0, hi = 6.0;
    bool hit = false;
    for (int iter = 0; iter < 60; ++iter) {
      base = 0.5 * (lo + hi);
      const double zf = zero_fraction(simulate(base, probe_n).dataset);
      if (std::abs(zf - spec.target_zero_fraction) <= 0.6 * spec.zero_fraction_band) {
        hit = true;
        break;
      }
      (zf > spec.target_zero_fraction ? lo : hi) = base;
    }
    if (!hit) throw std::runtime_error("scenario: zero-fraction shaping failed");
  }

  SimulationResult sim = simulate(base, spec.n);
  out.dataset = std::move(sim.dataset);
  out.latents = std::move(sim.latents);
  out.achieved_max_coherence = max_pairwise_coherence(out.oracle.emission.Gamma);
  out.achieved_zero_fraction = zero_fraction(out.dataset);
  return out;
}

}  // namespace countica
