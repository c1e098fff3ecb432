#include "countica/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace countica {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

VectorXi sample_regime_chain(const RegimePrior& prior, int component, int T, Rng& rng) {
  const int d = static_cast<int>(prior.pi.rows());
  if (component < 0 || component >= d)
    throw std::invalid_argument("sample_regime_chain: component index out of range");
  if (T < 1) throw std::invalid_argument("sample_regime_chain: T >= 1 required");
  VectorXi labels(T);
  labels[0] = rng.categorical(prior.pi.row(component).transpose());
  const MatrixXd& A = prior.A[component];
  for (int t = 1; t < T; ++t)
    labels[t] = rng.categorical(A.col(labels[t - 1]));
  return labels;
}

VectorXd sample_source_path(const SourceDynamics& dynamics, int component,
                            const VectorXi& labels, Rng& rng) {
  const int d = static_cast<int>(dynamics.B.rows());
  const int C = static_cast<int>(dynamics.B.cols());
  if (component < 0 || component >= d)
    throw std::invalid_argument("sample_source_path: component index out of range");
  const int T = static_cast<int>(labels.size());
  if (T < 1) throw std::invalid_argument("sample_source_path: empty label path");
  if ((labels.array() < 0).any() || (labels.array() >= C).any())
    throw std::invalid_argument("sample_source_path: label out of range");
  if (!(dynamics.psi_bar.row(component).minCoeff() > 0.0) ||
      !(dynamics.psi.row(component).minCoeff() > 0.0))
    throw std::invalid_argument("sample_source_path: non-positive variance");

  VectorXd s(T);
  {
    const int k = labels[0];
    s[0] = rng.normal(dynamics.b_bar(component, k), dynamics.psi_bar(component, k));
  }
  for (int t = 1; t < T; ++t) {
    const int k = labels[t];
    s[t] = rng.normal(dynamics.B(component, k) * s[t - 1] + dynamics.b(component, k),
                      dynamics.psi(component, k));
  }
  return s;
}

MatrixXi emit_counts(const Emission& emission, const VectorXd& offsets,
                     const MatrixXd& s, Rng& rng, double log_rate_cap) {
  const int T = static_cast<int>(s.rows());
  const int K = static_cast<int>(emission.Gamma.rows());
  if (emission.Gamma.cols() != s.cols())
    throw std::invalid_argument("emit_counts: Gamma/source dimension mismatch");
  if (offsets.size() != T)
    throw std::invalid_argument("emit_counts: offsets length != T");

  const MatrixXd log_rates =
      ((s * emission.Gamma.transpose()).colwise() + offsets).rowwise() +
      emission.eta.transpose();
  if (!log_rates.allFinite() || log_rates.maxCoeff() > log_rate_cap)
    throw std::runtime_error("emit_counts: log-rate exceeds cap " +
                             std::to_string(log_rate_cap));

  MatrixXi x(T, K);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k)
      x(t, k) = static_cast<int>(rng.poisson(std::exp(log_rates(t, k))));
  return x;
}

SimulationResult sample_dataset(const ModelParams& model, int n,
                                const OffsetsPolicy& offsets_policy,
                                std::uint64_t seed, double log_rate_cap) {
  if (n < 0) throw std::invalid_argument("sample_dataset: n >= 0 required");
  model.validate();
  if (offsets_policy.kind == OffsetsPolicy::Kind::LogsumReplay &&
      (offsets_policy.donor == nullptr || offsets_policy.donor->size() == 0))
    throw std::invalid_argument("sample_dataset: logsum replay needs a donor dataset");

  const Dims& dims = model.dims;
  SimulationResult out;
  out.dataset.sequences.reserve(n);
  out.latents.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    LatentPath path;
    path.u.resize(dims.T, dims.d);
    path.s.resize(dims.T, dims.d);
    for (int j = 0; j < dims.d; ++j) {
      const VectorXi labels = sample_regime_chain(model.prior, j, dims.T, rng);
      path.u.col(j) = labels;
      path.s.col(j) = sample_source_path(model.dynamics, j, labels, rng);
    }
    Sequence seq;
    if (offsets_policy.kind == OffsetsPolicy::Kind::LogsumReplay) {
      const Dataset& donor = *offsets_policy.donor;
      const VectorXd& o = donor.sequences[i % donor.size()].offsets;
      if (o.size() != dims.T)
        throw std::invalid_argument("sample_dataset: donor offsets length != T");
      seq.offsets = o;
    } else {
      seq.offsets = VectorXd::Zero(dims.T);
    }
    seq.counts = emit_counts(model.emission, seq.offsets, path.s, rng, log_rate_cap);
    seq.id = "seq" + std::to_string(i);
    out.dataset.sequences.push_back(std::move(seq));
    out.latents.push_back(std::move(path));
  }
  return out;
}

double log_joint(const ModelParams& model, const Sequence& seq, const LatentPath& path) {
  const Dims& dims = model.dims;
  if (seq.T() != path.u.rows() || seq.K() != dims.K || path.u.cols() != dims.d)
    throw std::invalid_argument("log_joint: inconsistent shapes");
  path.validate(dims);

  const int T = seq.T();
  double lp = 0.0;

  // Regime chain log-mass and AR source log-density, per component.
  for (int j = 0; j < dims.d; ++j) {
    const MatrixXd& A = model.prior.A[j];
    {
      const int k = path.u(0, j);
      lp += std::log(model.prior.pi(j, k));
      const double var = model.dynamics.psi_bar(j, k);
      const double diff = path.s(0, j) - model.dynamics.b_bar(j, k);
      lp += -0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
    }
    for (int t = 1; t < T; ++t) {
      const int k = path.u(t, j);
      lp += std::log(A(k, path.u(t - 1, j)));
      const double var = model.dynamics.psi(j, k);
      const double diff = path.s(t, j) - model.dynamics.B(j, k) * path.s(t - 1, j) -
                          model.dynamics.b(j, k);
      lp += -0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
    }
  }

  // Poisson emission log-mass, log x! included.
  const MatrixXd log_rates =
      ((path.s * model.emission.Gamma.transpose()).colwise() + seq.offsets).rowwise() +
      model.emission.eta.transpose();
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < dims.K; ++k) {
      const double x = seq.counts(t, k);
      lp += x * log_rates(t, k) - std::exp(log_rates(t, k)) - std::lgamma(x + 1.0);
    }
  return lp;
}

}  // namespace countica
