#pragma once

#include "countica/rng.hpp"
#include "countica/types.hpp"

namespace countica {

/// Offsets injected into simulated trajectories: all-zero by default, or
/// replayed from a donor dataset (sequence i borrows donor sequence i mod n).
struct OffsetsPolicy {
  enum class Kind { Zero, LogsumReplay };
  Kind kind = Kind::Zero;
  const Dataset* donor = nullptr;  // required for LogsumReplay

  static OffsetsPolicy zero() { return {}; }
  static OffsetsPolicy logsum_replay(const Dataset& d) {
    return {Kind::LogsumReplay, &d};
  }
};

/// Hard cap on the Poisson log-rate; emission fails loudly above it instead
/// of silently saturating.
constexpr double kDefaultLogRateCap = 30.0;

/// Regime label path for one component: first label from pi, then columns of
/// the transition matrix indexed by the previous label.
VectorXi sample_regime_chain(const RegimePrior& prior, int component, int T, Rng& rng);

/// AR(1) source path driven by the given labels.
VectorXd sample_source_path(const SourceDynamics& dynamics, int component,
                            const VectorXi& labels, Rng& rng);

/// Poisson counts with rate exp(Gamma s_t + o_t + eta) per entry.
MatrixXi emit_counts(const Emission& emission, const VectorXd& offsets,
                     const MatrixXd& s, Rng& rng,
                     double log_rate_cap = kDefaultLogRateCap);

struct SimulationResult {
  Dataset dataset;
  std::vector<LatentPath> latents;
};

/// n independent trajectories with ground-truth latents retained; sequence i
/// draws from Rng::stream(seed, i) so results do not depend on loop order.
SimulationResult sample_dataset(const ModelParams& model, int n,
                                const OffsetsPolicy& offsets_policy,
                                std::uint64_t seed,
                                double log_rate_cap = kDefaultLogRateCap);

/// Exact joint log-density log p(x, s, u): regime-chain log-mass + Gaussian
/// AR log-density + Poisson emission log-mass (including log x! terms).
double log_joint(const ModelParams& model, const Sequence& seq, const LatentPath& path);

}  // namespace countica
