#pragma once

#include "countica/fit.hpp"
#include "countica/proxy.hpp"
#include "countica/types.hpp"

#include <vector>

namespace countica {

/// Dataset-level mixture of per-sequence regime chains: time-dependent
/// marginals and transition kernels obtained by uniformly averaging the
/// variational posteriors.
struct EmpiricalSwitch {
  std::vector<MatrixXd> alpha_bar;          // T entries, d x C
  std::vector<MatrixXd> tau_bar;            // (T-1) * d kernels, C x C
  int T = 0;
  int d = 0;
  int C = 0;
  std::vector<std::pair<int, int>> flagged;  // zero-mass (t, component) pairs

  MatrixXd& kernel(int t_step, int i) { return tau_bar[t_step * d + i]; }
  const MatrixXd& kernel(int t_step, int i) const { return tau_bar[t_step * d + i]; }
};

/// alpha_bar_t = mean of per-sequence alpha_t; tau_bar_{t+1,kl} =
/// mean(tau_{t+1,kl} alpha_{t,l}) / alpha_bar_{t,l}. Zero-mass columns fall
/// back to uniform and are flagged.
EmpiricalSwitch empirical_switch(const std::vector<SwitchProxy>& proxies,
                                 const std::vector<SwitchMarginals>& marginals);

/// Filtering state at the forecast origin.
struct FilterSnapshot {
  int t0 = 0;         // 1-based prefix length
  VectorXd mu;        // d, source means at t0
  VectorXd sigma;     // d, source variances at t0
  MatrixXd alpha;     // d x C, regime marginals at t0
};

struct Forecast {
  // Snapshot at the origin (horizon arrays are empty when H == 0).
  MatrixXd alpha0;  // d x C
  VectorXd mu0;     // d
  VectorXd sigma0;  // d

  std::vector<MatrixXd> alpha_hat;  // H entries, d x C
  MatrixXd mu_hat;                  // H x d
  MatrixXd psi_hat;                 // H x d, clamped at 0
  MatrixXd count_mean;              // H x K, filled by forecast_counts
  MatrixXi map_path;                // (t0 + H) x d Viterbi labels
  bool variance_clamped = false;    // some psi_hat fell below -1e-10 before clamping

  int horizon() const { return static_cast<int>(mu_hat.rows()); }
};

/// Moment-matched regime-mixture forecast: alpha propagated through the
/// empirical kernels (the last kernel is held constant beyond the training
/// grid) and mu/psi through the regime-averaged AR recursions. With
/// hard_regimes the soft marginals are replaced by the one-hot Viterbi path.
/// prefix_switches supplies the observed-window kernels of the hybrid
/// Viterbi chain; pass the snapshot's inference result.
Forecast forecast_moments(const ModelParams& model, const FilterSnapshot& at_t0,
                          const SwitchProxy& prefix_switches,
                          const EmpiricalSwitch& empirical, int horizon,
                          bool hard_regimes);

/// Exact per-component maximum-probability path of the time-inhomogeneous
/// chain (log-space Viterbi). kernels[t] gives the d stacked C x C kernels
/// for the transition t -> t+1.
MatrixXi viterbi_map(const MatrixXd& alpha_1,
                     const std::vector<std::vector<MatrixXd>>& kernels);

/// Expected counts exp(Gamma mu + 0.5 diag(Gamma diag(psi) Gamma^T) + o + eta).
MatrixXd forecast_counts(const Forecast& forecast, const Emission& emission,
                         const VectorXd& offsets,
                         double log_rate_cap = 30.0);

/// Prefix (filtering) inference: optimizes the variational parameters on the
/// first t0 observations with the model frozen.
struct FilteringFit {
  ProxyFitResult fit;
  FilterSnapshot snapshot;
};

FilteringFit fit_filtering_proxy(const ModelParams& model, const Sequence& seq, int t0,
                                 const FitConfig& config);

/// Regime labels are arbitrary per fitted model; to compare regime marginals
/// across folds, per component pick the label permutation of `other` whose
/// marginal trajectories correlate best with `reference`. Returns one
/// permutation per component: perm[i][k] is the `other` label matching
/// reference label k.
std::vector<std::vector<int>> align_regimes(const SwitchMarginals& reference,
                                            const SwitchMarginals& other);

}  // namespace countica
