#pragma once

#include "countica/types.hpp"

namespace countica {

enum class ProxyMode { AR, MeanField };

/// Linear-Gaussian Markov chain over one sequence's sources, one chain per
/// component: s_1 ~ N(m, psi_tilde_1), s_{t+1} ~ N(B_tilde_{t+1} s_t +
/// b_tilde_{t+1}, psi_tilde_{t+1}). MeanField pins B_tilde to zero.
struct SourceProxy {
  VectorXd m;          // d
  MatrixXd B_tilde;    // (T-1) x d, row r holds coefficients for t = r + 2
  MatrixXd b_tilde;    // (T-1) x d
  MatrixXd psi_tilde;  // T x d, > 0
  ProxyMode mode = ProxyMode::AR;

  int T() const { return static_cast<int>(psi_tilde.rows()); }
  int d() const { return static_cast<int>(psi_tilde.cols()); }
  void validate() const;
};

/// Markov representation of the regime proxy: nu(i, k) = q(u_1 = k),
/// tau(t, i)(k, l) = q(u_{t+1} = k | u_t = l); columns of each kernel sum to 1.
struct SwitchProxy {
  MatrixXd nu;                    // d x C
  std::vector<MatrixXd> tau;      // (T-1) * d kernels, each C x C
  int T = 0;
  int d = 0;
  int C = 0;

  MatrixXd& kernel(int t_step, int i) { return tau[t_step * d + i]; }
  const MatrixXd& kernel(int t_step, int i) const { return tau[t_step * d + i]; }

  /// Everything-uniform proxy of the right shape.
  static SwitchProxy uniform(int T, int d, int C);
  void validate(double tol = 1e-12) const;
};

/// Forward marginal moments of the source proxy.
struct SourceMoments {
  MatrixXd mu;     // T x d
  MatrixXd sigma;  // T x d marginal variances
  MatrixXd lag1;   // (T-1) x d, lag1(t, i) = Cov(s_t, s_{t+1}) = B_tilde_{t+1} sigma_t
};

/// Time-indexed regime marginals alpha[t](i, k) = q(u_{t+1 (1-based)} = k).
struct SwitchMarginals {
  std::vector<MatrixXd> alpha;  // T entries, each d x C

  int T() const { return static_cast<int>(alpha.size()); }
};

/// Exact forward recursions: mu_1 = m, mu_t = B~_t mu_{t-1} + b~_t;
/// sigma_1 = psi~_1, sigma_t = psi~_t + B~_t^2 sigma_{t-1}.
SourceMoments forward_moments(const SourceProxy& proxy);

/// alpha_1 = nu; alpha_t = tau_t alpha_{t-1} per component.
SwitchMarginals switch_marginals(const SwitchProxy& proxy);

/// Per-(t, i, k) evidence of the source proxy under regime k's dynamics.
/// log_e holds the unshifted log values; e holds exp(log_e - max over k),
/// so each (t, i) slice has maximum one.
struct EvidenceTerms {
  std::vector<MatrixXd> log_e;  // T entries, each d x C
  std::vector<MatrixXd> e;      // T entries, each d x C, per-(t, i) max-shifted
};

EvidenceTerms evidence_terms(const ModelParams& model, const SourceMoments& moments);

/// Optimal coordinate-ascent update of the regime proxy: the normalized
/// Markov representation of the chain proportional to
/// pi_{u_1} e_1(u_1) prod_t a_{u_{t+1}, u_t} e_{t+1}(u_{t+1}),
/// obtained from backward messages with per-step renormalization.
SwitchProxy cavi_switch_update(const ModelParams& model, const SourceMoments& moments);

}  // namespace countica
