#pragma once

#include "countica/proxy.hpp"
#include "countica/types.hpp"

#include <utility>
#include <vector>

namespace countica {

/// Sufficient statistics for the closed-form prior/dynamics updates,
/// accumulated over sequences (optionally with an inverse-sampling-fraction
/// weight when mini-batching).
struct MStepStats {
  int d = 0;
  int C = 0;
  double n_weight = 0.0;  // weighted number of sequences

  MatrixXd sum_nu;              // d x C
  std::vector<MatrixXd> a_num;  // d kernels, C x C
  MatrixXd a_den;               // d x C over source regime l

  // Initial-time block, weights alpha_1(i, k).
  MatrixXd w1;      // sum of weights
  MatrixXd w1_m;    // sum w * m
  MatrixXd w1_m2s;  // sum w * (sigma_1 + m^2)

  // AR block over t = 1..T-1, weights alpha_{t+1}(i, k).
  MatrixXd W;         // sum w
  MatrixXd S_mu;      // sum w mu_t
  MatrixXd S_mu1;     // sum w mu_{t+1}
  MatrixXd S_mumu;    // sum w mu_t mu_{t+1}
  MatrixXd S_mu2s;    // sum w (mu_t^2 + sigma_t)
  MatrixXd S_mu1sq;   // sum w (mu_{t+1}^2 + sigma_{t+1})
  MatrixXd S_bsig;    // sum w B~_{t+1} sigma_t

  static MStepStats zero(int d, int C);
};

void accumulate_mstep_stats(MStepStats& stats, const SourceProxy& src,
                            const SourceMoments& mom, const SwitchProxy& sw,
                            const SwitchMarginals& marg, double weight = 1.0);

/// Closed-form maximizers of the ELBO in the regime prior and source
/// dynamics, holding the proxies fixed. B and b are mutually dependent and
/// solved jointly per (component, regime). Regimes with zero posterior mass
/// keep their current values and are reported in `stale`.
struct MStepResult {
  RegimePrior prior;
  SourceDynamics dynamics;
  std::vector<std::pair<int, int>> stale;  // (component, regime) left unchanged
};

MStepResult mstep_closed_form(const MStepStats& stats, const RegimePrior& current_prior,
                              const SourceDynamics& current_dynamics);

/// Every column divided by its Euclidean norm; errors on a zero column.
MatrixXd project_gamma_columns(const MatrixXd& Gamma);

}  // namespace countica
