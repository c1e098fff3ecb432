#include "countica/identifiability.hpp"

#include "countica/sampling.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace countica {

namespace {

void finalize_entry(WhitenedLagEntry& e, double threshold) {
  const int d = static_cast<int>(e.whitened_diag.size());
  double min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      min_gap = std::min(min_gap, std::abs(e.whitened_diag[i] - e.whitened_diag[j]));
  if (d == 1) min_gap = std::numeric_limits<double>::infinity();
  e.min_pairwise_gap = min_gap;
  e.min_abs_diag = e.whitened_diag.cwiseAbs().minCoeff();
  e.pass = min_gap >= threshold && e.min_abs_diag >= threshold;
}

}  // namespace

IdentifiabilityReport check_identifiability_conditions(const ModelParams& model,
                                                       int max_t0, int mc_samples,
                                                       Rng& rng, double gap_threshold) {
  model.validate();
  if (max_t0 < 1)
    throw std::invalid_argument("check_identifiability_conditions: max_t0 >= 1");
  const int d = model.dims.d;
  const int C = model.dims.C;

  IdentifiabilityReport report;
  report.analytic = (C == 1);

  // Per-component variance of s_1 and covariances Cov(s_t0, s_{t0-l0}); both
  // diagonal across components by independence, so only diagonals are kept.
  VectorXd var1(d);
  // cov[t0][l0] holds the needed diagonal, 1-based t0.
  std::vector<std::vector<VectorXd>> cov(max_t0 + 1);

  if (C == 1) {
    const auto B = model.dynamics.B.col(0).array();
    const auto psi = model.dynamics.psi.col(0).array();
    // Marginal variances Phi_t: Phi_1 = psi_bar, Phi_{t+1} = B^2 Phi_t + psi.
    MatrixXd phi(max_t0, d);
    phi.row(0) = model.dynamics.psi_bar.col(0).transpose();
    for (int t = 1; t < max_t0; ++t)
      phi.row(t) = (B.square().transpose() * phi.row(t - 1).array() +
                    psi.transpose())
                       .matrix();
    var1 = phi.row(0).transpose();
    for (int t0 = 1; t0 <= max_t0; ++t0) {
      cov[t0].resize(t0);
      for (int l0 = 0; l0 < t0; ++l0)
        cov[t0][l0] = (B.pow(static_cast<double>(l0)).transpose() *
                       phi.row(t0 - l0 - 1).array())
                          .matrix()
                          .transpose();
    }
  } else {
    if (mc_samples < 2)
      throw std::invalid_argument(
          "check_identifiability_conditions: mc_samples >= 2 required for C > 1");
    // Empirical moments over simulated source paths.
    MatrixXd sum = MatrixXd::Zero(max_t0, d);
    std::vector<MatrixXd> cross(max_t0 + 1);  // sums of s_{t0} s_{t0-l0}
    for (int t0 = 1; t0 <= max_t0; ++t0) cross[t0] = MatrixXd::Zero(t0, d);
    MatrixXd paths(max_t0, d);
    for (int r = 0; r < mc_samples; ++r) {
      for (int i = 0; i < d; ++i) {
        const VectorXi labels = sample_regime_chain(model.prior, i, max_t0, rng);
        paths.col(i) = sample_source_path(model.dynamics, i, labels, rng);
      }
      sum += paths;
      for (int t0 = 1; t0 <= max_t0; ++t0)
        for (int l0 = 0; l0 < t0; ++l0)
          cross[t0].row(l0) += paths.row(t0 - 1).cwiseProduct(paths.row(t0 - l0 - 1));
    }
    const MatrixXd mean = sum / mc_samples;
    for (int t0 = 1; t0 <= max_t0; ++t0) {
      cov[t0].resize(t0);
      for (int l0 = 0; l0 < t0; ++l0)
        cov[t0][l0] = (cross[t0].row(l0) / mc_samples -
                       mean.row(t0 - 1).cwiseProduct(mean.row(t0 - l0 - 1)))
                          .transpose();
    }
    var1 = cov[1][0];
  }

  if (!(var1.minCoeff() > 0.0))
    throw std::runtime_error(
        "check_identifiability_conditions: singular initial covariance");
  const VectorXd inv_sd1 = var1.cwiseSqrt().cwiseInverse();

  double best_gap = -1.0;
  for (int t0 = 1; t0 <= max_t0; ++t0)
    for (int l0 = 0; l0 < t0; ++l0) {
      WhitenedLagEntry e;
      e.t0 = t0;
      e.l0 = l0;
      e.whitened_diag =
          inv_sd1.cwiseProduct(cov[t0][l0]).cwiseProduct(inv_sd1);
      finalize_entry(e, gap_threshold);
      if (e.pass) report.overall_pass = true;
      if (e.min_pairwise_gap > best_gap && std::isfinite(e.min_pairwise_gap)) {
        best_gap = e.min_pairwise_gap;
        report.best_index = static_cast<int>(report.entries.size());
      }
      report.entries.push_back(std::move(e));
    }
  return report;
}

}  // namespace countica
