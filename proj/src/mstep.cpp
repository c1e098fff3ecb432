#include "countica/mstep.hpp"

#include <cmath>
#include <stdexcept>

namespace countica {

MStepStats MStepStats::zero(int d, int C) {
  MStepStats s;
  s.d = d;
  s.C = C;
  s.sum_nu = MatrixXd::Zero(d, C);
  s.a_num.assign(d, MatrixXd::Zero(C, C));
  s.a_den = MatrixXd::Zero(d, C);
  s.w1 = MatrixXd::Zero(d, C);
  s.w1_m = MatrixXd::Zero(d, C);
  s.w1_m2s = MatrixXd::Zero(d, C);
  s.W = MatrixXd::Zero(d, C);
  s.S_mu = MatrixXd::Zero(d, C);
  s.S_mu1 = MatrixXd::Zero(d, C);
  s.S_mumu = MatrixXd::Zero(d, C);
  s.S_mu2s = MatrixXd::Zero(d, C);
  s.S_mu1sq = MatrixXd::Zero(d, C);
  s.S_bsig = MatrixXd::Zero(d, C);
  return s;
}

void accumulate_mstep_stats(MStepStats& stats, const SourceProxy& src,
                            const SourceMoments& mom, const SwitchProxy& sw,
                            const SwitchMarginals& marg, double weight) {
  const int T = src.T();
  const int d = stats.d;
  const int C = stats.C;
  if (src.d() != d || sw.d != d || sw.C != C)
    throw std::invalid_argument("mstep stats: dimension mismatch");

  stats.n_weight += weight;
  stats.sum_nu += weight * sw.nu;

  for (int i = 0; i < d; ++i) {
    for (int t = 0; t < T - 1; ++t) {
      const MatrixXd& tau = sw.kernel(t, i);
      for (int l = 0; l < C; ++l) {
        const double al = marg.alpha[t](i, l);
        stats.a_den(i, l) += weight * al;
        stats.a_num[i].col(l) += weight * al * tau.col(l);
      }
    }
    for (int k = 0; k < C; ++k) {
      const double a1 = marg.alpha[0](i, k);
      stats.w1(i, k) += weight * a1;
      stats.w1_m(i, k) += weight * a1 * mom.mu(0, i);
      stats.w1_m2s(i, k) +=
          weight * a1 * (mom.sigma(0, i) + mom.mu(0, i) * mom.mu(0, i));
      for (int t = 1; t < T; ++t) {
        const double w = weight * marg.alpha[t](i, k);
        const double mu_prev = mom.mu(t - 1, i);
        const double mu_cur = mom.mu(t, i);
        stats.W(i, k) += w;
        stats.S_mu(i, k) += w * mu_prev;
        stats.S_mu1(i, k) += w * mu_cur;
        stats.S_mumu(i, k) += w * mu_prev * mu_cur;
        stats.S_mu2s(i, k) += w * (mu_prev * mu_prev + mom.sigma(t - 1, i));
        stats.S_mu1sq(i, k) += w * (mu_cur * mu_cur + mom.sigma(t, i));
        stats.S_bsig(i, k) += w * src.B_tilde(t - 1, i) * mom.sigma(t - 1, i);
      }
    }
  }
}

MStepResult mstep_closed_form(const MStepStats& stats, const RegimePrior& current_prior,
                              const SourceDynamics& current_dynamics) {
  const int d = stats.d;
  const int C = stats.C;
  if (stats.n_weight <= 0.0)
    throw std::invalid_argument("mstep_closed_form: no accumulated statistics");

  MStepResult out;
  out.prior = current_prior;
  out.dynamics = current_dynamics;

  out.prior.pi = stats.sum_nu / stats.n_weight;

  for (int i = 0; i < d; ++i)
    for (int l = 0; l < C; ++l) {
      if (stats.a_den(i, l) > 0.0) {
        out.prior.A[i].col(l) = stats.a_num[i].col(l) / stats.a_den(i, l);
      } else {
        out.stale.emplace_back(i, l);
      }
    }

  for (int i = 0; i < d; ++i)
    for (int k = 0; k < C; ++k) {
      if (stats.w1(i, k) > 0.0) {
        const double bbar = stats.w1_m(i, k) / stats.w1(i, k);
        out.dynamics.b_bar(i, k) = bbar;
        // E[(m - bbar)^2 + sigma_1] with the freshly updated bbar.
        out.dynamics.psi_bar(i, k) =
            std::max((stats.w1_m2s(i, k) - 2.0 * bbar * stats.w1_m(i, k) +
                      bbar * bbar * stats.w1(i, k)) /
                         stats.w1(i, k),
                     1e-12);
      } else {
        out.stale.emplace_back(i, k);
      }

      const double W = stats.W(i, k);
      if (W > 0.0) {
        // Joint stationary point of the transition expectation in (B, b):
        // substituting b*(B) into B*'s equation yields a scalar linear solve.
        const double num = stats.S_bsig(i, k) + stats.S_mumu(i, k) -
                           stats.S_mu(i, k) * stats.S_mu1(i, k) / W;
        const double den = stats.S_mu2s(i, k) - stats.S_mu(i, k) * stats.S_mu(i, k) / W;
        if (!(den > 0.0))
          throw std::runtime_error("mstep_closed_form: degenerate AR normal equation");
        const double B = num / den;
        const double b = (stats.S_mu1(i, k) - B * stats.S_mu(i, k)) / W;
        const double psi =
            (stats.S_mu1sq(i, k) + B * B * stats.S_mu2s(i, k) + b * b * W -
             2.0 * B * (stats.S_mumu(i, k) + stats.S_bsig(i, k)) -
             2.0 * b * stats.S_mu1(i, k) + 2.0 * B * b * stats.S_mu(i, k)) /
            W;
        out.dynamics.B(i, k) = B;
        out.dynamics.b(i, k) = b;
        out.dynamics.psi(i, k) = std::max(psi, 1e-12);
      } else {
        out.stale.emplace_back(i, k);
      }
    }

  return out;
}

MatrixXd project_gamma_columns(const MatrixXd& Gamma) {
  MatrixXd out = Gamma;
  for (int j = 0; j < Gamma.cols(); ++j) {
    const double norm = Gamma.col(j).norm();
    if (!(norm > 0.0))
      throw std::invalid_argument("project_gamma_columns: zero-norm column " +
                                  std::to_string(j));
    out.col(j) /= norm;
  }
  return out;
}

}  // namespace countica
