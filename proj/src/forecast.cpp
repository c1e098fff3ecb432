#include "countica/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace countica {

EmpiricalSwitch empirical_switch(const std::vector<SwitchProxy>& proxies,
                                 const std::vector<SwitchMarginals>& marginals) {
  if (proxies.empty() || proxies.size() != marginals.size())
    throw std::invalid_argument("empirical_switch: need matching proxies/marginals");
  const int n = static_cast<int>(proxies.size());
  const int T = proxies[0].T;
  const int d = proxies[0].d;
  const int C = proxies[0].C;
  for (const SwitchProxy& p : proxies)
    if (p.T != T || p.d != d || p.C != C)
      throw std::invalid_argument("empirical_switch: proxies must share T, d, C");

  EmpiricalSwitch out;
  out.T = T;
  out.d = d;
  out.C = C;
  out.alpha_bar.assign(T, MatrixXd::Zero(d, C));
  out.tau_bar.assign(static_cast<std::size_t>(T - 1) * d, MatrixXd::Zero(C, C));

  for (int s = 0; s < n; ++s)
    for (int t = 0; t < T; ++t) out.alpha_bar[t] += marginals[s].alpha[t] / n;

  for (int t = 0; t < T - 1; ++t)
    for (int i = 0; i < d; ++i) {
      MatrixXd num = MatrixXd::Zero(C, C);
      for (int s = 0; s < n; ++s)
        for (int l = 0; l < C; ++l)
          num.col(l) += proxies[s].kernel(t, i).col(l) * marginals[s].alpha[t](i, l) /
                        static_cast<double>(n);
      MatrixXd& kern = out.kernel(t, i);
      for (int l = 0; l < C; ++l) {
        const double mass = out.alpha_bar[t](i, l);
        if (mass > 0.0) {
          kern.col(l) = num.col(l) / mass;
        } else {
          kern.col(l).setConstant(1.0 / C);
          out.flagged.emplace_back(t + 1, i);
        }
      }
    }
  return out;
}

MatrixXi viterbi_map(const MatrixXd& alpha_1,
                     const std::vector<std::vector<MatrixXd>>& kernels) {
  const int d = static_cast<int>(alpha_1.rows());
  const int C = static_cast<int>(alpha_1.cols());
  const int T = static_cast<int>(kernels.size()) + 1;
  MatrixXi path(T, d);

  const double neg_inf = -std::numeric_limits<double>::infinity();
  auto log0 = [neg_inf](double p) { return p > 0.0 ? std::log(p) : neg_inf; };

  for (int i = 0; i < d; ++i) {
    MatrixXd score(T, C);
    MatrixXi argmax(T, C);
    for (int k = 0; k < C; ++k) score(0, k) = log0(alpha_1(i, k));
    for (int t = 1; t < T; ++t) {
      const MatrixXd& kern = kernels[t - 1][i];
      for (int k = 0; k < C; ++k) {
        double best = neg_inf;
        int best_l = 0;
        for (int l = 0; l < C; ++l) {
          const double cand = score(t - 1, l) + log0(kern(k, l));
          if (cand > best) {
            best = cand;
            best_l = l;
          }
        }
        score(t, k) = best;
        argmax(t, k) = best_l;
      }
    }
    int k_best = 0;
    score.row(T - 1).maxCoeff(&k_best);
    path(T - 1, i) = k_best;
    for (int t = T - 1; t >= 1; --t) {
      k_best = argmax(t, k_best);
      path(t - 1, i) = k_best;
    }
  }
  return path;
}

Forecast forecast_moments(const ModelParams& model, const FilterSnapshot& at_t0,
                          const SwitchProxy& prefix_switches,
                          const EmpiricalSwitch& empirical, int horizon,
                          bool hard_regimes) {
  const int d = model.dims.d;
  const int C = model.dims.C;
  if (at_t0.mu.size() != d || at_t0.sigma.size() != d || at_t0.alpha.rows() != d ||
      at_t0.alpha.cols() != C)
    throw std::invalid_argument("forecast_moments: snapshot shape mismatch");
  if (empirical.d != d || empirical.C != C)
    throw std::invalid_argument("forecast_moments: empirical switch shape mismatch");
  if (horizon < 0) throw std::invalid_argument("forecast_moments: horizon >= 0");
  const int t0 = at_t0.t0;
  if (t0 < 1 || t0 > prefix_switches.T)
    throw std::invalid_argument("forecast_moments: invalid t0");
  if (horizon > 0 && empirical.T < 2)
    throw std::invalid_argument(
        "forecast_moments: empirical switch has no transition kernels");

  Forecast out;
  out.alpha0 = at_t0.alpha;
  out.mu0 = at_t0.mu;
  out.sigma0 = at_t0.sigma;
  out.alpha_hat.assign(horizon, MatrixXd(d, C));
  out.mu_hat.resize(horizon, d);
  out.psi_hat.resize(horizon, d);

  // Empirical kernel for the transition into absolute time t (2-based);
  // beyond the training grid the last kernel is held constant.
  auto kernel_at = [&](int t_abs, int i) -> const MatrixXd& {
    const int step = std::min(t_abs - 2, empirical.T - 2);
    return empirical.kernel(std::max(step, 0), i);
  };

  // Hybrid chain for the Viterbi decode: observed-window kernels up to t0,
  // empirical kernels afterwards.
  std::vector<std::vector<MatrixXd>> hybrid;
  for (int t = 2; t <= t0 + horizon; ++t) {
    std::vector<MatrixXd> slice;
    slice.reserve(d);
    for (int i = 0; i < d; ++i)
      slice.push_back(t <= t0 ? prefix_switches.kernel(t - 2, i) : kernel_at(t, i));
    hybrid.push_back(std::move(slice));
  }
  out.map_path = viterbi_map(prefix_switches.nu, hybrid);

  // Regime marginals over the horizon.
  MatrixXd alpha_prev = at_t0.alpha;
  for (int h = 0; h < horizon; ++h) {
    const int t_abs = t0 + h + 1;
    MatrixXd& a = out.alpha_hat[h];
    if (hard_regimes) {
      a.setZero();
      for (int i = 0; i < d; ++i) a(i, out.map_path(t0 + h, i)) = 1.0;
    } else {
      for (int i = 0; i < d; ++i)
        a.row(i) = (kernel_at(t_abs, i) * alpha_prev.row(i).transpose()).transpose();
    }
    alpha_prev = a;
  }

  // Moment-matched mean/variance recursions under the regime mixture.
  VectorXd mu_prev = at_t0.mu;
  VectorXd var_prev = at_t0.sigma;
  for (int h = 0; h < horizon; ++h) {
    for (int i = 0; i < d; ++i) {
      double mean = 0.0;
      double second = 0.0;
      for (int k = 0; k < C; ++k) {
        const double a = out.alpha_hat[h](i, k);
        const double Bk = model.dynamics.B(i, k);
        const double step_mean = Bk * mu_prev[i] + model.dynamics.b(i, k);
        mean += a * step_mean;
        second += a * (model.dynamics.psi(i, k) + Bk * Bk * var_prev[i] +
                       step_mean * step_mean);
      }
      out.mu_hat(h, i) = mean;
      double var = second - mean * mean;
      if (var < 0.0) {
        if (var < -1e-10) out.variance_clamped = true;
        var = 0.0;
      }
      out.psi_hat(h, i) = var;
    }
    mu_prev = out.mu_hat.row(h).transpose();
    var_prev = out.psi_hat.row(h).transpose();
  }
  return out;
}

MatrixXd forecast_counts(const Forecast& forecast, const Emission& emission,
                         const VectorXd& offsets, double log_rate_cap) {
  const int H = forecast.horizon();
  if (offsets.size() != H)
    throw std::invalid_argument("forecast_counts: offsets length != horizon");
  const MatrixXd& Gamma = emission.Gamma;
  const MatrixXd log_mean =
      ((forecast.mu_hat * Gamma.transpose() +
        0.5 * forecast.psi_hat * Gamma.cwiseProduct(Gamma).transpose())
           .colwise() +
       offsets)
          .rowwise() +
      emission.eta.transpose();
  if (!log_mean.allFinite() || (H > 0 && log_mean.maxCoeff() > log_rate_cap))
    throw std::runtime_error("forecast_counts: log-rate exceeds cap");
  return log_mean.array().exp();
}

namespace {

double trajectory_correlation(const std::vector<MatrixXd>& a,
                              const std::vector<MatrixXd>& b, int i, int ka, int kb) {
  const int T = static_cast<int>(a.size());
  VectorXd va(T), vb(T);
  for (int t = 0; t < T; ++t) {
    va[t] = a[t](i, ka);
    vb[t] = b[t](i, kb);
  }
  va.array() -= va.mean();
  vb.array() -= vb.mean();
  const double na = va.norm(), nb = vb.norm();
  if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
  return va.dot(vb) / (na * nb);
}

}  // namespace

std::vector<std::vector<int>> align_regimes(const SwitchMarginals& reference,
                                            const SwitchMarginals& other) {
  if (reference.T() != other.T() || reference.T() == 0)
    throw std::invalid_argument("align_regimes: marginals must share T");
  const int d = static_cast<int>(reference.alpha[0].rows());
  const int C = static_cast<int>(reference.alpha[0].cols());
  if (other.alpha[0].rows() != d || other.alpha[0].cols() != C)
    throw std::invalid_argument("align_regimes: marginals must share d and C");

  std::vector<std::vector<int>> perms(d);
  for (int i = 0; i < d; ++i) {
    std::vector<int> ident(C);
    for (int k = 0; k < C; ++k) ident[k] = k;
    std::vector<int> best = ident;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<int> perm = ident;
    do {
      double score = 0.0;
      for (int k = 0; k < C; ++k)
        score += trajectory_correlation(reference.alpha, other.alpha, i, k, perm[k]);
      if (score > best_score) {
        best_score = score;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    perms[i] = best;
  }
  return perms;
}

FilteringFit fit_filtering_proxy(const ModelParams& model, const Sequence& seq, int t0,
                                 const FitConfig& config) {
  if (t0 < 1 || t0 > seq.T())
    throw std::invalid_argument("fit_filtering_proxy: t0 must be in [1, T]");
  Sequence prefix;
  prefix.counts = seq.counts.topRows(t0);
  prefix.offsets = seq.offsets.head(t0);
  prefix.id = seq.id;

  FilteringFit out;
  out.fit = fit_proxy_only(model, prefix, config);
  out.snapshot.t0 = t0;
  out.snapshot.mu = out.fit.moments.mu.row(t0 - 1).transpose();
  out.snapshot.sigma = out.fit.moments.sigma.row(t0 - 1).transpose();
  out.snapshot.alpha = switch_marginals(out.fit.switches).alpha[t0 - 1];
  return out;
}

}  // namespace countica
