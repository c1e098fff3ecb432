#include "countica/forecast.hpp"

#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <iostream>

using namespace countica;
using namespace testutil;

TEST_SUITE_BEGIN("forecast");

namespace {

EmpiricalSwitch empirical_from(const std::vector<SwitchProxy>& proxies) {
  std::vector<SwitchMarginals> marg;
  for (const SwitchProxy& p : proxies) marg.push_back(switch_marginals(p));
  return empirical_switch(proxies, marg);
}

FilterSnapshot snapshot(int t0, const VectorXd& mu, const VectorXd& sigma,
                        const MatrixXd& alpha) {
  FilterSnapshot s;
  s.t0 = t0;
  s.mu = mu;
  s.sigma = sigma;
  s.alpha = alpha;
  return s;
}

}  // namespace

TEST_CASE("empirical_switch: one sequence reproduces its own chain") {
  Rng rng(2);
  const SwitchProxy p = random_switch_proxy(rng, 5, 2, 2);
  const EmpiricalSwitch emp = empirical_from({p});
  const SwitchMarginals marg = switch_marginals(p);
  for (int t = 0; t < 5; ++t) CHECK(emp.alpha_bar[t].isApprox(marg.alpha[t], 1e-12));
  for (int t = 0; t < 4; ++t)
    for (int i = 0; i < 2; ++i)
      CHECK(emp.kernel(t, i).isApprox(p.kernel(t, i), 1e-12));
  CHECK(emp.flagged.empty());
}

TEST_CASE("empirical_switch: identical sequences collapse to the shared chain") {
  Rng rng(3);
  const SwitchProxy p = random_switch_proxy(rng, 4, 1, 3);
  const EmpiricalSwitch emp = empirical_from({p, p, p});
  for (int t = 0; t < 3; ++t) CHECK(emp.kernel(t, 0).isApprox(p.kernel(t, 0), 1e-12));
}

TEST_CASE("empirical_switch: mixture-marginal identity over distinct chains") {
  Rng rng(5);
  const SwitchProxy a = random_switch_proxy(rng, 6, 2, 2);
  const SwitchProxy b = random_switch_proxy(rng, 6, 2, 2);
  const EmpiricalSwitch emp = empirical_from({a, b});

  // Propagating (alpha_bar_1, tau_bar) must reproduce the mean marginals.
  SwitchProxy mix = SwitchProxy::uniform(6, 2, 2);
  mix.nu = emp.alpha_bar[0];
  for (int t = 0; t < 5; ++t)
    for (int i = 0; i < 2; ++i) mix.kernel(t, i) = emp.kernel(t, i);
  const SwitchMarginals prop = switch_marginals(mix);
  const SwitchMarginals ma = switch_marginals(a);
  const SwitchMarginals mb = switch_marginals(b);
  for (int t = 0; t < 6; ++t)
    CHECK(prop.alpha[t].isApprox(0.5 * (ma.alpha[t] + mb.alpha[t]), 1e-12));
}

TEST_CASE("empirical_switch: zero-mass columns fall back to uniform and flag") {
  SwitchProxy det = SwitchProxy::uniform(3, 1, 2);
  det.nu << 1.0, 0.0;
  for (int t = 0; t < 2; ++t) {
    det.kernel(t, 0).setZero();
    det.kernel(t, 0).row(0).setOnes();  // regime 1 never visited
  }
  const EmpiricalSwitch emp = empirical_from({det});
  CHECK(!emp.flagged.empty());
  CHECK(emp.kernel(0, 0)(0, 1) == doctest::Approx(0.5));
  CHECK(emp.kernel(0, 0)(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("viterbi_map: deterministic kernels force the path; C=1 is zeros") {
  MatrixXd alpha1(1, 2);
  alpha1 << 0.0, 1.0;
  std::vector<std::vector<MatrixXd>> kernels;
  MatrixXd swap(2, 2);
  swap << 0.0, 1.0, 1.0, 0.0;  // always switch regime
  kernels.push_back({swap});
  kernels.push_back({swap});
  const MatrixXi path = viterbi_map(alpha1, kernels);
  CHECK(path(0, 0) == 1);
  CHECK(path(1, 0) == 0);
  CHECK(path(2, 0) == 1);

  const MatrixXi trivial =
      viterbi_map(MatrixXd::Ones(3, 1), {{MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                                          MatrixXd::Ones(1, 1)}});
  CHECK((trivial.array() == 0).all());
}

TEST_CASE("viterbi_map: enumeration oracle, T=6 C=3") {
  Rng rng(7);
  const SwitchProxy p = random_switch_proxy(rng, 6, 1, 3);
  std::vector<std::vector<MatrixXd>> kernels;
  for (int t = 0; t < 5; ++t) kernels.push_back({p.kernel(t, 0)});
  const MatrixXi path = viterbi_map(p.nu, kernels);

  double best = -1.0;
  for_each_path(6, 3, [&](const std::vector<int>& u) {
    best = std::max(best, proxy_path_prob(p, 0, u));
  });
  std::vector<int> found(6);
  for (int t = 0; t < 6; ++t) found[t] = path(t, 0);
  CHECK(proxy_path_prob(p, 0, found) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("forecast_moments: C=1 collapses to linear-Gaussian prediction") {
  ModelParams m = default_init_model({2, 1, 1, 8});
  m.dynamics.B(0, 0) = 0.7;
  m.dynamics.b(0, 0) = 0.3;
  m.dynamics.psi(0, 0) = 0.4;
  Rng rng(11);
  const SwitchProxy prefix = SwitchProxy::uniform(4, 1, 1);
  const EmpiricalSwitch emp = empirical_from({SwitchProxy::uniform(8, 1, 1)});
  const Forecast fc = forecast_moments(
      m, snapshot(4, VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 0.5),
                  MatrixXd::Ones(1, 1)),
      prefix, emp, 3, false);
  double mu = 1.0, var = 0.5;
  for (int h = 0; h < 3; ++h) {
    mu = 0.7 * mu + 0.3;
    var = 0.4 + 0.49 * var;
    CHECK(fc.mu_hat(h, 0) == doctest::Approx(mu).epsilon(1e-12));
    CHECK(fc.psi_hat(h, 0) == doctest::Approx(var).epsilon(1e-12));
  }
}

TEST_CASE("forecast_moments: degenerate alpha reduces to single-regime formulas") {
  Rng rng(13);
  ModelParams m = random_model(rng, 2, 1, 2, 6);
  // Hand-built empirical kernels that force regime 1 regardless of history.
  EmpiricalSwitch emp;
  emp.T = 6;
  emp.d = 1;
  emp.C = 2;
  MatrixXd force1 = MatrixXd::Zero(2, 2);
  force1.row(1).setOnes();
  emp.alpha_bar.assign(6, (MatrixXd(1, 2) << 0.0, 1.0).finished());
  emp.tau_bar.assign(5, force1);
  const VectorXd mu0 = VectorXd::Constant(1, 0.4);
  const VectorXd sig0 = VectorXd::Constant(1, 0.2);
  MatrixXd alpha0(1, 2);
  alpha0 << 0.3, 0.7;
  const Forecast fc =
      forecast_moments(m, snapshot(3, mu0, sig0, alpha0),
                       SwitchProxy::uniform(3, 1, 2), emp, 1, false);
  const double B = m.dynamics.B(0, 1), b = m.dynamics.b(0, 1), psi = m.dynamics.psi(0, 1);
  CHECK(fc.alpha_hat[0](0, 1) == doctest::Approx(1.0));
  CHECK(fc.mu_hat(0, 0) == doctest::Approx(B * 0.4 + b).epsilon(1e-12));
  CHECK(fc.psi_hat(0, 0) == doctest::Approx(psi + B * B * 0.2).epsilon(1e-12));
}

TEST_CASE("forecast_moments: H=0 echoes the filtering snapshot") {
  Rng rng(17);
  const ModelParams m = random_model(rng, 2, 2, 2, 5);
  const SwitchProxy prefix = random_switch_proxy(rng, 4, 2, 2);
  const EmpiricalSwitch emp = empirical_from({random_switch_proxy(rng, 5, 2, 2)});
  const VectorXd mu0 = VectorXd::Constant(2, 0.3);
  const VectorXd sig0 = VectorXd::Constant(2, 0.6);
  MatrixXd alpha0(2, 2);
  alpha0 << 0.2, 0.8, 0.5, 0.5;
  const Forecast fc =
      forecast_moments(m, snapshot(4, mu0, sig0, alpha0), prefix, emp, 0, false);
  CHECK(fc.horizon() == 0);
  CHECK(fc.mu0.isApprox(mu0));
  CHECK(fc.sigma0.isApprox(sig0));
  CHECK(fc.alpha0.isApprox(alpha0));
  CHECK(fc.map_path.rows() == 4);
}

TEST_CASE("forecast_moments: alpha_hat stays stochastic at every horizon") {
  Rng rng(19);
  const ModelParams m = random_model(rng, 2, 2, 3, 6);
  const SwitchProxy prefix = random_switch_proxy(rng, 3, 2, 3);
  const EmpiricalSwitch emp = empirical_from(
      {random_switch_proxy(rng, 6, 2, 3), random_switch_proxy(rng, 6, 2, 3)});
  MatrixXd alpha0(2, 3);
  alpha0.row(0) = random_simplex(rng, 3).transpose();
  alpha0.row(1) = random_simplex(rng, 3).transpose();
  const Forecast fc = forecast_moments(
      m, snapshot(3, VectorXd::Zero(2), VectorXd::Ones(2), alpha0), prefix, emp, 9,
      false);
  for (int h = 0; h < 9; ++h)
    for (int i = 0; i < 2; ++i)
      CHECK(fc.alpha_hat[h].row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("forecast_moments: Monte Carlo rollout oracle, C=2, H=5") {
  Rng rng(23);
  for (int rep = 0; rep < 2; ++rep) {
    const ModelParams m = random_model(rng, 2, 2, 2, 8);
    const SwitchProxy prefix = random_switch_proxy(rng, 3, 2, 2);
    const EmpiricalSwitch emp = empirical_from(
        {random_switch_proxy(rng, 8, 2, 2), random_switch_proxy(rng, 8, 2, 2)});
    MatrixXd alpha0(2, 2);
    alpha0.row(0) = random_simplex(rng, 2).transpose();
    alpha0.row(1) = random_simplex(rng, 2).transpose();
    const VectorXd mu0 = VectorXd::Constant(2, 0.2);
    const VectorXd sig0 = VectorXd::Constant(2, 0.7);
    const int H = 5;
    const Forecast fc =
        forecast_moments(m, snapshot(3, mu0, sig0, alpha0), prefix, emp, H, false);

    // The recursions are the exact moments of the regime-mixture process:
    // at each step the regime is drawn from the propagated marginal.
    const int n = 100000;
    Rng mc(900 + rep);
    std::vector<std::vector<double>> draws(H, std::vector<double>(n));
    for (int r = 0; r < n; ++r) {
      double s = mc.normal(mu0[0], sig0[0]);
      for (int h = 0; h < H; ++h) {
        const int k = mc.categorical(fc.alpha_hat[h].row(0).transpose());
        s = mc.normal(m.dynamics.B(0, k) * s + m.dynamics.b(0, k),
                      m.dynamics.psi(0, k));
        draws[h][r] = s;
      }
    }
    for (int h = 0; h < H; ++h) {
      const MeanSE ms = mean_se(draws[h]);
      CHECK(std::abs(ms.mean - fc.mu_hat(h, 0)) < 3.5 * ms.se);
      const MeanSE vs = batch_estimate(
          draws[h], [](const std::vector<double>& b) { return sample_variance(b); });
      CHECK(std::abs(vs.mean - fc.psi_hat(h, 0)) < 3.5 * vs.se);
    }
  }
}

TEST_CASE("forecast_moments: Markov-chain rollout gap (diagnostic, non-gating)") {
  // Sampling regimes as a chain couples regime and state after one step; the
  // moment-matched recursion is not exact for that process. Measured here
  // and reported, not asserted.
  Rng rng(29);
  const ModelParams m = random_model(rng, 2, 1, 2, 8);
  const SwitchProxy prefix = random_switch_proxy(rng, 3, 1, 2);
  const EmpiricalSwitch emp = empirical_from(
      {random_switch_proxy(rng, 8, 1, 2), random_switch_proxy(rng, 8, 1, 2)});
  MatrixXd alpha0(1, 2);
  alpha0 << 0.4, 0.6;
  const VectorXd mu0 = VectorXd::Constant(1, 0.1);
  const VectorXd sig0 = VectorXd::Constant(1, 0.5);
  const int H = 5;
  const Forecast fc =
      forecast_moments(m, snapshot(3, mu0, sig0, alpha0), prefix, emp, H, false);

  const int n = 200000;
  Rng mc(31);
  std::vector<double> last(n);
  for (int r = 0; r < n; ++r) {
    double s = mc.normal(mu0[0], sig0[0]);
    int k = mc.categorical(alpha0.row(0).transpose());
    for (int h = 0; h < H; ++h) {
      const int step = std::min(3 + h + 1 - 2, emp.T - 2);
      k = mc.categorical(emp.kernel(std::max(step, 0), 0).col(k));
      s = mc.normal(m.dynamics.B(0, k) * s + m.dynamics.b(0, k), m.dynamics.psi(0, k));
    }
    last[r] = s;
  }
  const MeanSE ms = mean_se(last);
  MESSAGE("markov-rollout mean gap at H=5: ", std::abs(ms.mean - fc.mu_hat(H - 1, 0)),
          " (MC se ", ms.se, ")");
  CHECK(true);
}

TEST_CASE("forecast_moments: degenerate empirical kernels make soft == hard") {
  Rng rng(31);
  ModelParams m = random_model(rng, 2, 1, 2, 6);
  SwitchProxy det = SwitchProxy::uniform(6, 1, 2);
  det.nu << 1.0, 0.0;
  MatrixXd swap(2, 2);
  swap << 0.0, 1.0, 1.0, 0.0;
  for (int t = 0; t < 5; ++t) det.kernel(t, 0) = swap;
  const EmpiricalSwitch emp = empirical_from({det});

  SwitchProxy prefix = SwitchProxy::uniform(2, 1, 2);
  prefix.nu << 1.0, 0.0;
  prefix.kernel(0, 0) = swap;
  MatrixXd alpha0(1, 2);
  alpha0 << 0.0, 1.0;  // deterministic state at t0 = 2
  const VectorXd mu0 = VectorXd::Constant(1, 0.3);
  const VectorXd sig0 = VectorXd::Constant(1, 0.2);
  const Forecast soft =
      forecast_moments(m, snapshot(2, mu0, sig0, alpha0), prefix, emp, 3, false);
  const Forecast hard =
      forecast_moments(m, snapshot(2, mu0, sig0, alpha0), prefix, emp, 3, true);
  CHECK(soft.mu_hat.isApprox(hard.mu_hat, 1e-12));
  CHECK(soft.psi_hat.isApprox(hard.psi_hat, 1e-12));
}

TEST_CASE("forecast_counts: units, offset doubling, Monte Carlo mean") {
  Forecast fc;
  fc.mu_hat = MatrixXd::Zero(2, 1);
  fc.psi_hat = MatrixXd::Zero(2, 1);
  Emission em;
  em.Gamma = MatrixXd::Zero(3, 1);
  em.eta = VectorXd::Zero(3);
  const MatrixXd ones = forecast_counts(fc, em, VectorXd::Zero(2));
  CHECK(ones.isApprox(MatrixXd::Ones(2, 3)));

  const MatrixXd doubled = forecast_counts(fc, em, VectorXd::Constant(2, std::log(2.0)));
  CHECK(doubled.isApprox(2.0 * ones, 1e-12));

  // Lognormal-Poisson mean: E[Poisson(exp(G s + eta))] with s ~ N(mu, psi).
  Rng rng(37);
  Forecast fc2;
  fc2.mu_hat = MatrixXd::Constant(1, 1, 0.4);
  fc2.psi_hat = MatrixXd::Constant(1, 1, 0.3);
  Emission em2;
  em2.Gamma = MatrixXd::Constant(1, 1, 0.9);
  em2.eta = VectorXd::Constant(1, 0.8);
  const double predicted = forecast_counts(fc2, em2, VectorXd::Zero(1))(0, 0);
  const int n = 100000;
  std::vector<double> draws(n);
  for (int r = 0; r < n; ++r) {
    const double s = rng.normal(0.4, 0.3);
    draws[r] = static_cast<double>(rng.poisson(std::exp(0.9 * s + 0.8)));
  }
  const MeanSE ms = mean_se(draws);
  CHECK(std::abs(ms.mean - predicted) < 3 * ms.se);
}

TEST_CASE("fit_filtering_proxy: t0 = T matches full-sequence inference") {
  Rng rng(41);
  const ModelParams m = random_model(rng, 3, 1, 1, 8);
  const Sequence seq = random_sequence(m, rng);
  FitConfig cfg;
  cfg.epochs = 2500;
  cfg.learning_rate = 0.03;
  cfg.convergence_rel_tol = 1e-10;
  cfg.convergence_window = 25;
  const FilteringFit full = fit_filtering_proxy(m, seq, seq.T(), cfg);
  const ProxyFitResult direct = fit_proxy_only(m, seq, cfg);
  CHECK(full.fit.elbo ==
        doctest::Approx(direct.elbo).epsilon(1e-10));  // same objective, same path
  CHECK(full.snapshot.mu.size() == 1);
}

TEST_CASE("fit_filtering_proxy: t0 = 1 depends only on the first observation") {
  Rng rng(43);
  const ModelParams m = random_model(rng, 3, 2, 2, 6);
  Sequence a = random_sequence(m, rng);
  Sequence b = a;
  b.counts.bottomRows(5).setConstant(7);  // diverge after t = 1
  FitConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.05;
  const FilteringFit fa = fit_filtering_proxy(m, a, 1, cfg);
  const FilteringFit fb = fit_filtering_proxy(m, b, 1, cfg);
  CHECK(fa.snapshot.mu.isApprox(fb.snapshot.mu, 1e-12));
  CHECK(fa.snapshot.sigma.isApprox(fb.snapshot.sigma, 1e-12));
  CHECK(fa.snapshot.alpha.isApprox(fb.snapshot.alpha, 1e-12));
}

TEST_CASE("fit_filtering_proxy: low-noise tracking calibration") {
  // Large counts make the posterior tight; the filtered mean must cover the
  // true source within 3 posterior SDs in at least 95% of replicates.
  ModelParams m = default_init_model({6, 1, 1, 10});
  Rng gamma_rng(47);
  for (int k = 0; k < 6; ++k) m.emission.Gamma(k, 0) = gamma_rng.normal();
  m.emission.Gamma = m.emission.Gamma / m.emission.Gamma.norm();
  m.emission.eta.setConstant(std::log(800.0));
  m.dynamics.B(0, 0) = 0.7;
  m.dynamics.psi(0, 0) = 0.3;
  m.dynamics.psi_bar(0, 0) = 0.3 / (1.0 - 0.49);

  FitConfig cfg;
  cfg.epochs = 800;
  cfg.learning_rate = 0.05;
  cfg.convergence_rel_tol = 1e-9;
  const int R = 40;
  const int t0 = 6;
  int covered = 0;
  const SimulationResult sim = sample_dataset(m, R, OffsetsPolicy::zero(), 53);
  for (int r = 0; r < R; ++r) {
    const FilteringFit filt = fit_filtering_proxy(m, sim.dataset.sequences[r], t0, cfg);
    const double err = std::abs(filt.snapshot.mu[0] - sim.latents[r].s(t0 - 1, 0));
    covered += err <= 3.0 * std::sqrt(filt.snapshot.sigma[0]);
  }
  CHECK(covered >= static_cast<int>(0.95 * R));
}

TEST_CASE("forecast_counts: log-rate above the cap errors") {
  Forecast fc;
  fc.mu_hat = MatrixXd::Constant(1, 1, 50.0);
  fc.psi_hat = MatrixXd::Zero(1, 1);
  Emission em;
  em.Gamma = MatrixXd::Ones(1, 1);
  em.eta = VectorXd::Zero(1);
  CHECK_THROWS_AS(forecast_counts(fc, em, VectorXd::Zero(1)), std::runtime_error);
}

TEST_CASE("align_regimes: recovers a label swap from marginal trajectories") {
  Rng rng(47);
  const SwitchProxy p = random_switch_proxy(rng, 8, 2, 3);
  const SwitchMarginals ref = switch_marginals(p);

  // Permute labels of a copy: component 0 rotated, component 1 swapped.
  const std::vector<std::vector<int>> applied{{1, 2, 0}, {0, 2, 1}};
  SwitchMarginals moved = ref;
  for (int t = 0; t < 8; ++t)
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 3; ++k) moved.alpha[t](i, applied[i][k]) = ref.alpha[t](i, k);

  const auto perms = align_regimes(ref, moved);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 3; ++k) CHECK(perms[i][k] == applied[i][k]);
}

TEST_SUITE_END();
