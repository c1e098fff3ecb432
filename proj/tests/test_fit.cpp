#include "countica/fit.hpp"

#include "countica/metrics.hpp"
#include "countica/scenario.hpp"

#include "doctest.h"
#include "helpers.hpp"

#include <cmath>

using namespace countica;
using namespace testutil;

TEST_SUITE_BEGIN("fit");

TEST_CASE("fit config: epochs = 0 violates the precondition") {
  FitConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("fit_vem: empty dataset is rejected") {
  FitConfig cfg;
  Dataset empty;
  CHECK_THROWS_AS(fit_vem_random_init(empty, 1, 1, cfg), std::invalid_argument);
}

TEST_CASE("fit_vem: deterministic given the seed") {
  Rng rng(3);
  ModelParams oracle = random_model(rng, 3, 1, 1, 6);
  const Dataset data = sample_dataset(oracle, 8, OffsetsPolicy::zero(), 11).dataset;
  FitConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 5;
  const FitState a = fit_vem_random_init(data, 1, 1, cfg);
  const FitState b = fit_vem_random_init(data, 1, 1, cfg);
  REQUIRE(a.elbo_trace.size() == b.elbo_trace.size());
  for (std::size_t e = 0; e < a.elbo_trace.size(); ++e)
    CHECK(a.elbo_trace[e] == b.elbo_trace[e]);
  CHECK(a.model.emission.Gamma.isApprox(b.model.emission.Gamma, 0.0));
}

TEST_CASE("fit_vem: resume matches an uninterrupted run") {
  Rng rng(5);
  ModelParams oracle = random_model(rng, 3, 2, 1, 5);
  const Dataset data = sample_dataset(oracle, 6, OffsetsPolicy::zero(), 13).dataset;
  FitConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 9;
  cfg.convergence_rel_tol = 0.0;  // run all epochs
  const FitState full = fit_vem_random_init(data, 2, 1, cfg);

  FitConfig half = cfg;
  half.epochs = 15;
  FitState part = fit_vem_random_init(data, 2, 1, half);
  part = resume_fit(std::move(part), data, half);
  REQUIRE(part.elbo_trace.size() == full.elbo_trace.size());
  CHECK(std::abs(part.elbo_trace.back() - full.elbo_trace.back()) <=
        1e-9 * std::abs(full.elbo_trace.back()));
  CHECK(part.epoch == full.epoch);
}

TEST_CASE("fit_vem: coordinate-ascent rounds alone are monotone") {
  // Gradient steps disabled: each (CAVI + closed-form M) round must not
  // decrease the recorded dataset ELBO.
  Rng rng(7);
  for (int rep = 0; rep < 3; ++rep) {
    ModelParams oracle = random_model(rng, 3, 2, 2, 5);
    const Dataset data = sample_dataset(oracle, 5, OffsetsPolicy::zero(), 17 + rep).dataset;
    FitConfig cfg;
    cfg.epochs = 25;
    cfg.grad_steps_per_epoch = 0;
    cfg.gamma_normalize = false;
    cfg.convergence_rel_tol = 0.0;
    cfg.seed = rep;
    const FitState state = fit_vem_random_init(data, 2, 2, cfg);
    for (std::size_t e = 1; e < state.elbo_trace.size(); ++e)
      CHECK(state.elbo_trace[e] >= state.elbo_trace[e - 1] - 1e-8);
  }
}

TEST_CASE("fit_vem: eta recovery on a scalar model within 0.1") {
  ModelParams oracle = default_init_model({1, 1, 1, 10});
  oracle.emission.Gamma(0, 0) = 1.0;
  oracle.emission.gamma_normalized = true;
  oracle.emission.eta[0] = 1.5;
  oracle.dynamics.B(0, 0) = 0.6;
  oracle.dynamics.psi(0, 0) = 0.25;
  oracle.dynamics.psi_bar(0, 0) = 0.25 / (1.0 - 0.36);
  const Dataset data = sample_dataset(oracle, 200, OffsetsPolicy::zero(), 23).dataset;

  FitConfig cfg;
  cfg.epochs = 600;
  cfg.learning_rate = 0.02;
  cfg.seed = 1;
  cfg.convergence_rel_tol = 1e-9;
  const FitState state = fit_vem_random_init(data, 1, 1, cfg);

  // The identifiable baseline is eta + Gamma * (mean source level); compare
  // on that scale to stay agnostic to the source-mean shift.
  double mean_source = 0.0;
  for (const SourceProxy& p : state.source_proxies)
    mean_source += forward_moments(p).mu.mean() / state.source_proxies.size();
  const double fitted_baseline =
      state.model.emission.eta[0] + state.model.emission.Gamma(0, 0) * mean_source;
  CHECK(std::abs(fitted_baseline - 1.5) < 0.1);
}

TEST_CASE("fit_vem: mean-field mode keeps the proxy factorized") {
  Rng rng(11);
  ModelParams oracle = random_model(rng, 3, 2, 1, 6);
  const Dataset data = sample_dataset(oracle, 5, OffsetsPolicy::zero(), 29).dataset;
  FitConfig cfg;
  cfg.epochs = 20;
  cfg.proxy_mode = ProxyMode::MeanField;
  const FitState state = fit_vem_random_init(data, 2, 1, cfg);
  for (const SourceProxy& p : state.source_proxies) {
    CHECK(p.mode == ProxyMode::MeanField);
    CHECK(p.B_tilde.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("fit_vem: gamma stays column-normalized during training") {
  Rng rng(13);
  ModelParams oracle = random_model(rng, 4, 2, 1, 6);
  const Dataset data = sample_dataset(oracle, 6, OffsetsPolicy::zero(), 31).dataset;
  FitConfig cfg;
  cfg.epochs = 30;
  const FitState state = fit_vem_random_init(data, 2, 1, cfg);
  for (int j = 0; j < 2; ++j)
    CHECK(state.model.emission.Gamma.col(j).norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("fit_vem: divergence aborts with the epoch index") {
  Rng rng(17);
  ModelParams oracle = random_model(rng, 2, 1, 1, 5);
  const Dataset data = sample_dataset(oracle, 3, OffsetsPolicy::zero(), 37).dataset;
  FitConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 2e4;  // forces exp overflow in a few steps
  cfg.grad_clip_norm = 0.0;
  CHECK_THROWS_WITH_AS(fit_vem_random_init(data, 1, 1, cfg),
                       doctest::Contains("diverged at epoch"), std::runtime_error);
}

TEST_CASE("fit_vem: convergence window stops early and flags it") {
  Rng rng(19);
  ModelParams oracle = random_model(rng, 2, 1, 1, 4);
  const Dataset data = sample_dataset(oracle, 4, OffsetsPolicy::zero(), 41).dataset;
  FitConfig cfg;
  cfg.epochs = 500;
  cfg.convergence_rel_tol = 0.5;  // absurdly loose on purpose
  cfg.convergence_window = 3;
  const FitState state = fit_vem_random_init(data, 1, 1, cfg);
  CHECK(state.converged);
  CHECK(static_cast<int>(state.elbo_trace.size()) < 500);
}

TEST_CASE("fit_proxy_only: never touches the model and improves the ELBO") {
  Rng rng(23);
  ModelParams model = random_model(rng, 3, 2, 2, 6);
  const Sequence seq = random_sequence(model, rng);
  const MatrixXd gamma_before = model.emission.Gamma;
  FitConfig cfg;
  cfg.epochs = 150;
  cfg.learning_rate = 0.05;
  const ProxyFitResult res = fit_proxy_only(model, seq, cfg);
  CHECK(model.emission.Gamma.isApprox(gamma_before, 0.0));
  CHECK(res.trace.back() > res.trace.front());
  // res.elbo is evaluated on the returned (post-final-step) proxies.
  CHECK(res.elbo == doctest::Approx(elbo(model, res.source, res.switches, seq)).epsilon(1e-12));
  CHECK(res.elbo >= res.trace.front());
}

TEST_CASE("fit_vem: mini-batching runs deterministically") {
  Rng rng(29);
  ModelParams oracle = random_model(rng, 3, 2, 1, 6);
  const Dataset data = sample_dataset(oracle, 6, OffsetsPolicy::zero(), 47).dataset;
  FitConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 2;  // closed-form statistics scaled by the inverse fraction
  cfg.seed = 4;
  cfg.convergence_rel_tol = 0.0;
  const FitState a = fit_vem_random_init(data, 2, 1, cfg);
  const FitState b = fit_vem_random_init(data, 2, 1, cfg);
  CHECK(std::isfinite(a.elbo_trace.back()));
  CHECK(a.elbo_trace.back() == b.elbo_trace.back());
  CHECK(a.elbo_trace.back() > a.elbo_trace.front());
}

TEST_SUITE_END();
