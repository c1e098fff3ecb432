#pragma once

#include "countica/elbo.hpp"
#include "countica/mstep.hpp"
#include "countica/optim.hpp"
#include "countica/proxy.hpp"
#include "countica/rng.hpp"
#include "countica/types.hpp"

#include <cstdint>
#include <vector>

namespace countica {

struct FitConfig {
  int epochs = 800;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double grad_clip_norm = 5.0;
  int batch_size = 0;  // 0 = full batch
  double convergence_rel_tol = 1e-6;
  int convergence_window = 10;
  ProxyMode proxy_mode = ProxyMode::AR;
  bool gamma_normalize = true;
  std::uint64_t seed = 0;

  // Step scheduling. One gradient step and one closed-form update per epoch
  // by default; both knobs are exposed.
  int grad_steps_per_epoch = 1;
  bool closed_form_update = true;
  bool cosine_decay = false;  // cosine learning-rate decay over `epochs`

  bool fit_eta = true;
  double variance_floor = 1e-8;

  void validate() const;
};

struct FitState {
  ModelParams model;
  std::vector<SourceProxy> source_proxies;
  std::vector<SwitchProxy> switch_proxies;
  std::vector<double> elbo_trace;  // one entry per completed epoch
  AdamState optimizer;
  int epoch = 0;
  bool converged = false;
  double seconds_per_epoch = 0.0;
};

/// Random-init policy: Gamma columns standard Gaussian then normalized,
/// eta = log of offset-corrected mean counts, B = 0.5, b = b_bar = 0,
/// psi = psi_bar = 1, uniform regime prior.
ModelParams random_init_model(const Dataset& data, const Dims& dims, Rng& rng);

/// Variational EM: per epoch, (E) forward moments + CAVI regime update per
/// sequence, then (M) a gradient step on Gamma/eta/source-proxy parameters
/// followed by the closed-form prior/dynamics update, with Gamma re-projected
/// to unit columns when requested. Aborts with the epoch index if the ELBO
/// turns non-finite.
FitState fit_vem(const Dataset& data, const FitConfig& config, const ModelParams& init);

/// Same loop with the random-init policy; d and C are the latent dimensions,
/// K and T come from the data.
FitState fit_vem_random_init(const Dataset& data, int d, int C, const FitConfig& config);

/// Continues a previous fit (checkpoint resume) for config.epochs more epochs.
FitState resume_fit(FitState state, const Dataset& data, const FitConfig& config);

/// Sum of per-sequence ELBOs for the state's model and proxies.
double dataset_elbo(const FitState& state, const Dataset& data);

/// Inference with frozen model parameters: optimizes only the per-sequence
/// variational parameters. Used by the forecasting module for prefix
/// (filtering) inference.
struct ProxyFitResult {
  SourceProxy source;
  SwitchProxy switches;
  SourceMoments moments;
  double elbo = 0.0;
  std::vector<double> trace;
};

ProxyFitResult fit_proxy_only(const ModelParams& model, const Sequence& seq,
                              const FitConfig& config);

}  // namespace countica
