#include "countica/fit.hpp"

#include "countica/rng.hpp"
#include "countica/sampling.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace countica {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Flat parameter vector: [vec(Gamma); eta?; per sequence (m; vec(B~)?;
// vec(b~); vec(zeta))] with zeta = log psi~. Model blocks are optional so the
// same machinery serves full VEM and frozen-model proxy fits.
struct FlatLayout {
  int K = 0;
  int d = 0;
  bool with_model = true;
  bool with_eta = true;
  bool with_btilde = true;
  std::vector<int> T;  // per sequence
  std::vector<int> seq_offset;
  int total = 0;

  static FlatLayout make(int K, int d, bool with_model, bool with_eta,
                         bool with_btilde, const std::vector<int>& T_per_seq) {
    FlatLayout l;
    l.K = K;
    l.d = d;
    l.with_model = with_model;
    l.with_eta = with_model && with_eta;
    l.with_btilde = with_btilde;
    l.T = T_per_seq;
    int off = 0;
    if (l.with_model) off += K * d + (l.with_eta ? K : 0);
    for (int T : T_per_seq) {
      l.seq_offset.push_back(off);
      off += l.seq_params(T);
    }
    l.total = off;
    return l;
  }

  int seq_params(int T) const {
    return d + (with_btilde ? (T - 1) * d : 0) + (T - 1) * d + T * d;
  }
};

void pack_model(const FlatLayout& l, const ModelParams& model, VectorXd& p) {
  if (!l.with_model) return;
  Eigen::Map<VectorXd>(p.data(), l.K * l.d) =
      Eigen::Map<const VectorXd>(model.emission.Gamma.data(), l.K * l.d);
  if (l.with_eta) p.segment(l.K * l.d, l.K) = model.emission.eta;
}

void pack_proxy(const FlatLayout& l, int s, const SourceProxy& proxy, VectorXd& p) {
  const int T = l.T[s];
  int off = l.seq_offset[s];
  p.segment(off, l.d) = proxy.m;
  off += l.d;
  if (l.with_btilde) {
    Eigen::Map<VectorXd>(p.data() + off, (T - 1) * l.d) =
        Eigen::Map<const VectorXd>(proxy.B_tilde.data(), (T - 1) * l.d);
    off += (T - 1) * l.d;
  }
  Eigen::Map<VectorXd>(p.data() + off, (T - 1) * l.d) =
      Eigen::Map<const VectorXd>(proxy.b_tilde.data(), (T - 1) * l.d);
  off += (T - 1) * l.d;
  Eigen::Map<MatrixXd>(p.data() + off, T, l.d) = proxy.psi_tilde.array().log().matrix();
}

void unpack(const FlatLayout& l, const VectorXd& p, double variance_floor,
            ModelParams* model, std::vector<SourceProxy>& proxies) {
  if (l.with_model) {
    Eigen::Map<const VectorXd> g(p.data(), l.K * l.d);
    model->emission.Gamma = Eigen::Map<const MatrixXd>(g.data(), l.K, l.d);
    if (l.with_eta) model->emission.eta = p.segment(l.K * l.d, l.K);
  }
  for (std::size_t s = 0; s < l.T.size(); ++s) {
    const int T = l.T[s];
    int off = l.seq_offset[s];
    SourceProxy& proxy = proxies[s];
    proxy.m = p.segment(off, l.d);
    off += l.d;
    if (l.with_btilde) {
      proxy.B_tilde = Eigen::Map<const MatrixXd>(p.data() + off, T - 1, l.d);
      off += (T - 1) * l.d;
    } else {
      proxy.B_tilde = MatrixXd::Zero(T - 1, l.d);
    }
    proxy.b_tilde = Eigen::Map<const MatrixXd>(p.data() + off, T - 1, l.d);
    off += (T - 1) * l.d;
    proxy.psi_tilde = Eigen::Map<const MatrixXd>(p.data() + off, T, l.d)
                          .array()
                          .exp()
                          .cwiseMax(variance_floor)
                          .matrix();
  }
}

void add_grad(const FlatLayout& l, int s, const GradientBundle& g, double scale,
              VectorXd& grad) {
  if (l.with_model) {
    Eigen::Map<VectorXd>(grad.data(), l.K * l.d) +=
        scale * Eigen::Map<const VectorXd>(g.d_Gamma.data(), l.K * l.d);
    if (l.with_eta) grad.segment(l.K * l.d, l.K) += scale * g.d_eta;
  }
  const int T = l.T[s];
  int off = l.seq_offset[s];
  grad.segment(off, l.d) += scale * g.d_m;
  off += l.d;
  if (l.with_btilde) {
    Eigen::Map<VectorXd>(grad.data() + off, (T - 1) * l.d) +=
        scale * Eigen::Map<const VectorXd>(g.d_B_tilde.data(), (T - 1) * l.d);
    off += (T - 1) * l.d;
  }
  Eigen::Map<VectorXd>(grad.data() + off, (T - 1) * l.d) +=
      scale * Eigen::Map<const VectorXd>(g.d_b_tilde.data(), (T - 1) * l.d);
  off += (T - 1) * l.d;
  Eigen::Map<VectorXd>(grad.data() + off, T * l.d) +=
      scale * Eigen::Map<const VectorXd>(g.d_zeta.data(), T * l.d);
}

SourceProxy initial_proxy(int T, int d, ProxyMode mode) {
  SourceProxy p;
  p.m = VectorXd::Zero(d);
  p.B_tilde = MatrixXd::Zero(T - 1, d);
  p.b_tilde = MatrixXd::Zero(T - 1, d);
  p.psi_tilde = MatrixXd::Constant(T, d, 0.5);
  p.mode = mode;
  return p;
}

std::vector<int> sample_batch(int n, int batch_size, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (batch_size <= 0 || batch_size >= n) return idx;
  for (int i = 0; i < batch_size; ++i) {
    const int j = i + static_cast<int>(rng.uniform() * (n - i));
    std::swap(idx[i], idx[std::min(j, n - 1)]);
  }
  idx.resize(batch_size);
  return idx;
}

}  // namespace

void FitConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("fit config: epochs >= 1 required");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("fit config: learning_rate > 0 required");
  if (convergence_window < 1)
    throw std::invalid_argument("fit config: convergence_window >= 1 required");
  if (grad_steps_per_epoch < 0)
    throw std::invalid_argument("fit config: grad_steps_per_epoch >= 0 required");
}

ModelParams random_init_model(const Dataset& data, const Dims& dims, Rng& rng) {
  ModelParams model = default_init_model(dims);
  MatrixXd Gamma(dims.K, dims.d);
  for (int k = 0; k < dims.K; ++k)
    for (int j = 0; j < dims.d; ++j) Gamma(k, j) = rng.normal();
  model.emission.Gamma = project_gamma_columns(Gamma);
  model.emission.gamma_normalized = true;

  // eta = log of offset-corrected mean counts.
  VectorXd acc = VectorXd::Zero(dims.K);
  long rows = 0;
  for (const Sequence& seq : data.sequences) {
    for (int t = 0; t < seq.T(); ++t) {
      acc += seq.counts.row(t).cast<double>().transpose() * std::exp(-seq.offsets[t]);
      ++rows;
    }
  }
  if (rows > 0)
    model.emission.eta = (acc / static_cast<double>(rows)).cwiseMax(1e-3).array().log();
  return model;
}

namespace {

FitState fit_impl(const Dataset& data, const FitConfig& cfg, ModelParams model,
                  std::vector<SourceProxy> proxies, AdamState opt, int epoch0,
                  std::vector<double> trace) {
  cfg.validate();
  const int n = data.size();
  if (n == 0) throw std::invalid_argument("fit_vem: empty dataset");
  model.validate();

  std::vector<int> T_per_seq;
  for (const Sequence& seq : data.sequences) {
    seq.validate();
    if (seq.K() != model.dims.K)
      throw std::invalid_argument("fit_vem: sequence width != model K");
    T_per_seq.push_back(seq.T());
  }

  const FlatLayout layout =
      FlatLayout::make(model.dims.K, model.dims.d, /*with_model=*/true, cfg.fit_eta,
                       cfg.proxy_mode == ProxyMode::AR, T_per_seq);

  VectorXd params = VectorXd::Zero(layout.total);
  pack_model(layout, model, params);
  for (int s = 0; s < n; ++s) pack_proxy(layout, s, proxies[s], params);
  if (opt.m.size() != layout.total) opt = AdamState::zero(layout.total);

  std::vector<SwitchProxy> switches(n);
  Rng batch_rng = Rng::stream(cfg.seed, 0xBA7C4ULL);
  const auto t_start = std::chrono::steady_clock::now();

  FitState state;
  state.elbo_trace = std::move(trace);
  int epochs_run = 0;
  bool converged = false;

  for (int epoch = epoch0; epoch < epoch0 + cfg.epochs; ++epoch) {
    unpack(layout, params, cfg.variance_floor, &model, proxies);

    // E step: forward moments + optimal CAVI regime update, then the epoch's
    // ELBO under the refreshed regime proxy.
    double total = 0.0;
    try {
      for (int s = 0; s < n; ++s) {
        const SourceMoments mom = forward_moments(proxies[s]);
        switches[s] = cavi_switch_update(model, mom);
        total += elbo(model, proxies[s], switches[s], data.sequences[s]);
      }
    } catch (const std::runtime_error& err) {
      throw std::runtime_error("fit_vem: diverged at epoch " + std::to_string(epoch) +
                               ": " + err.what());
    }
    if (!std::isfinite(total))
      throw std::runtime_error("fit_vem: diverged at epoch " + std::to_string(epoch));
    state.elbo_trace.push_back(total);
    ++epochs_run;

    const int e = static_cast<int>(state.elbo_trace.size());
    if (e > cfg.convergence_window) {
      const double prev = state.elbo_trace[e - 1 - cfg.convergence_window];
      const double rel = std::abs(total - prev) / (std::abs(prev) + 1e-12);
      if (rel < cfg.convergence_rel_tol) {
        converged = true;
        break;
      }
    }

    AdamConfig acfg;
    acfg.learning_rate =
        cfg.cosine_decay
            ? cfg.learning_rate * 0.5 *
                  (1.0 + std::cos(kPi * (epoch - epoch0) / std::max(cfg.epochs, 1)))
            : cfg.learning_rate;
    acfg.weight_decay = cfg.weight_decay;
    acfg.clip_norm = cfg.grad_clip_norm;

    // M step, gradient half: ascent on Gamma, eta and source-proxy params.
    for (int step = 0; step < cfg.grad_steps_per_epoch; ++step) {
      const std::vector<int> batch = sample_batch(n, cfg.batch_size, batch_rng);
      const double scale = static_cast<double>(n) / batch.size();
      VectorXd grad = VectorXd::Zero(layout.total);
      for (int s : batch)
        add_grad(layout, s,
                 elbo_grad(model, proxies[s], switches[s], data.sequences[s]), scale,
                 grad);
      params = adam_step(params, -grad, opt, acfg);
      if (cfg.gamma_normalize) {
        Eigen::Map<MatrixXd> G(params.data(), model.dims.K, model.dims.d);
        G = project_gamma_columns(G);
      }
      unpack(layout, params, cfg.variance_floor, &model, proxies);
    }

    // M step, closed-form half: prior and dynamics from the fresh proxies.
    if (cfg.closed_form_update) {
      const std::vector<int> batch = sample_batch(n, cfg.batch_size, batch_rng);
      const double weight = static_cast<double>(n) / batch.size();
      MStepStats stats = MStepStats::zero(model.dims.d, model.dims.C);
      for (int s : batch) {
        const SourceMoments mom = forward_moments(proxies[s]);
        const SwitchMarginals marg = switch_marginals(switches[s]);
        accumulate_mstep_stats(stats, proxies[s], mom, switches[s], marg, weight);
      }
      try {
        MStepResult res = mstep_closed_form(stats, model.prior, model.dynamics);
        model.prior = std::move(res.prior);
        model.dynamics = std::move(res.dynamics);
      } catch (const std::runtime_error& err) {
        throw std::runtime_error("fit_vem: diverged at epoch " + std::to_string(epoch) +
                                 ": " + err.what());
      }
    }
  }

  const auto t_end = std::chrono::steady_clock::now();
  unpack(layout, params, cfg.variance_floor, &model, proxies);
  model.emission.gamma_normalized = cfg.gamma_normalize;
  for (int s = 0; s < n; ++s)
    switches[s] = cavi_switch_update(model, forward_moments(proxies[s]));

  state.model = std::move(model);
  state.source_proxies = std::move(proxies);
  state.switch_proxies = std::move(switches);
  state.optimizer = std::move(opt);
  state.epoch = epoch0 + epochs_run;
  state.converged = converged;
  state.seconds_per_epoch =
      epochs_run > 0
          ? std::chrono::duration<double>(t_end - t_start).count() / epochs_run
          : 0.0;
  return state;
}

}  // namespace

FitState fit_vem_random_init(const Dataset& data, int d, int C, const FitConfig& config) {
  if (data.size() == 0) throw std::invalid_argument("fit_vem: empty dataset");
  Dims dims;
  dims.K = data.sequences[0].K();
  dims.T = data.sequences[0].T();
  dims.d = d;
  dims.C = C;
  Rng rng(config.seed);
  return fit_vem(data, config, random_init_model(data, dims, rng));
}

FitState fit_vem(const Dataset& data, const FitConfig& config, const ModelParams& init) {
  std::vector<SourceProxy> proxies;
  for (const Sequence& seq : data.sequences)
    proxies.push_back(initial_proxy(seq.T(), init.dims.d, config.proxy_mode));
  return fit_impl(data, config, init, std::move(proxies), AdamState::zero(0), 0, {});
}

FitState resume_fit(FitState state, const Dataset& data, const FitConfig& config) {
  return fit_impl(data, config, std::move(state.model), std::move(state.source_proxies),
                  std::move(state.optimizer), state.epoch, std::move(state.elbo_trace));
}

double dataset_elbo(const FitState& state, const Dataset& data) {
  double total = 0.0;
  for (int s = 0; s < data.size(); ++s)
    total += elbo(state.model, state.source_proxies[s], state.switch_proxies[s],
                  data.sequences[s]);
  return total;
}

ProxyFitResult fit_proxy_only(const ModelParams& model, const Sequence& seq,
                              const FitConfig& cfg) {
  cfg.validate();
  model.validate();
  seq.validate();
  if (seq.K() != model.dims.K)
    throw std::invalid_argument("fit_proxy_only: sequence width != model K");

  const FlatLayout layout =
      FlatLayout::make(model.dims.K, model.dims.d, /*with_model=*/false, false,
                       cfg.proxy_mode == ProxyMode::AR, {seq.T()});
  std::vector<SourceProxy> proxies{initial_proxy(seq.T(), model.dims.d, cfg.proxy_mode)};
  VectorXd params = VectorXd::Zero(layout.total);
  pack_proxy(layout, 0, proxies[0], params);
  AdamState opt = AdamState::zero(layout.total);

  AdamConfig acfg;
  acfg.weight_decay = cfg.weight_decay;
  acfg.clip_norm = cfg.grad_clip_norm;

  ProxyFitResult out;
  SwitchProxy sw;
  ModelParams frozen = model;  // unpack never touches it (with_model = false)
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    unpack(layout, params, cfg.variance_floor, nullptr, proxies);
    const SourceMoments mom = forward_moments(proxies[0]);
    sw = cavi_switch_update(frozen, mom);
    const double value = elbo(frozen, proxies[0], sw, seq);
    if (!std::isfinite(value))
      throw std::runtime_error("fit_proxy_only: diverged at epoch " +
                               std::to_string(epoch));
    out.trace.push_back(value);

    const int e = static_cast<int>(out.trace.size());
    if (e > cfg.convergence_window) {
      const double prev = out.trace[e - 1 - cfg.convergence_window];
      if (std::abs(value - prev) / (std::abs(prev) + 1e-12) < cfg.convergence_rel_tol)
        break;
    }

    acfg.learning_rate =
        cfg.cosine_decay
            ? cfg.learning_rate * 0.5 * (1.0 + std::cos(kPi * epoch / cfg.epochs))
            : cfg.learning_rate;
    VectorXd grad = VectorXd::Zero(layout.total);
    add_grad(layout, 0, elbo_grad(frozen, proxies[0], sw, seq), 1.0, grad);
    params = adam_step(params, -grad, opt, acfg);
  }

  unpack(layout, params, cfg.variance_floor, nullptr, proxies);
  out.moments = forward_moments(proxies[0]);
  out.switches = cavi_switch_update(frozen, out.moments);
  out.source = std::move(proxies[0]);
  out.elbo = elbo(frozen, out.source, out.switches, seq);
  return out;
}

}  // namespace countica
