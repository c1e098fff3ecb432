// Test-only oracles and generators. Everything here is deliberately
// independent of the library's computation paths: brute-force enumeration,
// quadrature, golden-section maximization and plain Monte Carlo, used to
// freeze expected values for the real implementations.
#pragma once

#include "countica/elbo.hpp"
#include "countica/proxy.hpp"
#include "countica/rng.hpp"
#include "countica/sampling.hpp"
#include "countica/types.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace testutil {

using namespace countica;

constexpr double kLog2PiT = 1.8378770664093454835606594728112;

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSE mean_se(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  var /= (n - 1.0);
  return {m, std::sqrt(var / n)};
}

// SE of an estimator evaluated on 32 disjoint batches of the sample.
template <typename F>
MeanSE batch_estimate(const std::vector<double>& xs, F estimator, int n_batches = 32) {
  const std::size_t bs = xs.size() / n_batches;
  std::vector<double> est;
  for (int b = 0; b < n_batches; ++b)
    est.push_back(estimator(std::vector<double>(xs.begin() + b * bs,
                                                xs.begin() + (b + 1) * bs)));
  MeanSE out = mean_se(est);
  return out;
}

inline double sample_variance(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return v / (n - 1.0);
}

// ---------------------------------------------------------------------------
// Random instances

inline VectorXd random_simplex(Rng& rng, int C) {
  VectorXd v(C);
  for (int k = 0; k < C; ++k) v[k] = 0.1 + rng.uniform();
  return v / v.sum();
}

inline ModelParams random_model(Rng& rng, int K, int d, int C, int T,
                                double gamma_scale = 0.4) {
  Dims dims{K, d, C, T};
  ModelParams m = default_init_model(dims);
  for (int i = 0; i < d; ++i) {
    m.prior.pi.row(i) = random_simplex(rng, C).transpose();
    for (int l = 0; l < C; ++l) m.prior.A[i].col(l) = random_simplex(rng, C);
    for (int k = 0; k < C; ++k) {
      m.dynamics.b_bar(i, k) = 0.5 * rng.normal();
      m.dynamics.psi_bar(i, k) = 0.3 + rng.uniform();
      m.dynamics.B(i, k) = -0.9 + 1.8 * rng.uniform();
      m.dynamics.b(i, k) = 0.4 * rng.normal();
      m.dynamics.psi(i, k) = 0.3 + rng.uniform();
    }
  }
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < d; ++j) m.emission.Gamma(k, j) = gamma_scale * rng.normal();
    m.emission.eta[k] = std::log(3.0) + 0.3 * rng.normal();
  }
  return m;
}

inline Sequence random_sequence(const ModelParams& model, Rng& rng,
                                bool with_offsets = true) {
  const Dims& dims = model.dims;
  MatrixXd s(dims.T, dims.d);
  for (int i = 0; i < dims.d; ++i) {
    const VectorXi labels = sample_regime_chain(model.prior, i, dims.T, rng);
    s.col(i) = sample_source_path(model.dynamics, i, labels, rng);
  }
  Sequence seq;
  seq.offsets = VectorXd::Zero(dims.T);
  if (with_offsets)
    for (int t = 0; t < dims.T; ++t) seq.offsets[t] = 0.6 * (rng.uniform() - 0.5);
  seq.counts = emit_counts(model.emission, seq.offsets, s, rng);
  seq.id = "test";
  return seq;
}

inline SourceProxy random_source_proxy(Rng& rng, int T, int d,
                                       ProxyMode mode = ProxyMode::AR) {
  SourceProxy p;
  p.mode = mode;
  p.m.resize(d);
  p.B_tilde.resize(T - 1, d);
  p.b_tilde.resize(T - 1, d);
  p.psi_tilde.resize(T, d);
  for (int i = 0; i < d; ++i) {
    p.m[i] = rng.normal();
    for (int t = 0; t < T - 1; ++t) {
      p.B_tilde(t, i) = mode == ProxyMode::AR ? -0.8 + 1.6 * rng.uniform() : 0.0;
      p.b_tilde(t, i) = 0.5 * rng.normal();
    }
    for (int t = 0; t < T; ++t) p.psi_tilde(t, i) = 0.2 + rng.uniform();
  }
  return p;
}

inline SwitchProxy random_switch_proxy(Rng& rng, int T, int d, int C) {
  SwitchProxy p = SwitchProxy::uniform(T, d, C);
  for (int i = 0; i < d; ++i) {
    p.nu.row(i) = random_simplex(rng, C).transpose();
    for (int t = 0; t < T - 1; ++t)
      for (int l = 0; l < C; ++l) p.kernel(t, i).col(l) = random_simplex(rng, C);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Exact proxy sampling and densities (for Monte Carlo oracles)

inline MatrixXd sample_proxy_sources(const SourceProxy& p, Rng& rng) {
  const int T = p.T();
  const int d = p.d();
  MatrixXd s(T, d);
  for (int i = 0; i < d; ++i) {
    s(0, i) = rng.normal(p.m[i], p.psi_tilde(0, i));
    for (int t = 1; t < T; ++t)
      s(t, i) = rng.normal(p.B_tilde(t - 1, i) * s(t - 1, i) + p.b_tilde(t - 1, i),
                           p.psi_tilde(t, i));
  }
  return s;
}

inline MatrixXi sample_proxy_labels(const SwitchProxy& p, Rng& rng) {
  MatrixXi u(p.T, p.d);
  for (int i = 0; i < p.d; ++i) {
    u(0, i) = rng.categorical(p.nu.row(i).transpose());
    for (int t = 1; t < p.T; ++t)
      u(t, i) = rng.categorical(p.kernel(t - 1, i).col(u(t - 1, i)));
  }
  return u;
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double diff = x - mean;
  return -0.5 * (kLog2PiT + std::log(var) + diff * diff / var);
}

inline double proxy_source_log_density(const SourceProxy& p, const MatrixXd& s) {
  double lp = 0.0;
  for (int i = 0; i < p.d(); ++i) {
    lp += log_normal_pdf(s(0, i), p.m[i], p.psi_tilde(0, i));
    for (int t = 1; t < p.T(); ++t)
      lp += log_normal_pdf(s(t, i),
                           p.B_tilde(t - 1, i) * s(t - 1, i) + p.b_tilde(t - 1, i),
                           p.psi_tilde(t, i));
  }
  return lp;
}

inline double proxy_switch_log_mass(const SwitchProxy& p, const MatrixXi& u) {
  double lp = 0.0;
  for (int i = 0; i < p.d; ++i) {
    lp += std::log(p.nu(i, u(0, i)));
    for (int t = 1; t < p.T; ++t)
      lp += std::log(p.kernel(t - 1, i)(u(t, i), u(t - 1, i)));
  }
  return lp;
}

// Probability of one component's label path under the (nu, tau) chain.
inline double proxy_path_prob(const SwitchProxy& p, int component,
                              const std::vector<int>& path) {
  double prob = p.nu(component, path[0]);
  for (std::size_t t = 1; t < path.size(); ++t)
    prob *= p.kernel(static_cast<int>(t) - 1, component)(path[t], path[t - 1]);
  return prob;
}

inline void for_each_path(int T, int C, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(T, 0);
  const long total = static_cast<long>(std::pow(C, T));
  for (long code = 0; code < total; ++code) {
    long rem = code;
    for (int t = 0; t < T; ++t) {
      path[t] = static_cast<int>(rem % C);
      rem /= C;
    }
    fn(path);
  }
}

// ---------------------------------------------------------------------------
// Quadrature

// Gauss-Hermite nodes/weights for the N(0, 1) measure (Golub-Welsch on the
// probabilists' Hermite recurrence).
inline void gauss_hermite(int n, VectorXd& nodes, VectorXd& weights) {
  MatrixXd J = MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(static_cast<double>(i));
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(J);
  nodes = eig.eigenvalues();
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v = eig.eigenvectors()(0, i);
    weights[i] = v * v;
  }
}

inline double logsumexp(const std::vector<double>& xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

inline double log_poisson_pmf(double x, double log_rate) {
  return x * log_rate - std::exp(log_rate) - std::lgamma(x + 1.0);
}

// log p(x) for d = 1 models by enumerating label paths and tensorized
// Gauss-Hermite quadrature over the source path (T <= 3).
inline double log_evidence_quadrature(const ModelParams& model, const Sequence& seq,
                                      int gh_nodes = 40) {
  const Dims& dims = model.dims;
  if (dims.d != 1) throw std::invalid_argument("quadrature oracle: d == 1 only");
  const int T = dims.T;
  VectorXd z, w;
  gauss_hermite(gh_nodes, z, w);

  std::vector<double> log_terms;
  for_each_path(T, dims.C, [&](const std::vector<int>& u) {
    double log_pu = std::log(model.prior.pi(0, u[0]));
    for (int t = 1; t < T; ++t) log_pu += std::log(model.prior.A[0](u[t], u[t - 1]));
    if (!std::isfinite(log_pu)) return;

    std::vector<int> grid(T, 0);
    const long total = static_cast<long>(std::pow(gh_nodes, T));
    for (long code = 0; code < total; ++code) {
      long rem = code;
      double log_w = 0.0;
      double s_prev = 0.0;
      double log_f = 0.0;
      for (int t = 0; t < T; ++t) {
        const int g = static_cast<int>(rem % gh_nodes);
        rem /= gh_nodes;
        log_w += std::log(w[g]);
        const double mean = t == 0 ? model.dynamics.b_bar(0, u[0])
                                   : model.dynamics.B(0, u[t]) * s_prev +
                                         model.dynamics.b(0, u[t]);
        const double var =
            t == 0 ? model.dynamics.psi_bar(0, u[0]) : model.dynamics.psi(0, u[t]);
        const double s = mean + std::sqrt(var) * z[g];
        s_prev = s;
        for (int k = 0; k < dims.K; ++k) {
          const double log_rate =
              model.emission.Gamma(k, 0) * s + seq.offsets[t] + model.emission.eta[k];
          log_f += log_poisson_pmf(seq.counts(t, k), log_rate);
        }
      }
      log_terms.push_back(log_pu + log_w + log_f);
    }
  });
  return logsumexp(log_terms);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

// Central finite differences over every free coordinate (Gamma, eta, m,
// B_tilde when AR, b_tilde, zeta = log psi_tilde) against elbo_grad.
// Returns the worst relative error, with |g| + |g_fd| floored at 1 so exact
// zeros compare in absolute terms.
inline double gradcheck_max_rel_err(const ModelParams& model, const SourceProxy& src,
                                    const SwitchProxy& sw, const Sequence& seq,
                                    double step = 1e-5);

// ---------------------------------------------------------------------------
// Numeric maximizers (oracles for closed-form updates)

inline double golden_max(const std::function<double(double)>& f, double lo, double hi,
                         int iters = 200) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Cyclic coordinate-wise golden-section ascent; adequate for the smooth
// concave objectives it is used on.
inline VectorXd coord_golden_max(const std::function<double(const VectorXd&)>& f,
                                 VectorXd x, double radius, int cycles = 80) {
  for (int c = 0; c < cycles; ++c)
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      VectorXd probe = x;
      const double best = golden_max(
          [&](double v) {
            probe[j] = v;
            return f(probe);
          },
          x[j] - radius, x[j] + radius);
      x[j] = best;
    }
  return x;
}

inline double gradcheck_max_rel_err(const ModelParams& model, const SourceProxy& src,
                                    const SwitchProxy& sw, const Sequence& seq,
                                    double step) {
  const GradientBundle g = elbo_grad(model, src, sw, seq);
  ModelParams m = model;
  SourceProxy p = src;
  double worst = 0.0;
  auto check = [&](double analytic, const std::function<void(double)>& set,
                   double current) {
    set(current + step);
    const double up = elbo(m, p, sw, seq);
    set(current - step);
    const double down = elbo(m, p, sw, seq);
    set(current);
    const double fd = (up - down) / (2.0 * step);
    const double rel =
        std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
    worst = std::max(worst, rel);
  };

  for (int k = 0; k < m.dims.K; ++k) {
    for (int j = 0; j < m.dims.d; ++j)
      check(g.d_Gamma(k, j), [&](double v) { m.emission.Gamma(k, j) = v; },
            m.emission.Gamma(k, j));
    check(g.d_eta[k], [&](double v) { m.emission.eta[k] = v; }, m.emission.eta[k]);
  }
  for (int i = 0; i < p.d(); ++i) {
    check(g.d_m[i], [&](double v) { p.m[i] = v; }, p.m[i]);
    for (int t = 0; t < p.T() - 1; ++t) {
      if (p.mode == ProxyMode::AR)
        check(g.d_B_tilde(t, i), [&](double v) { p.B_tilde(t, i) = v; },
              p.B_tilde(t, i));
      check(g.d_b_tilde(t, i), [&](double v) { p.b_tilde(t, i) = v; },
            p.b_tilde(t, i));
    }
    for (int t = 0; t < p.T(); ++t) {
      const double zeta = std::log(p.psi_tilde(t, i));
      check(g.d_zeta(t, i), [&](double v) { p.psi_tilde(t, i) = std::exp(v); }, zeta);
    }
  }
  return worst;
}

}  // namespace testutil
