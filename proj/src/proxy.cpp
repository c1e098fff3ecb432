#include "countica/proxy.hpp"

#include <cmath>
#include <stdexcept>

namespace countica {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

void SourceProxy::validate() const {
  const int Tn = T();
  const int dn = d();
  if (Tn < 1 || dn < 1) throw std::invalid_argument("source proxy: empty");
  if (m.size() != dn) throw std::invalid_argument("source proxy: m length != d");
  if (B_tilde.rows() != Tn - 1 || B_tilde.cols() != dn ||
      b_tilde.rows() != Tn - 1 || b_tilde.cols() != dn)
    throw std::invalid_argument("source proxy: AR blocks must be (T-1) x d");
  if (!(psi_tilde.array() > 0.0).all())
    throw std::invalid_argument("source proxy: psi_tilde must be > 0");
  if (mode == ProxyMode::MeanField && B_tilde.size() > 0 &&
      B_tilde.cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("source proxy: MeanField requires B_tilde == 0");
}

SwitchProxy SwitchProxy::uniform(int T, int d, int C) {
  SwitchProxy p;
  p.T = T;
  p.d = d;
  p.C = C;
  p.nu = MatrixXd::Constant(d, C, 1.0 / C);
  p.tau.assign(static_cast<std::size_t>(T - 1) * d, MatrixXd::Constant(C, C, 1.0 / C));
  return p;
}

void SwitchProxy::validate(double tol) const {
  if (nu.rows() != d || nu.cols() != C)
    throw std::invalid_argument("switch proxy: nu must be d x C");
  if (static_cast<int>(tau.size()) != (T - 1) * d)
    throw std::invalid_argument("switch proxy: expected (T-1)*d kernels");
  if ((nu.array() < 0.0).any()) throw std::invalid_argument("switch proxy: negative nu");
  for (int i = 0; i < d; ++i)
    if (std::abs(nu.row(i).sum() - 1.0) > tol)
      throw std::invalid_argument("switch proxy: nu row does not sum to 1");
  for (const MatrixXd& k : tau) {
    if (k.rows() != C || k.cols() != C)
      throw std::invalid_argument("switch proxy: kernel must be C x C");
    if ((k.array() < 0.0).any())
      throw std::invalid_argument("switch proxy: negative kernel entry");
    for (int l = 0; l < C; ++l)
      if (std::abs(k.col(l).sum() - 1.0) > tol)
        throw std::invalid_argument("switch proxy: kernel column does not sum to 1");
  }
}

SourceMoments forward_moments(const SourceProxy& proxy) {
  proxy.validate();
  const int T = proxy.T();
  const int d = proxy.d();
  SourceMoments mom;
  mom.mu.resize(T, d);
  mom.sigma.resize(T, d);
  mom.lag1.resize(T - 1, d);
  mom.mu.row(0) = proxy.m.transpose();
  mom.sigma.row(0) = proxy.psi_tilde.row(0);
  for (int t = 1; t < T; ++t) {
    const auto Bt = proxy.B_tilde.row(t - 1).array();
    mom.mu.row(t) = (Bt * mom.mu.row(t - 1).array() + proxy.b_tilde.row(t - 1).array()).matrix();
    mom.sigma.row(t) =
        (proxy.psi_tilde.row(t).array() + Bt.square() * mom.sigma.row(t - 1).array()).matrix();
    mom.lag1.row(t - 1) = (Bt * mom.sigma.row(t - 1).array()).matrix();
  }
  return mom;
}

SwitchMarginals switch_marginals(const SwitchProxy& proxy) {
  proxy.validate();
  SwitchMarginals marg;
  marg.alpha.resize(proxy.T);
  marg.alpha[0] = proxy.nu;
  for (int t = 1; t < proxy.T; ++t) {
    marg.alpha[t].resize(proxy.d, proxy.C);
    for (int i = 0; i < proxy.d; ++i)
      marg.alpha[t].row(i) =
          (proxy.kernel(t - 1, i) * marg.alpha[t - 1].row(i).transpose()).transpose();
  }
  return marg;
}

EvidenceTerms evidence_terms(const ModelParams& model, const SourceMoments& moments) {
  const int T = static_cast<int>(moments.mu.rows());
  const int d = model.dims.d;
  const int C = model.dims.C;
  if (moments.mu.cols() != d)
    throw std::invalid_argument("evidence_terms: moments/model dimension mismatch");

  EvidenceTerms ev;
  ev.log_e.assign(T, MatrixXd(d, C));
  ev.e.assign(T, MatrixXd(d, C));

  for (int i = 0; i < d; ++i)
    for (int k = 0; k < C; ++k) {
      const double var = model.dynamics.psi_bar(i, k);
      const double diff = moments.mu(0, i) - model.dynamics.b_bar(i, k);
      ev.log_e[0](i, k) =
          -0.5 * std::log(var) - (moments.sigma(0, i) + diff * diff) / (2.0 * var);
    }
  for (int t = 1; t < T; ++t)
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < C; ++k) {
        const double Bk = model.dynamics.B(i, k);
        const double var = model.dynamics.psi(i, k);
        const double diff =
            moments.mu(t, i) - Bk * moments.mu(t - 1, i) - model.dynamics.b(i, k);
        const double quad = moments.sigma(t, i) + Bk * Bk * moments.sigma(t - 1, i) +
                            diff * diff - 2.0 * Bk * moments.lag1(t - 1, i);
        ev.log_e[t](i, k) = -0.5 * std::log(var) - quad / (2.0 * var);
      }

  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < d; ++i) {
      const double shift = ev.log_e[t].row(i).maxCoeff();
      ev.e[t].row(i) = (ev.log_e[t].row(i).array() - shift).exp().matrix();
    }
    if (!ev.e[t].allFinite())
      throw std::runtime_error("evidence_terms: non-finite evidence at t=" +
                               std::to_string(t + 1));
  }
  return ev;
}

SwitchProxy cavi_switch_update(const ModelParams& model, const SourceMoments& moments) {
  const EvidenceTerms ev = evidence_terms(model, moments);
  const int T = static_cast<int>(moments.mu.rows());
  const int d = model.dims.d;
  const int C = model.dims.C;

  SwitchProxy out;
  out.T = T;
  out.d = d;
  out.C = C;
  out.nu.resize(d, C);
  out.tau.assign(static_cast<std::size_t>(std::max(T - 1, 0)) * d, MatrixXd(C, C));

  for (int i = 0; i < d; ++i) {
    // Backward messages, renormalized per step so long chains cannot
    // underflow; the (nu, tau) formulas are invariant to per-step scaling.
    MatrixXd beta(T, C);
    beta.row(T - 1).setOnes();
    const MatrixXd& A = model.prior.A[i];
    for (int t = T - 2; t >= 0; --t) {
      for (int l = 0; l < C; ++l) {
        double acc = 0.0;
        for (int k = 0; k < C; ++k)
          acc += A(k, l) * ev.e[t + 1](i, k) * beta(t + 1, k);
        beta(t, l) = acc;
      }
      const double scale = beta.row(t).maxCoeff();
      if (!(scale > 0.0) || !std::isfinite(scale))
        throw std::runtime_error("cavi_switch_update: underflow at (t=" +
                                 std::to_string(t + 1) + ", i=" + std::to_string(i) + ")");
      beta.row(t) /= scale;
    }

    VectorXd nu_i =
        (model.prior.pi.row(i).array() * ev.e[0].row(i).array() * beta.row(0).array())
            .matrix()
            .transpose();
    const double mass = nu_i.sum();
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw std::runtime_error("cavi_switch_update: underflow at (t=1, i=" +
                               std::to_string(i) + ")");
    out.nu.row(i) = (nu_i / mass).transpose();

    for (int t = 0; t < T - 1; ++t) {
      MatrixXd& tau = out.kernel(t, i);
      for (int l = 0; l < C; ++l) {
        VectorXd col(C);
        for (int k = 0; k < C; ++k)
          col[k] = A(k, l) * ev.e[t + 1](i, k) * beta(t + 1, k);
        const double z = col.sum();
        if (!(z > 0.0) || !std::isfinite(z))
          throw std::runtime_error("cavi_switch_update: underflow at (t=" +
                                   std::to_string(t + 2) + ", i=" + std::to_string(i) + ")");
        tau.col(l) = col / z;
      }
    }
  }
  return out;
}

}  // namespace countica
