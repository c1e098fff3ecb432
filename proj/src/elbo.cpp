#include "countica/elbo.hpp"

#include <cmath>
#include <stdexcept>

namespace countica {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kLog2PiE = 2.8378770664093454835606594728112;

// x * log(x / y) with the 0 log 0 = 0 convention.
double xlogx_over_y(double x, double y) {
  if (x == 0.0) return 0.0;
  return x * (std::log(x) - std::log(y));
}

void check_shapes(const ModelParams& model, const SourceProxy& src,
                  const SwitchProxy& sw, const Sequence& seq) {
  const Dims& dims = model.dims;
  if (src.T() != seq.T() || src.d() != dims.d)
    throw std::invalid_argument("elbo: source proxy shape mismatch");
  if (sw.T != seq.T() || sw.d != dims.d || sw.C != dims.C)
    throw std::invalid_argument("elbo: switch proxy shape mismatch");
  if (seq.K() != dims.K) throw std::invalid_argument("elbo: sequence width != K");
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("elbo: non-finite ") + term + " term");
}

// log mean count plus the log-normal variance correction, per (t, k).
MatrixXd log_rates(const ModelParams& model, const Sequence& seq,
                   const SourceMoments& mom) {
  const MatrixXd lin =
      ((mom.mu * model.emission.Gamma.transpose()).colwise() + seq.offsets).rowwise() +
      model.emission.eta.transpose();
  const MatrixXd half_quad =
      0.5 * (mom.sigma * model.emission.Gamma.cwiseProduct(model.emission.Gamma).transpose());
  return lin + half_quad;
}

}  // namespace

ElboTerms elbo_terms(const ModelParams& model, const SourceProxy& src,
                     const SwitchProxy& sw, const Sequence& seq) {
  check_shapes(model, src, sw, seq);
  const Dims& dims = model.dims;
  const int T = seq.T();
  const SourceMoments mom = forward_moments(src);
  const SwitchMarginals marg = switch_marginals(sw);

  ElboTerms out;

  // Emission: x (Gamma mu + o + eta) - exp(Gamma mu + o + eta + quad) - log x!
  {
    const MatrixXd lin =
        ((mom.mu * model.emission.Gamma.transpose()).colwise() + seq.offsets).rowwise() +
        model.emission.eta.transpose();
    const MatrixXd rates = log_rates(model, seq, mom).array().exp().matrix();
    double acc = 0.0;
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < dims.K; ++k)
        acc += seq.counts(t, k) * lin(t, k) - rates(t, k) -
               std::lgamma(seq.counts(t, k) + 1.0);
    out.emission = acc;
    check_finite(out.emission, "emission");
  }

  // KL between regime proxy chain and prior chain.
  {
    double acc = 0.0;
    for (int i = 0; i < dims.d; ++i) {
      for (int k = 0; k < dims.C; ++k)
        acc += xlogx_over_y(sw.nu(i, k), model.prior.pi(i, k));
      const MatrixXd& A = model.prior.A[i];
      for (int t = 0; t < T - 1; ++t) {
        const MatrixXd& tau = sw.kernel(t, i);
        for (int k = 0; k < dims.C; ++k)
          for (int l = 0; l < dims.C; ++l)
            acc += marg.alpha[t](i, l) * xlogx_over_y(tau(k, l), A(k, l));
      }
    }
    out.regime_kl = acc;
    check_finite(out.regime_kl, "regime KL");
  }

  // Gaussian chain entropy.
  out.entropy = 0.5 * T * dims.d * kLog2PiE +
                0.5 * src.psi_tilde.array().log().sum();
  check_finite(out.entropy, "entropy");

  // Initial source expectation.
  {
    double acc = 0.0;
    for (int i = 0; i < dims.d; ++i)
      for (int k = 0; k < dims.C; ++k) {
        const double var = model.dynamics.psi_bar(i, k);
        const double diff = mom.mu(0, i) - model.dynamics.b_bar(i, k);
        acc -= 0.5 * marg.alpha[0](i, k) *
               (kLog2Pi + std::log(var) + (mom.sigma(0, i) + diff * diff) / var);
      }
    out.initial = acc;
    check_finite(out.initial, "initial");
  }

  // Transition expectation, with the lag-one cross term through lag1.
  {
    double acc = 0.0;
    for (int t = 1; t < T; ++t)
      for (int i = 0; i < dims.d; ++i) {
        const double Btilde = src.B_tilde(t - 1, i);
        for (int k = 0; k < dims.C; ++k) {
          const double Bk = model.dynamics.B(i, k);
          const double var = model.dynamics.psi(i, k);
          const double diff =
              mom.mu(t, i) - Bk * mom.mu(t - 1, i) - model.dynamics.b(i, k);
          const double quad = diff * diff + mom.sigma(t, i) +
                              Bk * (Bk - 2.0 * Btilde) * mom.sigma(t - 1, i);
          acc -= 0.5 * marg.alpha[t](i, k) * (kLog2Pi + std::log(var) + quad / var);
        }
      }
    out.transition = acc;
    check_finite(out.transition, "transition");
  }

  out.total = out.emission - out.regime_kl + out.entropy + out.initial + out.transition;
  return out;
}

double elbo(const ModelParams& model, const SourceProxy& src, const SwitchProxy& sw,
            const Sequence& seq) {
  return elbo_terms(model, src, sw, seq).total;
}

GradientBundle elbo_grad(const ModelParams& model, const SourceProxy& src,
                         const SwitchProxy& sw, const Sequence& seq) {
  check_shapes(model, src, sw, seq);
  const Dims& dims = model.dims;
  const int T = seq.T();
  const int d = dims.d;
  const SourceMoments mom = forward_moments(src);
  const SwitchMarginals marg = switch_marginals(sw);
  const MatrixXd rates = log_rates(model, seq, mom).array().exp().matrix();
  const MatrixXd& Gamma = model.emission.Gamma;
  const MatrixXd xd = seq.counts.cast<double>();

  GradientBundle g;
  g.d_Gamma.setZero(dims.K, d);
  g.d_eta.setZero(dims.K);
  g.d_m.setZero(d);
  g.d_B_tilde.setZero(T - 1, d);
  g.d_b_tilde.setZero(T - 1, d);
  g.d_zeta.setZero(T, d);

  // Partials of the ELBO with respect to the forward moments, accumulated
  // before backing them through the mu/sigma recursions.
  MatrixXd gmu = (xd - rates) * Gamma;                                     // T x d
  MatrixXd gsigma = -0.5 * rates * Gamma.cwiseProduct(Gamma);              // T x d

  g.d_eta = (xd - rates).colwise().sum().transpose();
  g.d_Gamma = (xd - rates).transpose() * mom.mu -
              ((rates.transpose() * mom.sigma).cwiseProduct(Gamma));

  for (int i = 0; i < d; ++i) {
    for (int k = 0; k < dims.C; ++k) {
      const double a = marg.alpha[0](i, k);
      const double var = model.dynamics.psi_bar(i, k);
      gmu(0, i) -= a * (mom.mu(0, i) - model.dynamics.b_bar(i, k)) / var;
      gsigma(0, i) -= 0.5 * a / var;
    }
    for (int t = 1; t < T; ++t) {
      const double Btilde = src.B_tilde(t - 1, i);
      for (int k = 0; k < dims.C; ++k) {
        const double a = marg.alpha[t](i, k);
        const double Bk = model.dynamics.B(i, k);
        const double var = model.dynamics.psi(i, k);
        const double diff =
            mom.mu(t, i) - Bk * mom.mu(t - 1, i) - model.dynamics.b(i, k);
        gmu(t, i) -= a * diff / var;
        gmu(t - 1, i) += a * Bk * diff / var;
        gsigma(t, i) -= 0.5 * a / var;
        gsigma(t - 1, i) -= 0.5 * a * Bk * (Bk - 2.0 * Btilde) / var;
        g.d_B_tilde(t - 1, i) += a * Bk * mom.sigma(t - 1, i) / var;
      }
    }
  }

  // Reverse pass through mu_t = B~ mu_{t-1} + b~, sigma_t = psi~ + B~^2 sigma_{t-1}.
  for (int t = T - 1; t >= 1; --t)
    for (int i = 0; i < d; ++i) {
      const double Bt = src.B_tilde(t - 1, i);
      g.d_b_tilde(t - 1, i) += gmu(t, i);
      g.d_B_tilde(t - 1, i) +=
          gmu(t, i) * mom.mu(t - 1, i) + gsigma(t, i) * 2.0 * Bt * mom.sigma(t - 1, i);
      g.d_zeta(t, i) = gsigma(t, i);  // d sigma_t / d psi~_t = 1
      gmu(t - 1, i) += Bt * gmu(t, i);
      gsigma(t - 1, i) += Bt * Bt * gsigma(t, i);
    }
  g.d_m = gmu.row(0).transpose();
  g.d_zeta.row(0) = gsigma.row(0);

  // Entropy contributes 1/(2 psi~) in natural space; switch to zeta = log psi~.
  g.d_zeta = ((g.d_zeta.array() + 0.5 / src.psi_tilde.array()) * src.psi_tilde.array())
                 .matrix();

  if (src.mode == ProxyMode::MeanField) g.d_B_tilde.setZero();

  if (!g.d_Gamma.allFinite() || !g.d_eta.allFinite() || !g.d_m.allFinite() ||
      !g.d_B_tilde.allFinite() || !g.d_b_tilde.allFinite() || !g.d_zeta.allFinite())
    throw std::runtime_error("elbo_grad: non-finite gradient");
  return g;
}

}  // namespace countica
