#pragma once

#include "countica/proxy.hpp"
#include "countica/types.hpp"

namespace countica {

/// Closed-form ELBO split by term. total = emission - regime_kl + entropy +
/// initial + transition.
struct ElboTerms {
  double emission = 0.0;
  double regime_kl = 0.0;
  double entropy = 0.0;
  double initial = 0.0;
  double transition = 0.0;
  double total = 0.0;
};

ElboTerms elbo_terms(const ModelParams& model, const SourceProxy& src,
                     const SwitchProxy& sw, const Sequence& seq);

/// Per-sequence closed-form ELBO. Offsets and fixed effects enter the
/// emission term additively in the log-intensity.
double elbo(const ModelParams& model, const SourceProxy& src, const SwitchProxy& sw,
            const Sequence& seq);

/// Exact ELBO gradients with respect to Gamma, eta and the free source-proxy
/// parameters. psi_tilde is differentiated through its log reparameterization
/// (d_zeta = d/d log psi_tilde); the regime proxy is held constant, as it is
/// refreshed by CAVI. In MeanField mode d_B_tilde is identically zero.
struct GradientBundle {
  MatrixXd d_Gamma;    // K x d
  VectorXd d_eta;      // K
  VectorXd d_m;        // d
  MatrixXd d_B_tilde;  // (T-1) x d
  MatrixXd d_b_tilde;  // (T-1) x d
  MatrixXd d_zeta;     // T x d
};

GradientBundle elbo_grad(const ModelParams& model, const SourceProxy& src,
                         const SwitchProxy& sw, const Sequence& seq);

}  // namespace countica
