#pragma once

#include <Eigen/Dense>

namespace countica {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;    // decoupled, applied directly to the params
  double clip_norm = 0.0;       // 0 disables global-norm clipping
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  static AdamState zero(Eigen::Index n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
  }
};

/// One minimization step: global-norm clip, decoupled weight decay, then the
/// bias-corrected first/second-moment update. Params move against the
/// gradient. To maximize, pass the negated gradient.
Eigen::VectorXd adam_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                          AdamState& state, const AdamConfig& config);

}  // namespace countica
