#include "countica/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace countica {

Eigen::VectorXd adam_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                          AdamState& state, const AdamConfig& config) {
  if (params.size() != grad.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");

  Eigen::VectorXd g = grad;
  if (config.clip_norm > 0.0) {
    const double norm = g.norm();
    if (norm > config.clip_norm) g *= config.clip_norm / norm;
  }

  Eigen::VectorXd out = params;
  if (config.weight_decay != 0.0)
    out -= config.learning_rate * config.weight_decay * params;

  ++state.step;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * g;
  state.v = config.beta2 * state.v.array().matrix() +
            (1.0 - config.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  out.array() -= config.learning_rate * (state.m.array() / bc1) /
                 ((state.v.array() / bc2).sqrt() + config.eps);
  return out;
}

}  // namespace countica
