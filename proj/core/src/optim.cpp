#include "drmoe/optim.hpp"

#include <cmath>

#include "drmoe/error.hpp"

namespace drmoe {

namespace {
constexpr double kDegenerateGradNorm = 1e-12;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw ValidationError("adam_step[" + state.group + "]: " + std::to_string(params.size()) +
                          " params, " + std::to_string(grads.size()) + " grads, state of " +
                          std::to_string(state.m.size()));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw RuntimeError("adam_step[" + state.group + "]: non-finite gradient at index " +
                         std::to_string(i));
    }
  }
  const AdamConfig& c = state.config;
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

SamStepInfo sam_step(const SamConfig& cfg, AdamState& state, std::span<double> params,
                     const LossGradFn& loss_and_grad) {
  if (cfg.rho < 0.0) throw ValidationError("sam_step: rho must be non-negative");
  SamStepInfo info;
  LossAndGrad at_theta = loss_and_grad(params);
  info.loss = at_theta.loss;
  info.grad = std::move(at_theta.grad);
  info.epsilon.assign(params.size(), 0.0);

  const double gnorm = norm2(info.grad);
  if (!cfg.enabled || cfg.rho == 0.0 || gnorm < kDegenerateGradNorm) {
    info.grad_adv = info.grad;
    adam_step(state, params, info.grad_adv);
    return info;
  }

  Vec perturbed(params.begin(), params.end());
  for (std::size_t i = 0; i < perturbed.size(); ++i) {
    info.epsilon[i] = cfg.rho * info.grad[i] / gnorm;
    perturbed[i] += info.epsilon[i];
  }
  LossAndGrad at_adv = loss_and_grad(perturbed);
  if (!std::isfinite(at_adv.loss)) {
    throw RuntimeError("sam_step[" + state.group + "]: non-finite loss at perturbed point");
  }
  info.grad_adv = std::move(at_adv.grad);
  adam_step(state, params, info.grad_adv);
  return info;
}

}  // namespace drmoe
