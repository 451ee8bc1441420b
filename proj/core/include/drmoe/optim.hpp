#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "drmoe/math.hpp"

namespace drmoe {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

/// Moment accumulators for one flat parameter group.
struct AdamState {
  std::string group;
  AdamConfig config;
  Vec m;
  Vec v;
  std::int64_t t = 0;

  AdamState() = default;
  AdamState(std::string group_name, AdamConfig cfg, std::size_t size)
      : group(std::move(group_name)), config(cfg), m(size, 0.0), v(size, 0.0) {}

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update of `params` in place.
/// Throws RuntimeError naming the group if any gradient is non-finite.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

struct SamConfig {
  double rho = 0.05;
  bool enabled = true;
};

struct LossAndGrad {
  double loss = 0.0;
  Vec grad;
};

using LossGradFn = std::function<LossAndGrad(std::span<const double>)>;

struct SamStepInfo {
  double loss = 0.0;  // at the unperturbed point
  Vec grad;           // at the unperturbed point
  Vec epsilon;
  Vec grad_adv;       // at the perturbed point; this is what Adam consumes
};

/// Sharpness-aware step: grad g at theta, eps = rho g / ||g||, grad at theta + eps,
/// then Adam applied at the original theta with the perturbed-point gradient.
/// With rho = 0 (or disabled) this is exactly adam_step with g.
SamStepInfo sam_step(const SamConfig& cfg, AdamState& state, std::span<double> params,
                     const LossGradFn& loss_and_grad);

}  // namespace drmoe
