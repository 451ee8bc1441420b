#pragma once

#include <cstddef>
#include <random>
#include <span>

#include "drmoe/math.hpp"

namespace drmoe {

/// Fixed linear feature map W0 * x over the context view.
struct FrozenExpert {
  Mat w0;  // d_out x d_ctx, never updated
};

/// Low-rank adapted feature map (W0 + B A) x over the segment view.
///
/// W0 is frozen. A (rank x d_in) starts Gaussian with std 1/sqrt(rank), B (d_out x rank)
/// starts at zero so the adapted map initially equals W0.
struct LoraExpert {
  Mat w0;
  Mat a;
  Mat b;

  std::size_t rank() const { return a.rows(); }
};

enum class GateMode { scalar, input_conditioned };

/// Sigmoid gate producing the frozen-expert weight alpha in (0, 1).
/// In scalar mode only the bias is used.
struct FMoeGate {
  Vec g;  // length d_ctx + d_seg
  double bias = 0.0;
  GateMode mode = GateMode::input_conditioned;
};

FrozenExpert make_frozen_expert(std::size_t d_out, std::size_t d_in, std::mt19937_64& rng);
/// Copies W0 and draws A; B starts at zero.
LoraExpert make_lora_expert(const Mat& w0, std::size_t rank, std::mt19937_64& rng);
FMoeGate make_gate(std::size_t d_ctx, std::size_t d_seg, GateMode mode);

void validate(const LoraExpert& e);

Vec frozen_forward(const FrozenExpert& e, std::span<const double> x_ctx);
/// W0 x + B (A x); B A is never formed.
Vec lora_forward(const LoraExpert& e, std::span<const double> x_seg);
double gate_alpha(const FMoeGate& gate, std::span<const double> x_ctx, std::span<const double> x_seg);

/// Forward values kept for the backward pass.
struct FMoeForward {
  Vec joint;
  double alpha = 0.0;
  Vec frozen_out;
  Vec lora_out;
  Vec a_x;  // A * x_seg
};

/// joint = alpha * frozen(x_ctx) + (1 - alpha) * lora(x_seg).
FMoeForward fmoe_forward(const FrozenExpert& frozen, const LoraExpert& lora, const FMoeGate& gate,
                         std::span<const double> x_ctx, std::span<const double> x_seg);

/// Gradients of the trainable expert-stage parameters. W0 has none.
struct ExpertGrads {
  Mat a;
  Mat b;
  Vec g;
  double bias = 0.0;

  static ExpertGrads zeros_like(const LoraExpert& lora, const FMoeGate& gate);
  void add(const ExpertGrads& other, double scale = 1.0);
};

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(joint).
void fmoe_backward(const LoraExpert& lora, const FMoeGate& gate, std::span<const double> x_ctx,
                   std::span<const double> x_seg, const FMoeForward& fwd,
                   std::span<const double> upstream, ExpertGrads& grads);

}  // namespace drmoe
