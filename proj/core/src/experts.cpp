#include "drmoe/experts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drmoe/error.hpp"

namespace drmoe {

namespace {

Mat gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

}  // namespace

FrozenExpert make_frozen_expert(std::size_t d_out, std::size_t d_in, std::mt19937_64& rng) {
  if (d_out == 0 || d_in == 0) throw ValidationError("frozen expert: dimensions must be positive");
  return {gaussian(d_out, d_in, 1.0 / std::sqrt(static_cast<double>(d_in)), rng)};
}

LoraExpert make_lora_expert(const Mat& w0, std::size_t rank, std::mt19937_64& rng) {
  LoraExpert e;
  e.w0 = w0;
  e.a = gaussian(rank, w0.cols(), 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(rank, 1))), rng);
  e.b = Mat(w0.rows(), rank);
  validate(e);
  return e;
}

FMoeGate make_gate(std::size_t d_ctx, std::size_t d_seg, GateMode mode) {
  return {Vec(d_ctx + d_seg, 0.0), 0.0, mode};
}

void validate(const LoraExpert& e) {
  const std::size_t r = e.a.rows();
  if (r < 1 || r > std::min(e.w0.rows(), e.w0.cols())) {
    throw ValidationError("lora expert: rank " + std::to_string(r) + " outside [1, " +
                          std::to_string(std::min(e.w0.rows(), e.w0.cols())) + "]");
  }
  if (e.a.cols() != e.w0.cols() || e.b.rows() != e.w0.rows() || e.b.cols() != r) {
    throw ValidationError("lora expert: inconsistent shapes W0 " + e.w0.shape() + ", A " +
                          e.a.shape() + ", B " + e.b.shape());
  }
}

Vec frozen_forward(const FrozenExpert& e, std::span<const double> x_ctx) {
  return matvec(e.w0, x_ctx);
}

Vec lora_forward(const LoraExpert& e, std::span<const double> x_seg) {
  Vec y = matvec(e.w0, x_seg);
  const Vec ax = matvec(e.a, x_seg);
  axpy(1.0, matvec(e.b, ax), y);
  return y;
}

namespace {

// sigmoid rounds to exactly 0 or 1 for large |z|; keep alpha strictly inside (0, 1).
double open_unit(double a) {
  return std::clamp(a, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

}  // namespace

double gate_alpha(const FMoeGate& gate, std::span<const double> x_ctx, std::span<const double> x_seg) {
  if (gate.mode == GateMode::scalar) return open_unit(sigmoid(gate.bias));
  if (gate.g.size() != x_ctx.size() + x_seg.size()) {
    throw ValidationError("gate: weight length " + std::to_string(gate.g.size()) +
                          " vs inputs " + std::to_string(x_ctx.size()) + "+" +
                          std::to_string(x_seg.size()));
  }
  const std::span<const double> g(gate.g);
  const double z = dot(g.first(x_ctx.size()), x_ctx) + dot(g.subspan(x_ctx.size()), x_seg) + gate.bias;
  return open_unit(sigmoid(z));
}

FMoeForward fmoe_forward(const FrozenExpert& frozen, const LoraExpert& lora, const FMoeGate& gate,
                         std::span<const double> x_ctx, std::span<const double> x_seg) {
  FMoeForward f;
  f.frozen_out = frozen_forward(frozen, x_ctx);
  f.a_x = matvec(lora.a, x_seg);
  f.lora_out = matvec(lora.w0, x_seg);
  axpy(1.0, matvec(lora.b, f.a_x), f.lora_out);
  if (f.frozen_out.size() != f.lora_out.size()) {
    throw ValidationError("fmoe: expert output widths differ (" + std::to_string(f.frozen_out.size()) +
                          " vs " + std::to_string(f.lora_out.size()) + ")");
  }
  f.alpha = gate_alpha(gate, x_ctx, x_seg);
  f.joint.resize(f.frozen_out.size());
  for (std::size_t i = 0; i < f.joint.size(); ++i) {
    f.joint[i] = f.alpha * f.frozen_out[i] + (1.0 - f.alpha) * f.lora_out[i];
  }
  return f;
}

ExpertGrads ExpertGrads::zeros_like(const LoraExpert& lora, const FMoeGate& gate) {
  return {Mat(lora.a.rows(), lora.a.cols()), Mat(lora.b.rows(), lora.b.cols()),
          Vec(gate.g.size(), 0.0), 0.0};
}

void ExpertGrads::add(const ExpertGrads& other, double scale) {
  axpy(scale, other.a.values(), a.values());
  axpy(scale, other.b.values(), b.values());
  axpy(scale, other.g, g);
  bias += scale * other.bias;
}

void fmoe_backward(const LoraExpert& lora, const FMoeGate& gate, std::span<const double> x_ctx,
                   std::span<const double> x_seg, const FMoeForward& fwd,
                   std::span<const double> upstream, ExpertGrads& grads) {
  if (upstream.size() != fwd.joint.size()) {
    throw ValidationError("fmoe_backward: upstream length " + std::to_string(upstream.size()) +
                          " vs joint width " + std::to_string(fwd.joint.size()));
  }
  // d joint / d alpha = frozen_out - lora_out; d alpha / d z = alpha (1 - alpha)
  double d_alpha = 0.0;
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    d_alpha += upstream[i] * (fwd.frozen_out[i] - fwd.lora_out[i]);
  }
  const double d_z = d_alpha * fwd.alpha * (1.0 - fwd.alpha);
  grads.bias += d_z;
  if (gate.mode == GateMode::input_conditioned) {
    std::span<double> g(grads.g);
    axpy(d_z, x_ctx, g.first(x_ctx.size()));
    axpy(d_z, x_seg, g.subspan(x_ctx.size()));
  }

  // lora branch: u = (1 - alpha) * upstream; dB = u (A x)^T; dA = (B^T u) x^T
  const double w = 1.0 - fwd.alpha;
  if (w == 0.0) return;
  Vec u(upstream.begin(), upstream.end());
  for (double& v : u) v *= w;
  add_outer(grads.b, u, fwd.a_x);
  add_outer(grads.a, matvec_transposed(lora.b, u), x_seg);
}

}  // namespace drmoe
