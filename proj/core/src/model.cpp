#include "drmoe/model.hpp"

#include <algorithm>
#include <cmath>

#include "drmoe/error.hpp"

namespace drmoe {

std::string to_string(GateMode m) { return m == GateMode::scalar ? "scalar" : "input_conditioned"; }

std::string to_string(ExpertMode m) {
  switch (m) {
    case ExpertMode::fmoe: return "fmoe";
    case ExpertMode::frozen_only: return "frozen";
    case ExpertMode::lora_only: return "lora";
  }
  return "unknown";
}

std::string to_string(HeadMode m) {
  switch (m) {
    case HeadMode::full: return "full";
    case HeadMode::ce: return "ce";
    case HeadMode::wce: return "wce";
    case HeadMode::auc: return "auc";
    case HeadMode::la: return "la";
  }
  return "unknown";
}

GateMode parse_gate_mode(const std::string& s) {
  if (s == "scalar") return GateMode::scalar;
  if (s == "input_conditioned") return GateMode::input_conditioned;
  throw ValidationError("gate_mode: expected scalar or input_conditioned, got '" + s + "'");
}

ExpertMode parse_expert_mode(const std::string& s) {
  if (s == "fmoe") return ExpertMode::fmoe;
  if (s == "frozen") return ExpertMode::frozen_only;
  if (s == "lora") return ExpertMode::lora_only;
  throw ValidationError("expert_mode: expected fmoe, frozen or lora, got '" + s + "'");
}

HeadMode parse_head_mode(const std::string& s) {
  if (s == "full") return HeadMode::full;
  if (s == "ce") return HeadMode::ce;
  if (s == "wce") return HeadMode::wce;
  if (s == "auc") return HeadMode::auc;
  if (s == "la") return HeadMode::la;
  throw ValidationError("head_mode: expected full, ce, wce, auc or la, got '" + s + "'");
}

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::shared: return "shared";
    case ParamGroup::head1: return "head1";
    case ParamGroup::head2: return "head2";
    case ParamGroup::head3: return "head3";
    case ParamGroup::fusion: return "fusion";
  }
  return "unknown";
}

bool DrMoeModel::operator==(const DrMoeModel& o) const {
  auto heads_equal = [](const LinearHead& a, const LinearHead& b) {
    return a.id == b.id && a.w == b.w && a.bias == b.bias;
  };
  return frozen.w0 == o.frozen.w0 && lora.w0 == o.lora.w0 && lora.a == o.lora.a && lora.b == o.lora.b &&
         gate.g == o.gate.g && gate.bias == o.gate.bias && gate.mode == o.gate.mode &&
         heads_equal(heads[0], o.heads[0]) && heads_equal(heads[1], o.heads[1]) &&
         heads_equal(heads[2], o.heads[2]) && beta_raw == o.beta_raw;
}

DrMoeModel make_model(const ModelConfig& cfg, std::mt19937_64& rng) {
  if (cfg.d_ctx == 0 || cfg.d_seg == 0 || cfg.d_out == 0) {
    throw ValidationError("model: dimensions must be positive");
  }
  DrMoeModel m;
  m.config = cfg;
  m.frozen = make_frozen_expert(cfg.d_out, cfg.d_ctx, rng);
  const Mat lora_w0 =
      cfg.d_ctx == cfg.d_seg ? m.frozen.w0 : make_frozen_expert(cfg.d_out, cfg.d_seg, rng).w0;
  if (cfg.lora_rank < 1 || cfg.lora_rank > std::min(cfg.d_out, cfg.d_seg)) {
    throw ValidationError("lora_rank: must lie in [1, " + std::to_string(std::min(cfg.d_out, cfg.d_seg)) +
                          "], got " + std::to_string(cfg.lora_rank));
  }
  m.lora = make_lora_expert(lora_w0, cfg.lora_rank, rng);
  m.gate = make_gate(cfg.d_ctx, cfg.d_seg, cfg.gate_mode);
  m.heads = {make_head(HeadId::reweighted_ce, cfg.d_out, rng), make_head(HeadId::auc, cfg.d_out, rng),
             make_head(HeadId::logit_adjusted, cfg.d_out, rng)};
  m.beta_raw = Vec(3, 0.0);
  return m;
}

FMoeForward joint_features(const DrMoeModel& m, std::span<const double> x_ctx, std::span<const double> x_seg) {
  FMoeForward f = fmoe_forward(m.frozen, m.lora, m.gate, x_ctx, x_seg);
  if (m.config.expert_mode == ExpertMode::fmoe) return f;
  f.alpha = m.config.expert_mode == ExpertMode::frozen_only ? 1.0 : 0.0;
  f.joint = m.config.expert_mode == ExpertMode::frozen_only ? f.frozen_out : f.lora_out;
  return f;
}

namespace {

Vec lift_score(double s) { return {0.0, s}; }

// Per-head logits for one joint feature, head 2 lifted.
std::array<Vec, 3> all_head_logits(const DrMoeModel& m, std::span<const double> joint) {
  return {head_forward(m.heads[0], joint), lift_score(head_forward(m.heads[1], joint)[0]),
          head_forward(m.heads[2], joint)};
}

Vec fuse(const DrMoeModel& m, const std::array<Vec, 3>& logits, const Vec& beta) {
  switch (m.config.head_mode) {
    case HeadMode::ce:
    case HeadMode::wce: return logits[0];
    case HeadMode::auc: return logits[1];
    case HeadMode::la: return logits[2];
    case HeadMode::full: break;
  }
  Vec fused(2, 0.0);
  for (std::size_t k = 0; k < 3; ++k) axpy(beta[k], logits[k], fused);
  return fused;
}

}  // namespace

Prediction forward(const DrMoeModel& m, std::span<const double> x_ctx, std::span<const double> x_seg,
                   double threshold) {
  const FMoeForward f = joint_features(m, x_ctx, x_seg);
  Prediction p;
  p.alpha = f.alpha;
  p.beta = m.beta();
  p.head_logits = all_head_logits(m, f.joint);
  p.fused_logits = fuse(m, p.head_logits, p.beta);
  p.prob_mistake = softmax(p.fused_logits)[1];
  p.label = p.prob_mistake > threshold ? 1 : 0;
  return p;
}

std::vector<Prediction> predict_batch(const DrMoeModel& m, std::span<const Sample> samples, double threshold) {
  std::vector<Prediction> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    try {
      out.push_back(forward(m, samples[i].ctx, samples[i].seg, threshold));
    } catch (const ValidationError& e) {
      throw ValidationError("sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

ModelGrads ModelGrads::zeros_like(const DrMoeModel& m) {
  return {ExpertGrads::zeros_like(m.lora, m.gate),
          {HeadGrads::zeros_like(m.heads[0]), HeadGrads::zeros_like(m.heads[1]),
           HeadGrads::zeros_like(m.heads[2])},
          Vec(m.beta_raw.size(), 0.0)};
}

PhaseALosses phase_a_loss(const DrMoeModel& m, std::span<const Sample* const> batch,
                          const LossSettings& settings, ModelGrads* grads) {
  const std::size_t n = batch.size();
  if (n == 0) throw ValidationError("phase_a_loss: empty batch");
  const HeadMode mode = m.config.head_mode;
  const bool use_h1 = mode == HeadMode::full || mode == HeadMode::ce || mode == HeadMode::wce;
  const bool use_h2 = mode == HeadMode::full || mode == HeadMode::auc;
  const bool use_h3 = mode == HeadMode::full || mode == HeadMode::la;

  std::vector<FMoeForward> fwd;
  fwd.reserve(n);
  std::vector<Label> labels(n);
  Mat logits1(n, 2), logits3(n, 2);
  Vec scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    fwd.push_back(joint_features(m, batch[i]->ctx, batch[i]->seg));
    labels[i] = batch[i]->label;
    if (use_h1) {
      const Vec z = head_forward(m.heads[0], fwd[i].joint);
      logits1(i, 0) = z[0];
      logits1(i, 1) = z[1];
    }
    if (use_h2) scores[i] = head_forward(m.heads[1], fwd[i].joint)[0];
    if (use_h3) {
      const Vec z = head_forward(m.heads[2], fwd[i].joint);
      logits3(i, 0) = z[0];
      logits3(i, 1) = z[1];
    }
  }

  PhaseALosses losses;
  LossGrad g1, g3;
  if (use_h1) {
    g1 = mode == HeadMode::ce ? ce_loss(logits1, labels)
                              : weighted_ce_loss(logits1, labels, settings.class_weights);
    losses.wce = g1.loss;
  }
  Vec d_scores(n, 0.0);
  if (use_h2) {
    Vec pos, neg;
    std::vector<std::size_t> pos_idx, neg_idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == 1) {
        pos.push_back(scores[i]);
        pos_idx.push_back(i);
      } else {
        neg.push_back(scores[i]);
        neg_idx.push_back(i);
      }
    }
    const AucLossGrad a = auc_loss(pos, neg, settings.surrogate);
    losses.auc = a.loss;
    for (std::size_t k = 0; k < pos_idx.size(); ++k) d_scores[pos_idx[k]] = a.grad_pos[k];
    for (std::size_t k = 0; k < neg_idx.size(); ++k) d_scores[neg_idx[k]] = a.grad_neg[k];
  }
  if (use_h3) {
    g3 = la_loss(logits3, labels, settings.freq);
    losses.la = g3.loss;
  }
  if (grads == nullptr) return losses;

  for (std::size_t i = 0; i < n; ++i) {
    const Vec& joint = fwd[i].joint;
    Vec upstream(joint.size(), 0.0);
    if (use_h1) axpy(1.0, head_backward(m.heads[0], joint, g1.grad.row(i), grads->heads[0]), upstream);
    if (use_h2) {
      const double ds = d_scores[i];
      axpy(1.0, head_backward(m.heads[1], joint, std::span<const double>(&ds, 1), grads->heads[1]), upstream);
    }
    if (use_h3) axpy(1.0, head_backward(m.heads[2], joint, g3.grad.row(i), grads->heads[2]), upstream);
    fmoe_backward(m.lora, m.gate, batch[i]->ctx, batch[i]->seg, fwd[i], upstream, grads->experts);
  }
  return losses;
}

double fusion_loss(const DrMoeModel& m, std::span<const Sample* const> batch, ModelGrads* grads) {
  const std::size_t n = batch.size();
  if (n == 0) throw ValidationError("fusion_loss: empty batch");
  const Vec beta = m.beta();
  std::vector<std::array<Vec, 3>> per_head;
  per_head.reserve(n);
  Mat fused(n, 2);
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FMoeForward f = joint_features(m, batch[i]->ctx, batch[i]->seg);
    per_head.push_back(all_head_logits(m, f.joint));
    Vec z(2, 0.0);
    for (std::size_t k = 0; k < 3; ++k) axpy(beta[k], per_head[i][k], z);
    fused(i, 0) = z[0];
    fused(i, 1) = z[1];
    labels[i] = batch[i]->label;
  }
  const LossGrad lg = ce_loss(fused, labels);
  if (grads != nullptr) {
    // dL/dbeta_k = sum_i <dL/dfused_i, logits_ik>; then through softmax.
    Vec d_beta(3, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < 3; ++k) d_beta[k] += dot(lg.grad.row(i), per_head[i][k]);
    }
    const double mean = dot(beta, d_beta);
    for (std::size_t k = 0; k < 3; ++k) grads->beta_raw[k] += beta[k] * (d_beta[k] - mean);
  }
  return lg.loss;
}

LossAndGrad la_head_objective(const LinearHead& head3, std::span<const double> params,
                              const std::vector<Vec>& joints, std::span<const Label> labels,
                              const ClassFreq& freq) {
  LinearHead h = head3;
  const std::size_t nw = h.w.size();
  if (params.size() != nw + h.bias.size()) throw ValidationError("la_head_objective: parameter length mismatch");
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(nw), h.w.values().begin());
  std::copy(params.begin() + static_cast<std::ptrdiff_t>(nw), params.end(), h.bias.begin());

  const std::size_t n = joints.size();
  Mat logits(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec z = head_forward(h, joints[i]);
    logits(i, 0) = z[0];
    logits(i, 1) = z[1];
  }
  const LossGrad lg = la_loss(logits, labels, freq);
  HeadGrads g = HeadGrads::zeros_like(h);
  for (std::size_t i = 0; i < n; ++i) {
    add_outer(g.w, lg.grad.row(i), joints[i]);
    axpy(1.0, lg.grad.row(i), g.bias);
  }
  LossAndGrad out{lg.loss, {}};
  out.grad.assign(g.w.values().begin(), g.w.values().end());
  out.grad.insert(out.grad.end(), g.bias.begin(), g.bias.end());
  return out;
}

namespace {

void append(Vec& out, std::span<const double> v) { out.insert(out.end(), v.begin(), v.end()); }

// Copies the next v.size() values from `src` at `pos`.
void take(std::span<const double> src, std::size_t& pos, std::span<double> v) {
  if (pos + v.size() > src.size()) throw ValidationError("unpack: too few values");
  std::copy(src.begin() + static_cast<std::ptrdiff_t>(pos),
            src.begin() + static_cast<std::ptrdiff_t>(pos + v.size()), v.begin());
  pos += v.size();
}

std::size_t head_index(ParamGroup g) {
  return g == ParamGroup::head1 ? 0 : g == ParamGroup::head2 ? 1 : 2;
}

}  // namespace

Vec pack(const DrMoeModel& m, ParamGroup g) {
  Vec out;
  switch (g) {
    case ParamGroup::shared:
      append(out, m.lora.a.values());
      append(out, m.lora.b.values());
      append(out, m.gate.g);
      out.push_back(m.gate.bias);
      break;
    case ParamGroup::head1:
    case ParamGroup::head2:
    case ParamGroup::head3: {
      const LinearHead& h = m.heads[head_index(g)];
      append(out, h.w.values());
      append(out, h.bias);
      break;
    }
    case ParamGroup::fusion: append(out, m.beta_raw); break;
  }
  return out;
}

Vec pack(const ModelGrads& grads, ParamGroup g) {
  Vec out;
  switch (g) {
    case ParamGroup::shared:
      append(out, grads.experts.a.values());
      append(out, grads.experts.b.values());
      append(out, grads.experts.g);
      out.push_back(grads.experts.bias);
      break;
    case ParamGroup::head1:
    case ParamGroup::head2:
    case ParamGroup::head3: {
      const HeadGrads& h = grads.heads[head_index(g)];
      append(out, h.w.values());
      append(out, h.bias);
      break;
    }
    case ParamGroup::fusion: append(out, grads.beta_raw); break;
  }
  return out;
}

void unpack(DrMoeModel& m, ParamGroup g, std::span<const double> values) {
  std::size_t pos = 0;
  switch (g) {
    case ParamGroup::shared:
      take(values, pos, m.lora.a.values());
      take(values, pos, m.lora.b.values());
      take(values, pos, m.gate.g);
      take(values, pos, std::span<double>(&m.gate.bias, 1));
      break;
    case ParamGroup::head1:
    case ParamGroup::head2:
    case ParamGroup::head3: {
      LinearHead& h = m.heads[head_index(g)];
      take(values, pos, h.w.values());
      take(values, pos, h.bias);
      break;
    }
    case ParamGroup::fusion: take(values, pos, m.beta_raw); break;
  }
  if (pos != values.size()) {
    throw ValidationError("unpack(" + to_string(g) + "): " + std::to_string(values.size()) +
                          " values for " + std::to_string(pos) + " parameters");
  }
}

Vec pack_all(const DrMoeModel& m) {
  Vec out;
  for (ParamGroup g : kParamGroups) append(out, pack(m, g));
  return out;
}

Vec pack_all(const ModelGrads& grads) {
  Vec out;
  for (ParamGroup g : kParamGroups) append(out, pack(grads, g));
  return out;
}

void unpack_all(DrMoeModel& m, std::span<const double> values) {
  std::size_t pos = 0;
  for (ParamGroup g : kParamGroups) {
    const std::size_t len = pack(m, g).size();
    if (pos + len > values.size()) throw ValidationError("unpack_all: too few values");
    unpack(m, g, values.subspan(pos, len));
    pos += len;
  }
  if (pos != values.size()) throw ValidationError("unpack_all: too many values");
}

}  // namespace drmoe
