#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drmoe/data.hpp"
#include "drmoe/experts.hpp"
#include "drmoe/losses.hpp"
#include "drmoe/math.hpp"
#include "drmoe/optim.hpp"

namespace drmoe {

/// Which feature experts feed the heads. frozen_only / lora_only pin alpha to 1 / 0.
enum class ExpertMode { fmoe, frozen_only, lora_only };

/// Which classifier heads are trained and used for prediction.
///   full - all three heads fused by the C-MoE weights
///   ce   - head 1 with plain (unweighted) cross-entropy
///   wce  - head 1 with reweighted cross-entropy
///   auc  - head 2 with the pairwise AUC surrogate
///   la   - head 3 with the logit-adjusted loss under SAM
enum class HeadMode { full, ce, wce, auc, la };

std::string to_string(GateMode m);
std::string to_string(ExpertMode m);
std::string to_string(HeadMode m);
GateMode parse_gate_mode(const std::string& s);
ExpertMode parse_expert_mode(const std::string& s);
HeadMode parse_head_mode(const std::string& s);

struct ModelConfig {
  std::size_t d_ctx = 16;
  std::size_t d_seg = 16;
  std::size_t d_out = 64;
  std::size_t lora_rank = 8;
  GateMode gate_mode = GateMode::input_conditioned;
  ExpertMode expert_mode = ExpertMode::fmoe;
  HeadMode head_mode = HeadMode::full;
};

struct DrMoeModel {
  ModelConfig config;
  FrozenExpert frozen;
  LoraExpert lora;
  FMoeGate gate;
  std::array<LinearHead, 3> heads;
  Vec beta_raw;  // C-MoE logits; weights are softmax(beta_raw)

  Vec beta() const { return softmax(beta_raw); }
  bool operator==(const DrMoeModel& o) const;
};

/// W0 ~ N(0, 1/d_ctx), shared by both experts when d_ctx == d_seg (drawn separately otherwise);
/// LoRA A ~ N(0, 1/rank), B = 0; gate zero; heads ~ N(0, 1/d_out) with zero bias; beta_raw = 0.
DrMoeModel make_model(const ModelConfig& cfg, std::mt19937_64& rng);

struct Prediction {
  Vec fused_logits;
  double prob_mistake = 0.5;
  Label label = 0;
  double alpha = 0.0;
  Vec beta;
  std::array<Vec, 3> head_logits;  // head 2 already lifted to [0, s]

  /// Logit margin, monotone in prob_mistake; used for AUC.
  double score() const { return fused_logits[1] - fused_logits[0]; }
  bool operator==(const Prediction&) const = default;
};

/// Feature stage with alpha pinned according to the expert mode.
FMoeForward joint_features(const DrMoeModel& m, std::span<const double> x_ctx, std::span<const double> x_seg);

/// label = 1 iff prob_mistake > threshold.
Prediction forward(const DrMoeModel& m, std::span<const double> x_ctx, std::span<const double> x_seg,
                   double threshold = 0.5);

/// Order-preserving; errors carry the sample index.
std::vector<Prediction> predict_batch(const DrMoeModel& m, std::span<const Sample> samples, double threshold = 0.5);

/// Gradients for every trainable tensor.
struct ModelGrads {
  ExpertGrads experts;
  std::array<HeadGrads, 3> heads;
  Vec beta_raw;

  static ModelGrads zeros_like(const DrMoeModel& m);
};

/// Loss settings fixed for a training run.
struct LossSettings {
  std::array<double, 2> class_weights{1.0, 1.0};
  ClassFreq freq{0.5, 0.5};
  SurrogateKind surrogate;
};

struct PhaseALosses {
  double wce = 0.0;
  double auc = 0.0;
  double la = 0.0;
  double total() const { return wce + auc + la; }
};

/// Stage-2 training objective over a batch: the losses active for the head mode, summed with
/// unit weights. Adds gradients into `grads` when given.
PhaseALosses phase_a_loss(const DrMoeModel& m, std::span<const Sample* const> batch,
                          const LossSettings& settings, ModelGrads* grads);

/// Plain cross-entropy of the fused logits; gradient only for beta_raw.
double fusion_loss(const DrMoeModel& m, std::span<const Sample* const> batch, ModelGrads* grads);

/// Head-3 objective with fixed joint features, over flat head-3 parameters [W, bias].
LossAndGrad la_head_objective(const LinearHead& head3, std::span<const double> params,
                              const std::vector<Vec>& joints, std::span<const Label> labels,
                              const ClassFreq& freq);

// Flat packing, groups in order: shared (A, B, gate g, gate bias), head1, head2, head3, beta_raw.
enum class ParamGroup { shared, head1, head2, head3, fusion };
constexpr std::array<ParamGroup, 5> kParamGroups{ParamGroup::shared, ParamGroup::head1, ParamGroup::head2,
                                                 ParamGroup::head3, ParamGroup::fusion};
std::string to_string(ParamGroup g);

Vec pack(const DrMoeModel& m, ParamGroup g);
Vec pack(const ModelGrads& grads, ParamGroup g);
void unpack(DrMoeModel& m, ParamGroup g, std::span<const double> values);

Vec pack_all(const DrMoeModel& m);
Vec pack_all(const ModelGrads& grads);
void unpack_all(DrMoeModel& m, std::span<const double> values);

}  // namespace drmoe
