#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "drmoe/data.hpp"
#include "drmoe/metrics.hpp"
#include "drmoe/model.hpp"
#include "drmoe/optim.hpp"

namespace drmoe {

struct TrainConfig {
  AdamConfig adam;
  SamConfig sam;
  std::size_t batch = 128;
  std::size_t epochs = 10;      // phase A: experts and heads
  std::size_t fuse_epochs = 5;  // phase B: C-MoE weights only (full head mode)
  WeightNorm weight_norm = WeightNorm::mean_one;
  SurrogateKind surrogate;
  double threshold = 0.5;

  /// Phase-A epochs plus phase-B epochs when the heads are fused.
  std::size_t total_epochs(HeadMode mode) const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  char phase = 'A';
  std::size_t steps = 0;
  double loss_wce = 0.0;  // batch means
  double loss_auc = 0.0;
  double loss_la = 0.0;
  double loss_total = 0.0;
  double loss_fuse = 0.0;
  double mean_alpha = 0.0;  // over the training set after the epoch
  Vec beta;
  std::optional<MetricsReport> val;

  bool operator==(const EpochRecord&) const = default;
};

/// Everything needed to continue training bit-for-bit.
struct TrainState {
  DrMoeModel model;
  std::array<AdamState, 5> optimizers;  // indexed by ParamGroup
  std::mt19937_64 rng;
  std::size_t epoch = 0;  // completed epochs
  std::vector<EpochRecord> history;

  AdamState& optimizer(ParamGroup g) { return optimizers[static_cast<std::size_t>(g)]; }
};

/// Builds the model from `seed` and fresh optimizer state.
TrainState init_training(const ModelConfig& model_cfg, const TrainConfig& cfg, std::uint64_t seed);

/// Stratified minibatches covering every sample once; when a class has fewer samples than there
/// are batches, batches lacking it receive one randomly drawn extra sample of that class.
std::vector<std::vector<std::size_t>> stratified_batches(const Dataset& data, std::size_t batch_size,
                                                         std::mt19937_64& rng);

/// Loss settings derived from the training labels. Throws if a class is absent.
LossSettings loss_settings(const Dataset& train, const TrainConfig& cfg);

/// Runs epochs until `state.epoch == stop_epoch` (clamped to the schedule length).
void train_until(TrainState& state, const Dataset& train, const TrainConfig& cfg, std::size_t stop_epoch,
                 const Dataset* val = nullptr);

/// Full schedule from initialization.
TrainState train(const ModelConfig& model_cfg, const TrainConfig& cfg, std::uint64_t seed, const Dataset& train,
                 const Dataset* val = nullptr);

/// Predictions, confusion, P/R/F and AUC of the model's fused score on `data`.
MetricsReport evaluate(const DrMoeModel& m, const Dataset& data, double threshold = 0.5);

}  // namespace drmoe
