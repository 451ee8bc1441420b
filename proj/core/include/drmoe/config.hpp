#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "drmoe/model.hpp"
#include "drmoe/trainer.hpp"

namespace drmoe {

/// Flat run configuration, one JSON document. Defaults: Adam lr 1e-5, SAM radius 0.05,
/// LoRA rank 8, batch 128, 10 epochs.
struct RunConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double rho = 0.05;
  bool sam_enabled = true;
  std::size_t lora_rank = 8;
  std::size_t batch = 128;
  std::size_t epochs = 10;
  std::size_t fuse_epochs = 5;
  std::size_t d_ctx = 16;
  std::size_t d_seg = 16;
  std::size_t d_out = 64;
  std::string gate_mode = "input_conditioned";
  std::string expert_mode = "fmoe";
  std::string head_mode = "full";
  std::string surrogate = "squared_hinge";
  double margin = 1.0;
  std::string weight_norm = "mean_one";
  std::uint64_t seed = 0;
  double threshold = 0.5;

  /// Throws ValidationError naming the first bad field.
  void validate() const;

  ModelConfig model_config() const;
  TrainConfig train_config() const;

  bool operator==(const RunConfig&) const = default;
};

nlohmann::ordered_json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys and wrongly typed values are rejected.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Sets one field from its textual form, as given on the command line.
void set_config_field(RunConfig& c, const std::string& key, const std::string& value);

}  // namespace drmoe
