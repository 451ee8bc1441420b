#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "drmoe/config.hpp"
#include "drmoe/trainer.hpp"

namespace drmoe {

inline constexpr int kFormatVersion = 1;

/// Config snapshot plus the complete training state. `created_at` is the only
/// non-deterministic field and lives under "metadata".
struct Checkpoint {
  RunConfig config;
  TrainState state;
  std::string created_at;
};

nlohmann::ordered_json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

std::string serialize_checkpoint(const Checkpoint& c);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// One JSON object per epoch, one per line.
std::string serialize_history(const std::vector<EpochRecord>& history);

/// Current UTC time, ISO 8601.
std::string utc_timestamp();

/// Writes `text` to `path`, throwing RuntimeError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace drmoe
