#include "drmoe/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "drmoe/error.hpp"

namespace drmoe {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw ValidationError("config field '" + field + "': " + why);
}

void require_positive(const std::string& field, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) bad(field, "must be a positive finite number");
}

}  // namespace

void RunConfig::validate() const {
  require_positive("lr", lr);
  if (!(beta1 >= 0.0 && beta1 < 1.0)) bad("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) bad("beta2", "must lie in [0, 1)");
  require_positive("eps", eps);
  if (!(rho >= 0.0) || !std::isfinite(rho)) bad("rho", "must be non-negative");
  if (batch == 0) bad("batch", "must be positive");
  if (d_ctx == 0) bad("d_ctx", "must be positive");
  if (d_seg == 0) bad("d_seg", "must be positive");
  if (d_out == 0) bad("d_out", "must be positive");
  if (lora_rank < 1 || lora_rank > std::min(d_out, d_seg)) {
    bad("lora_rank", "must lie in [1, min(d_out, d_seg)]");
  }
  try {
    parse_gate_mode(gate_mode);
  } catch (const ValidationError&) {
    bad("gate_mode", "expected scalar or input_conditioned");
  }
  try {
    parse_expert_mode(expert_mode);
  } catch (const ValidationError&) {
    bad("expert_mode", "expected fmoe, frozen or lora");
  }
  try {
    parse_head_mode(head_mode);
  } catch (const ValidationError&) {
    bad("head_mode", "expected full, ce, wce, auc or la");
  }
  if (surrogate != "squared_hinge" && surrogate != "logistic") bad("surrogate", "expected squared_hinge or logistic");
  require_positive("margin", margin);
  if (weight_norm != "mean_one" && weight_norm != "raw") bad("weight_norm", "expected mean_one or raw");
  if (!(threshold > 0.0 && threshold < 1.0)) bad("threshold", "must lie in (0, 1)");
}

ModelConfig RunConfig::model_config() const {
  validate();
  return {d_ctx, d_seg, d_out, lora_rank, parse_gate_mode(gate_mode), parse_expert_mode(expert_mode),
          parse_head_mode(head_mode)};
}

TrainConfig RunConfig::train_config() const {
  validate();
  TrainConfig t;
  t.adam = {lr, beta1, beta2, eps};
  t.sam = {rho, sam_enabled};
  t.batch = batch;
  t.epochs = epochs;
  t.fuse_epochs = fuse_epochs;
  t.weight_norm = weight_norm == "raw" ? WeightNorm::raw : WeightNorm::mean_one;
  t.surrogate = {surrogate == "logistic" ? SurrogateVariant::logistic : SurrogateVariant::squared_hinge, margin};
  t.threshold = threshold;
  return t;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["rho"] = c.rho;
  j["sam_enabled"] = c.sam_enabled;
  j["lora_rank"] = c.lora_rank;
  j["batch"] = c.batch;
  j["epochs"] = c.epochs;
  j["fuse_epochs"] = c.fuse_epochs;
  j["d_ctx"] = c.d_ctx;
  j["d_seg"] = c.d_seg;
  j["d_out"] = c.d_out;
  j["gate_mode"] = c.gate_mode;
  j["expert_mode"] = c.expert_mode;
  j["head_mode"] = c.head_mode;
  j["surrogate"] = c.surrogate;
  j["margin"] = c.margin;
  j["weight_norm"] = c.weight_norm;
  j["seed"] = c.seed;
  j["threshold"] = c.threshold;
  return j;
}

namespace {

using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;

template <typename T>
Setter field(const std::string& name, T RunConfig::*member) {
  return [name, member](RunConfig& c, const nlohmann::json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad(name, "expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) bad(name, "expected a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) bad(name, "expected a number");
    } else {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.template get<long long>() >= 0)) {
        bad(name, "expected a non-negative integer");
      }
    }
    c.*member = v.template get<T>();
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"lr", field("lr", &RunConfig::lr)},
      {"beta1", field("beta1", &RunConfig::beta1)},
      {"beta2", field("beta2", &RunConfig::beta2)},
      {"eps", field("eps", &RunConfig::eps)},
      {"rho", field("rho", &RunConfig::rho)},
      {"sam_enabled", field("sam_enabled", &RunConfig::sam_enabled)},
      {"lora_rank", field("lora_rank", &RunConfig::lora_rank)},
      {"batch", field("batch", &RunConfig::batch)},
      {"epochs", field("epochs", &RunConfig::epochs)},
      {"fuse_epochs", field("fuse_epochs", &RunConfig::fuse_epochs)},
      {"d_ctx", field("d_ctx", &RunConfig::d_ctx)},
      {"d_seg", field("d_seg", &RunConfig::d_seg)},
      {"d_out", field("d_out", &RunConfig::d_out)},
      {"gate_mode", field("gate_mode", &RunConfig::gate_mode)},
      {"expert_mode", field("expert_mode", &RunConfig::expert_mode)},
      {"head_mode", field("head_mode", &RunConfig::head_mode)},
      {"surrogate", field("surrogate", &RunConfig::surrogate)},
      {"margin", field("margin", &RunConfig::margin)},
      {"weight_norm", field("weight_norm", &RunConfig::weight_norm)},
      {"seed", field("seed", &RunConfig::seed)},
      {"threshold", field("threshold", &RunConfig::threshold)},
  };
  return table;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ValidationError("config: unknown key '" + key + "'");
    it->second(c, value);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

void set_config_field(RunConfig& c, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ValidationError("config: unknown key '" + key + "'");
  nlohmann::json v;
  if (value == "true" || value == "false") {
    v = value == "true";
  } else {
    v = nlohmann::json::parse(value, nullptr, false);
    if (v.is_discarded() || v.is_string() || v.is_object() || v.is_array() || v.is_null()) v = value;
  }
  it->second(c, v);
}

}  // namespace drmoe
