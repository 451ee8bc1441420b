#include "drmoe/checkpoint.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "drmoe/error.hpp"

namespace drmoe {

namespace {

using ojson = nlohmann::ordered_json;

ojson tensor(std::size_t rows, std::size_t cols, std::span<const double> values) {
  ojson t;
  t["shape"] = {rows, cols};
  t["values"] = std::vector<double>(values.begin(), values.end());
  return t;
}

ojson tensor(const Mat& m) { return tensor(m.rows(), m.cols(), m.values()); }
ojson tensor(const Vec& v) { return tensor(1, v.size(), v); }

Vec read_values(const nlohmann::json& params, const std::string& name, std::size_t rows, std::size_t cols) {
  if (!params.contains(name)) throw ValidationError("checkpoint: missing tensor '" + name + "'");
  const auto& t = params.at(name);
  const auto shape = t.at("shape").get<std::vector<std::size_t>>();
  if (shape != std::vector<std::size_t>{rows, cols}) {
    throw ValidationError("checkpoint: tensor '" + name + "' has shape " + t.at("shape").dump() + ", expected [" +
                          std::to_string(rows) + "," + std::to_string(cols) + "]");
  }
  auto values = t.at("values").get<Vec>();
  if (values.size() != rows * cols) throw ValidationError("checkpoint: tensor '" + name + "' has wrong length");
  return values;
}

void read_into(const nlohmann::json& params, const std::string& name, Mat& m) {
  m = Mat(m.rows(), m.cols(), read_values(params, name, m.rows(), m.cols()));
}

void read_into(const nlohmann::json& params, const std::string& name, Vec& v) {
  v = read_values(params, name, 1, v.size());
}

}  // namespace

nlohmann::ordered_json to_json(const EpochRecord& r) {
  ojson j;
  j["epoch"] = r.epoch;
  j["phase"] = std::string(1, r.phase);
  j["steps"] = r.steps;
  j["loss_wce"] = r.loss_wce;
  j["loss_auc"] = r.loss_auc;
  j["loss_la"] = r.loss_la;
  j["loss_total"] = r.loss_total;
  j["loss_fuse"] = r.loss_fuse;
  j["mean_alpha"] = r.mean_alpha;
  j["beta"] = r.beta;
  if (r.val) {
    ojson v;
    const nlohmann::json report = to_json(*r.val);
    for (const auto& [k, val] : report.items()) v[k] = val;
    j["val"] = v;
  } else {
    j["val"] = nullptr;
  }
  return j;
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  const auto phase = j.at("phase").get<std::string>();
  if (phase != "A" && phase != "B") throw ValidationError("history: phase must be A or B");
  r.phase = phase[0];
  r.steps = j.at("steps").get<std::size_t>();
  r.loss_wce = j.at("loss_wce").get<double>();
  r.loss_auc = j.at("loss_auc").get<double>();
  r.loss_la = j.at("loss_la").get<double>();
  r.loss_total = j.at("loss_total").get<double>();
  r.loss_fuse = j.at("loss_fuse").get<double>();
  r.mean_alpha = j.at("mean_alpha").get<double>();
  r.beta = j.at("beta").get<Vec>();
  if (!j.at("val").is_null()) r.val = report_from_json(j.at("val"));
  return r;
}

nlohmann::ordered_json to_json(const Checkpoint& c) {
  const TrainState& s = c.state;
  const DrMoeModel& m = s.model;
  ojson j;
  j["format_version"] = kFormatVersion;
  j["config"] = to_json(c.config);
  j["epoch"] = s.epoch;

  ojson params;
  params["frozen.w0"] = tensor(m.frozen.w0);
  params["lora.w0"] = tensor(m.lora.w0);
  params["lora.a"] = tensor(m.lora.a);
  params["lora.b"] = tensor(m.lora.b);
  params["gate.g"] = tensor(m.gate.g);
  params["gate.bias"] = tensor(Vec{m.gate.bias});
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string prefix = "head" + std::to_string(k + 1);
    params[prefix + ".w"] = tensor(m.heads[k].w);
    params[prefix + ".bias"] = tensor(m.heads[k].bias);
  }
  params["beta_raw"] = tensor(m.beta_raw);
  j["params"] = params;

  ojson opts;
  for (ParamGroup g : kParamGroups) {
    const AdamState& a = s.optimizers[static_cast<std::size_t>(g)];
    ojson o;
    o["t"] = a.t;
    o["m"] = a.m;
    o["v"] = a.v;
    opts[to_string(g)] = o;
  }
  j["optimizers"] = opts;

  std::ostringstream rng;
  rng << s.rng;
  j["rng"] = rng.str();

  ojson hist = ojson::array();
  for (const auto& r : s.history) hist.push_back(to_json(r));
  j["history"] = hist;
  j["metadata"] = {{"created_at", c.created_at}};
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw ValidationError("checkpoint: unsupported format_version " + std::to_string(version));
    }
    Checkpoint c;
    c.config = config_from_json(j.at("config"));
    const TrainConfig tc = c.config.train_config();
    // Shapes come from the config; values are then overwritten from the file.
    c.state = init_training(c.config.model_config(), tc, c.config.seed);
    TrainState& s = c.state;
    DrMoeModel& m = s.model;
    s.epoch = j.at("epoch").get<std::size_t>();

    const auto& params = j.at("params");
    read_into(params, "frozen.w0", m.frozen.w0);
    read_into(params, "lora.w0", m.lora.w0);
    read_into(params, "lora.a", m.lora.a);
    read_into(params, "lora.b", m.lora.b);
    read_into(params, "gate.g", m.gate.g);
    m.gate.bias = read_values(params, "gate.bias", 1, 1)[0];
    for (std::size_t k = 0; k < 3; ++k) {
      const std::string prefix = "head" + std::to_string(k + 1);
      read_into(params, prefix + ".w", m.heads[k].w);
      read_into(params, prefix + ".bias", m.heads[k].bias);
    }
    read_into(params, "beta_raw", m.beta_raw);

    const auto& opts = j.at("optimizers");
    for (ParamGroup g : kParamGroups) {
      AdamState& a = s.optimizers[static_cast<std::size_t>(g)];
      const auto& o = opts.at(to_string(g));
      a.t = o.at("t").get<std::int64_t>();
      a.m = o.at("m").get<Vec>();
      a.v = o.at("v").get<Vec>();
      if (a.m.size() != a.v.size() || a.m.size() != pack(m, g).size()) {
        throw ValidationError("checkpoint: optimizer state '" + to_string(g) + "' has wrong length");
      }
    }

    std::istringstream rng(j.at("rng").get<std::string>());
    rng >> s.rng;
    if (!rng) throw ValidationError("checkpoint: unreadable rng state");

    for (const auto& r : j.at("history")) s.history.push_back(epoch_record_from_json(r));
    c.created_at = j.at("metadata").at("created_at").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& c) { return to_json(c).dump(1) + "\n"; }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw RuntimeError("failed writing '" + path.string() + "'");
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_text_file(path, serialize_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("checkpoint '" + path.string() + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

std::string serialize_history(const std::vector<EpochRecord>& history) {
  std::string out;
  for (const auto& r : history) out += to_json(r).dump() + "\n";
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace drmoe
