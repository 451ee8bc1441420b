#include "cli/commands.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drmoe/ablation.hpp"
#include "drmoe/checkpoint.hpp"
#include "drmoe/config.hpp"
#include "drmoe/data.hpp"
#include "drmoe/error.hpp"
#include "drmoe/metrics.hpp"
#include "drmoe/trainer.hpp"

namespace drmoe::cli {

namespace fs = std::filesystem;

namespace {

CLI::Validator open_unit_interval() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        try {
          v = std::stod(s);
        } catch (...) {
          return "not a number: " + s;
        }
        return (v > 0.0 && v < 1.0) ? std::string() : "value " + s + " must lie in (0, 1)";
      },
      "(0,1)");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_reals(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(flag + ": '" + item + "' is not a number");
    }
  }
  return out;
}

// Config file plus flag overrides shared by train and ablate.
struct ConfigFlags {
  std::string config_path;
  std::optional<double> lr, rho, threshold, margin;
  std::optional<std::size_t> epochs, fuse_epochs, batch, lora_rank, d_out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> gate_mode, expert_mode, head_mode, surrogate, weight_norm;
  std::vector<std::string> sets;

  void attach(CLI::App& app, bool with_seed = true) {
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--lr", lr, "Adam learning rate");
    app.add_option("--rho", rho, "SAM perturbation radius");
    app.add_option("--epochs", epochs, "phase-A epochs");
    app.add_option("--fuse-epochs", fuse_epochs, "phase-B (fusion) epochs");
    app.add_option("--batch", batch, "minibatch size");
    app.add_option("--lora-rank", lora_rank, "low-rank adapter rank");
    app.add_option("--d-out", d_out, "joint feature width");
    app.add_option("--gate-mode", gate_mode, "scalar | input_conditioned");
    app.add_option("--expert-mode", expert_mode, "fmoe | frozen | lora");
    app.add_option("--head-mode", head_mode, "full | ce | wce | auc | la");
    app.add_option("--surrogate", surrogate, "squared_hinge | logistic");
    app.add_option("--margin", margin, "squared-hinge margin");
    app.add_option("--weight-norm", weight_norm, "mean_one | raw");
    app.add_option("--threshold", threshold, "decision threshold on P(mistake)");
    if (with_seed) app.add_option("--seed", seed, "random seed");
    app.add_option("--set", sets, "override any config key: key=value (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  }

  bool has_overrides() const {
    return lr || rho || threshold || margin || epochs || fuse_epochs || batch || lora_rank || d_out || seed ||
           gate_mode || expert_mode || head_mode || surrogate || weight_norm || !sets.empty();
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValidationError("--set: expected key=value, got '" + kv + "'");
      set_config_field(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (lr) c.lr = *lr;
    if (rho) c.rho = *rho;
    if (threshold) c.threshold = *threshold;
    if (margin) c.margin = *margin;
    if (epochs) c.epochs = *epochs;
    if (fuse_epochs) c.fuse_epochs = *fuse_epochs;
    if (batch) c.batch = *batch;
    if (lora_rank) c.lora_rank = *lora_rank;
    if (d_out) c.d_out = *d_out;
    if (seed) c.seed = *seed;
    if (gate_mode) c.gate_mode = *gate_mode;
    if (expert_mode) c.expert_mode = *expert_mode;
    if (head_mode) c.head_mode = *head_mode;
    if (surrogate) c.surrogate = *surrogate;
    if (weight_norm) c.weight_norm = *weight_norm;
    c.validate();
    return c;
  }
};

void check_dims(const RunConfig& c, const Dataset& data, const std::string& what) {
  if (data.d_ctx() != c.d_ctx || data.d_seg() != c.d_seg) {
    throw ValidationError(what + " has d_ctx=" + std::to_string(data.d_ctx()) + ", d_seg=" +
                          std::to_string(data.d_seg()) + " but the configuration expects d_ctx=" +
                          std::to_string(c.d_ctx) + ", d_seg=" + std::to_string(c.d_seg));
  }
}

SplitFracs parse_fracs(const std::string& s) {
  const auto v = parse_reals(s, "--split-fracs");
  if (v.size() != 3) throw ValidationError("--split-fracs: expected three comma-separated fractions");
  SplitFracs f{v[0], v[1], v[2]};
  try {
    f.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("--split-fracs: ") + e.what());
  }
  return f;
}

// ---------------------------------------------------------------- gen-data

struct GenDataCmd {
  GenSpec spec;
  std::string out_dir = "data";
  std::string format = "csv";
  std::string fracs = "0.7,0.15,0.15";

  void attach(CLI::App& app) {
    app.add_option("--n", spec.n, "total samples")->check(CLI::Range(std::size_t{10}, std::size_t{1} << 40));
    app.add_option("--imbalance", spec.imbalance, "mistake proportion")->check(open_unit_interval());
    app.add_option("--d-ctx", spec.d_ctx, "context feature width")->check(CLI::PositiveNumber);
    app.add_option("--d-seg", spec.d_seg, "segment feature width")->check(CLI::PositiveNumber);
    app.add_option("--mean-shift", spec.mean_shift, "class separation");
    app.add_option("--noise-corr", spec.noise_corr, "segment signal share in the context view")
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--seed", spec.seed, "generator seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--format", format, "csv | jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    app.add_option("--split-fracs", fracs, "train,val,test fractions");
  }

  int operator()(std::ostream& out) const {
    const SplitFracs f = parse_fracs(fracs);
    spec.validate();
    const FileFormat fmt = parse_format(format);
    const auto parts = split_dataset(generate(spec), f);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw RuntimeError("cannot create '" + out_dir + "': " + ec.message());
    for (const auto& part : parts) {
      const fs::path path = fs::path(out_dir) / (to_string(part.split) + "." + format);
      write_dataset(part, path, fmt);
      out << path.string() << ": " << part.size() << " samples (" << part.count(1) << " mistakes)\n";
    }
    return kOk;
  }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
  ConfigFlags flags;
  std::string train_path;
  std::string val_path;
  std::string out_dir = "run";
  std::string resume;
  std::optional<std::size_t> stop_after;

  void attach(CLI::App& app) {
    flags.attach(app);
    app.add_option("--train", train_path, "training data (.csv or .jsonl)")->required()->check(CLI::ExistingFile);
    app.add_option("--val", val_path, "validation data")->check(CLI::ExistingFile);
    app.add_option("--out-dir", out_dir, "directory for checkpoint.json and history.jsonl");
    app.add_option("--resume", resume, "continue from a checkpoint")->check(CLI::ExistingFile);
    app.add_option("--stop-after-epoch", stop_after, "stop once this many epochs are complete");
  }

  int operator()(std::ostream& out) const {
    Checkpoint ckpt;
    if (!resume.empty()) {
      if (flags.has_overrides() || !flags.config_path.empty()) {
        throw ValidationError("--resume takes its configuration from the checkpoint; drop config flags");
      }
      ckpt = load_checkpoint(resume);
    } else {
      ckpt.config = flags.resolve();
    }
    const Dataset train_set = ingest(train_path);
    check_dims(ckpt.config, train_set, "training data");
    std::optional<Dataset> val_set;
    if (!val_path.empty()) {
      val_set = ingest(val_path);
      val_set->split = Split::val;
      check_dims(ckpt.config, *val_set, "validation data");
    }
    const TrainConfig tc = ckpt.config.train_config();
    loss_settings(train_set, tc);  // single-class check before any work
    if (resume.empty()) ckpt.state = init_training(ckpt.config.model_config(), tc, ckpt.config.seed);

    const std::size_t total = tc.total_epochs(ckpt.state.model.config.head_mode);
    train_until(ckpt.state, train_set, tc, stop_after.value_or(total), val_set ? &*val_set : nullptr);
    ckpt.created_at = utc_timestamp();

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw RuntimeError("cannot create '" + out_dir + "': " + ec.message());
    save_checkpoint(ckpt, fs::path(out_dir) / "checkpoint.json");
    write_text_file(fs::path(out_dir) / "history.jsonl", serialize_history(ckpt.state.history));

    out << "epochs completed: " << ckpt.state.epoch << " / " << total << "\n";
    if (val_set) {
      const MetricsReport r = evaluate(ckpt.state.model, *val_set, tc.threshold);
      out << "validation (" << val_set->size() << " samples)\n";
      out << format_table({{"DR-MoE", r}});
      if (r.auc) out << "AUC " << format_real(*r.auc) << "\n";
    }
    return kOk;
  }
};

// ---------------------------------------------------------------- eval

struct EvalCmd {
  std::string checkpoint;
  std::string data_path;
  std::string counts;
  std::string pr;
  std::string out_path;
  std::string name = "DR-MoE";
  int decimals = 2;

  void attach(CLI::App& app) {
    app.add_option("--checkpoint", checkpoint, "trained checkpoint")->check(CLI::ExistingFile);
    app.add_option("--data", data_path, "evaluation data (.csv or .jsonl)")->check(CLI::ExistingFile);
    app.add_option("--counts", counts, "report from confusion counts tp,fp,fn,tn instead of a model");
    app.add_option("--pr", pr, "report from correct-P,correct-R,mistake-P,mistake-R values");
    app.add_option("--out", out_path, "write the JSON report here");
    app.add_option("--name", name, "method label in the table");
    app.add_option("--decimals", decimals, "digits in the table")->check(CLI::Range(0, 12));
  }

  MetricsReport build_report(std::string& source) const {
    const int modes = (!checkpoint.empty() || !data_path.empty()) + !counts.empty() + !pr.empty();
    if (modes != 1) throw ValidationError("eval: give either --checkpoint with --data, --counts, or --pr");
    if (!counts.empty()) {
      const auto v = parse_reals(counts, "--counts");
      if (v.size() != 4) throw ValidationError("--counts: expected tp,fp,fn,tn");
      Confusion c;
      for (double x : v) {
        if (x < 0 || x != static_cast<double>(static_cast<std::int64_t>(x))) {
          throw ValidationError("--counts: counts must be non-negative integers");
        }
      }
      c.tp = static_cast<std::int64_t>(v[0]);
      c.fp = static_cast<std::int64_t>(v[1]);
      c.fn = static_cast<std::int64_t>(v[2]);
      c.tn = static_cast<std::int64_t>(v[3]);
      source = "counts";
      return prf(c);
    }
    if (!pr.empty()) {
      const auto v = parse_reals(pr, "--pr");
      if (v.size() != 4) throw ValidationError("--pr: expected correct-P,correct-R,mistake-P,mistake-R");
      source = "precision_recall";
      return report_from_pr(v[0], v[1], v[2], v[3]);
    }
    if (checkpoint.empty() || data_path.empty()) throw ValidationError("eval: --checkpoint and --data go together");
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    Dataset data = ingest(data_path);
    data.split = Split::test;
    check_dims(ckpt.config, data, "evaluation data");
    source = fs::path(data_path).filename().string();
    return evaluate(ckpt.state.model, data, ckpt.config.threshold);
  }

  int operator()(std::ostream& out) const {
    std::string source;
    const MetricsReport r = build_report(source);
    nlohmann::ordered_json j;
    j["format_version"] = kFormatVersion;
    j["method"] = name;
    j["source"] = source;
    j["columns"] = {"f_score", "precision_correct", "recall_correct", "precision_mistake", "recall_mistake"};
    const nlohmann::json report = to_json(r);
    for (const auto& [k, v] : report.items()) j[k] = v;
    out << format_table({{name, r}}, decimals);
    if (r.auc) out << "AUC " << format_real(*r.auc) << "\n";
    if (out_path.empty()) {
      out << j.dump(2) << "\n";
    } else {
      write_text_file(out_path, j.dump(2) + "\n");
    }
    return kOk;
  }
};

// ---------------------------------------------------------------- ablate

struct AblateCmd {
  ConfigFlags flags;
  GenSpec gen = reference_gen_spec(0);
  std::string seeds = "0,1,2,3,4";
  std::string experts = "frozen,lora,fmoe";
  std::string heads = "ce,wce,auc,la,full";
  std::string rhos;
  std::string fracs = "0.7,0.15,0.15";
  std::string out_path;
  unsigned jobs = 1;

  void attach(CLI::App& app) {
    flags.attach(app, false);
    app.add_option("--seeds", seeds, "comma-separated seeds (data and model)");
    app.add_option("--experts", experts, "subset of frozen,lora,fmoe");
    app.add_option("--heads", heads, "subset of ce,wce,auc,la,full");
    app.add_option("--rhos", rhos, "SAM radii to cross with every row (default: config rho)");
    app.add_option("--n", gen.n, "samples per generated dataset")->check(CLI::Range(std::size_t{10}, std::size_t{1} << 40));
    app.add_option("--imbalance", gen.imbalance, "mistake proportion")->check(open_unit_interval());
    app.add_option("--mean-shift", gen.mean_shift, "class separation");
    app.add_option("--noise-corr", gen.noise_corr, "segment signal share in the context view")
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--d-ctx", gen.d_ctx, "context feature width")->check(CLI::PositiveNumber);
    app.add_option("--d-seg", gen.d_seg, "segment feature width")->check(CLI::PositiveNumber);
    app.add_option("--split-fracs", fracs, "train,val,test fractions");
    app.add_option("--jobs", jobs, "parallel workers")->check(CLI::Range(1u, 256u));
    app.add_option("--out", out_path, "write the JSON comparison here");
  }

  int operator()(std::ostream& out) const {
    AblationSpec spec;
    spec.base = flags.resolve();
    spec.data = gen;
    spec.data.validate();
    spec.fracs = parse_fracs(fracs);
    spec.seeds.clear();
    for (const auto& s : split_list(seeds)) {
      try {
        spec.seeds.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw ValidationError("--seeds: '" + s + "' is not a seed");
      }
    }
    if (spec.seeds.empty()) throw ValidationError("--seeds: need at least one seed");
    spec.experts.clear();
    for (const auto& e : split_list(experts)) spec.experts.push_back(parse_expert_mode(e));
    spec.heads.clear();
    for (const auto& h : split_list(heads)) spec.heads.push_back(parse_head_mode(h));
    if (!rhos.empty()) spec.rhos = parse_reals(rhos, "--rhos");
    for (double r : spec.rhos) {
      if (!(r >= 0.0)) throw ValidationError("--rhos: radii must be non-negative");
    }
    spec.jobs = jobs;

    const auto rows = run_ablation(spec);
    out << format_ablation(rows);
    if (!out_path.empty()) write_text_file(out_path, to_json(rows).dump(2) + "\n");
    return kOk;
  }
};

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-stage reweighted mixture-of-experts for imbalanced binary classification", "drmoe"};
  app.require_subcommand(1);

  GenDataCmd gen_data;
  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  AblateCmd ablate_cmd;
  auto* gen_app = app.add_subcommand("gen-data", "write synthetic long-tailed train/val/test files");
  auto* train_app = app.add_subcommand("train", "train a model and write checkpoint + history");
  auto* eval_app = app.add_subcommand("eval", "evaluate a checkpoint and print the metrics table");
  auto* ablate_app = app.add_subcommand("ablate", "expert x head comparison over several seeds");
  for (auto* sub : {gen_app, train_app, eval_app, ablate_app}) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
  gen_data.attach(*gen_app);
  train_cmd.attach(*train_app);
  eval_cmd.attach(*eval_app);
  ablate_cmd.attach(*ablate_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidationError;
  }

  try {
    if (gen_app->parsed()) return gen_data(out);
    if (train_app->parsed()) return train_cmd(out);
    if (eval_app->parsed()) return eval_cmd(out);
    if (ablate_app->parsed()) return ablate_cmd(out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kValidationError;
}

}  // namespace drmoe::cli
