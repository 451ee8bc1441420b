#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drmoe/config.hpp"
#include "drmoe/data.hpp"
#include "drmoe/metrics.hpp"
#include "drmoe/model.hpp"

namespace drmoe {

/// Reference imbalanced dataset used for the desk-scale comparison.
GenSpec reference_gen_spec(std::uint64_t seed);

struct AblationSpec {
  RunConfig base;
  GenSpec data = reference_gen_spec(0);  // seed replaced per run
  SplitFracs fracs;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<ExpertMode> experts{ExpertMode::frozen_only, ExpertMode::lora_only, ExpertMode::fmoe};
  std::vector<HeadMode> heads{HeadMode::ce, HeadMode::wce, HeadMode::auc, HeadMode::la, HeadMode::full};
  std::vector<double> rhos;  // empty: base.rho only
  unsigned jobs = 1;
};

struct RunResult {
  std::uint64_t seed = 0;
  MetricsReport test;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

MeanStd mean_std(const std::vector<double>& xs);

struct AblationRow {
  ExpertMode expert = ExpertMode::fmoe;
  HeadMode head = HeadMode::full;
  double rho = 0.0;
  std::vector<RunResult> runs;  // in seed order
  MeanStd f_macro;
  MeanStd recall_mistake;
  MeanStd auc;
};

/// Trains and tests every (expert x head x rho) configuration over all seeds. Each seed
/// generates its own dataset (train/test from the stratified split) and initializes the model
/// with the same seed. Rows come back in configuration order regardless of `jobs`.
std::vector<AblationRow> run_ablation(const AblationSpec& spec);

const AblationRow* find_row(const std::vector<AblationRow>& rows, ExpertMode e, HeadMode h);

std::string format_ablation(const std::vector<AblationRow>& rows);
nlohmann::ordered_json to_json(const std::vector<AblationRow>& rows);

}  // namespace drmoe
