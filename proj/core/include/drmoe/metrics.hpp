#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "drmoe/losses.hpp"

namespace drmoe {

/// Confusion counts with mistake (label 1) as the positive class.
struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

Confusion confusion(std::span<const Label> preds, std::span<const Label> labels);

/// Zero when p + r == 0.
double f1_score(double precision, double recall);

struct MetricsReport {
  Confusion counts;
  double precision_correct = 0.0;
  double recall_correct = 0.0;
  double precision_mistake = 0.0;
  double recall_mistake = 0.0;
  double f1_correct = 0.0;
  double f1_mistake = 0.0;
  double f_macro = 0.0;
  std::optional<double> auc;

  bool operator==(const MetricsReport&) const = default;
};

/// Per-class precision/recall/F1 and macro-F. Zero-denominator ratios are 0.
MetricsReport prf(const Confusion& counts);

/// F1s and macro-F straight from per-class precision/recall values (no counts).
MetricsReport report_from_pr(double precision_correct, double recall_correct,
                             double precision_mistake, double recall_mistake);

/// Mann-Whitney AUC with tie credit 1/2, via average ranks.
double auc_metric(std::span<const double> scores, std::span<const Label> labels);
/// Same statistic by enumerating every positive/negative pair.
double auc_metric_pairwise(std::span<const double> scores, std::span<const Label> labels);

nlohmann::json to_json(const MetricsReport& r);
/// Reads the counts (and auc) and recomputes every derived field.
MetricsReport report_from_json(const nlohmann::json& j);

/// Fixed-width table: Method, F-score, Correct P/R, Mistake P/R.
std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows, int decimals = 2);

}  // namespace drmoe
