#include "drmoe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "drmoe/error.hpp"

namespace drmoe {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void count_classes(std::span<const Label> labels, std::size_t& pos, std::size_t& neg) {
  pos = 0;
  neg = 0;
  for (Label y : labels) {
    if (y == 1) {
      ++pos;
    } else if (y == 0) {
      ++neg;
    } else {
      throw ValidationError("auc: label " + std::to_string(y) + " is not 0 or 1");
    }
  }
  if (pos == 0 || neg == 0) throw ValidationError("auc: both classes must be present");
}

}  // namespace

Confusion confusion(std::span<const Label> preds, std::span<const Label> labels) {
  if (preds.size() != labels.size()) {
    throw ValidationError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                          std::to_string(labels.size()) + " labels");
  }
  if (preds.empty()) throw ValidationError("confusion: empty input");
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == 1;
    const bool y = labels[i] == 1;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

MetricsReport prf(const Confusion& c) {
  MetricsReport r;
  r.counts = c;
  r.precision_mistake = ratio(c.tp, c.tp + c.fp);
  r.recall_mistake = ratio(c.tp, c.tp + c.fn);
  r.precision_correct = ratio(c.tn, c.tn + c.fn);
  r.recall_correct = ratio(c.tn, c.tn + c.fp);
  r.f1_mistake = f1_score(r.precision_mistake, r.recall_mistake);
  r.f1_correct = f1_score(r.precision_correct, r.recall_correct);
  r.f_macro = 0.5 * (r.f1_correct + r.f1_mistake);
  return r;
}

MetricsReport report_from_pr(double precision_correct, double recall_correct, double precision_mistake,
                             double recall_mistake) {
  for (double v : {precision_correct, recall_correct, precision_mistake, recall_mistake}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("precision/recall values must lie in [0, 1]");
  }
  MetricsReport r;
  r.precision_correct = precision_correct;
  r.recall_correct = recall_correct;
  r.precision_mistake = precision_mistake;
  r.recall_mistake = recall_mistake;
  r.f1_correct = f1_score(precision_correct, recall_correct);
  r.f1_mistake = f1_score(precision_mistake, recall_mistake);
  r.f_macro = 0.5 * (r.f1_correct + r.f1_mistake);
  return r;
}

double auc_metric(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: scores and labels differ in length");
  std::size_t pos = 0;
  std::size_t neg = 0;
  count_classes(labels, pos, neg);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (average) ranks of the positives, ranks starting at 1.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t tied_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tied_pos += labels[order[j]] == 1 ? 1 : 0;
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += avg_rank * static_cast<double>(tied_pos);
    i = j;
  }
  const auto np = static_cast<double>(pos);
  const auto nn = static_cast<double>(neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc_metric_pairwise(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: scores and labels differ in length");
  std::size_t pos = 0;
  std::size_t neg = 0;
  count_classes(labels, pos, neg);
  double credit = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) credit += 1.0;
      else if (scores[i] == scores[j]) credit += 0.5;
    }
  }
  return credit / (static_cast<double>(pos) * static_cast<double>(neg));
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["tn"] = r.counts.tn;
  j["fn"] = r.counts.fn;
  j["precision_correct"] = r.precision_correct;
  j["recall_correct"] = r.recall_correct;
  j["precision_mistake"] = r.precision_mistake;
  j["recall_mistake"] = r.recall_mistake;
  j["f1_correct"] = r.f1_correct;
  j["f1_mistake"] = r.f1_mistake;
  j["f_macro"] = r.f_macro;
  j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  Confusion c;
  try {
    c.tp = j.at("tp").get<std::int64_t>();
    c.fp = j.at("fp").get<std::int64_t>();
    c.tn = j.at("tn").get<std::int64_t>();
    c.fn = j.at("fn").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("metrics report: ") + e.what());
  }
  MetricsReport r = prf(c);
  if (j.contains("auc") && !j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
  return r;
}

std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows, int decimals) {
  std::size_t name_width = 6;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  const int w = static_cast<int>(name_width);

  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %9s  %9s\n", w, "Method", "F-score", "Correct-P",
                "Correct-R", "Mistake-P", "Mistake-R");
  out += buf;
  out += std::string(name_width + 5 * 11, '-') + "\n";
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %9.*f  %9.*f  %9.*f  %9.*f  %9.*f\n", w, name.c_str(), decimals,
                  r.f_macro, decimals, r.precision_correct, decimals, r.recall_correct, decimals,
                  r.precision_mistake, decimals, r.recall_mistake);
    out += buf;
  }
  return out;
}

}  // namespace drmoe
