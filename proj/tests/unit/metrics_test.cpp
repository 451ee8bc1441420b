#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "drmoe/error.hpp"
#include "drmoe/metrics.hpp"
#include "support/oracles.hpp"

using namespace drmoe;

TEST(Confusion, Examples) {
  const std::vector<Label> same{1, 0, 1};
  EXPECT_EQ(confusion(same, same), (Confusion{2, 0, 1, 0}));
  const std::vector<Label> preds{1, 1, 0, 0, 1, 0};
  const std::vector<Label> labels{1, 0, 1, 0, 1, 1};
  EXPECT_EQ(confusion(preds, labels), (Confusion{2, 1, 1, 2}));
}

TEST(Confusion, FlippingPredictionsSwapsCells) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Label> p(30), y(30), flipped(30);
    for (std::size_t i = 0; i < 30; ++i) {
      p[i] = coin(rng);
      y[i] = coin(rng);
      flipped[i] = 1 - p[i];
    }
    const Confusion a = confusion(p, y);
    const Confusion b = confusion(flipped, y);
    EXPECT_EQ(a.tp, b.fn);
    EXPECT_EQ(a.fn, b.tp);
    EXPECT_EQ(a.tn, b.fp);
    EXPECT_EQ(a.fp, b.tn);
    EXPECT_EQ(a.total(), 30);
  }
}

TEST(Confusion, Errors) {
  EXPECT_THROW(confusion(std::vector<Label>{1}, std::vector<Label>{1, 0}), ValidationError);
  EXPECT_THROW(confusion(std::vector<Label>{}, std::vector<Label>{}), ValidationError);
}

TEST(Prf, HandExample) {
  const MetricsReport r = prf(Confusion{3, 1, 0, 2});
  EXPECT_DOUBLE_EQ(r.precision_mistake, 0.75);
  EXPECT_DOUBLE_EQ(r.recall_mistake, 0.6);
  EXPECT_NEAR(r.f1_mistake, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
}

TEST(Prf, PerfectPredictions) {
  const MetricsReport r = prf(Confusion{5, 0, 7, 0});
  for (double v : {r.precision_correct, r.recall_correct, r.precision_mistake, r.recall_mistake, r.f1_correct,
                   r.f1_mistake, r.f_macro}) {
    EXPECT_EQ(v, 1.0);
  }
}

TEST(Prf, ZeroDenominatorsGiveZero) {
  const MetricsReport r = prf(Confusion{0, 0, 10, 0});
  EXPECT_EQ(r.precision_mistake, 0.0);
  EXPECT_EQ(r.recall_mistake, 0.0);
  EXPECT_EQ(r.f1_mistake, 0.0);
  EXPECT_EQ(r.f_macro, 0.5);
}

TEST(Prf, EchoesReferenceRow) {
  const MetricsReport r = report_from_pr(0.97, 0.60, 0.08, 0.63);
  EXPECT_EQ(r.precision_correct, 0.97);
  EXPECT_EQ(r.recall_correct, 0.60);
  EXPECT_EQ(r.precision_mistake, 0.08);
  EXPECT_EQ(r.recall_mistake, 0.63);
  // 2PR/(P+R), evaluated at 30 digits
  EXPECT_NEAR(r.f1_correct, 0.7414012738853504, 1e-15);
  EXPECT_NEAR(r.f1_mistake, 0.1419718309859155, 1e-15);
  EXPECT_NEAR(r.f_macro, 0.44168655243563293, 1e-15);
  EXPECT_THROW(report_from_pr(1.2, 0.5, 0.5, 0.5), ValidationError);
}

TEST(Prf, ReconstructedCountsReproduceRow) {
  // 100 mistakes and 1810 correct actions reconstructed from the row's ratios.
  const MetricsReport r = prf(Confusion{63, 724, 1086, 37});
  EXPECT_NEAR(r.precision_correct, 0.97, 0.005);
  EXPECT_DOUBLE_EQ(r.recall_correct, 0.6);
  EXPECT_NEAR(r.precision_mistake, 0.08, 0.005);
  EXPECT_DOUBLE_EQ(r.recall_mistake, 0.63);
  const std::string table = format_table({{"DR-MoE", r}});
  EXPECT_NE(table.find("0.97       0.60       0.08       0.63"), std::string::npos) << table;
}

TEST(Prf, BoundedAndRecomputable) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> cell(0, 40);
  for (int trial = 0; trial < 200; ++trial) {
    const Confusion c{cell(rng), cell(rng), cell(rng), cell(rng)};
    if (c.total() == 0) continue;
    const MetricsReport r = prf(c);
    for (double v : {r.precision_correct, r.recall_correct, r.precision_mistake, r.recall_mistake, r.f1_correct,
                     r.f1_mistake, r.f_macro}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    MetricsReport with_auc = r;
    with_auc.auc = 0.5 + 0.001 * trial;
    const nlohmann::json j = nlohmann::json::parse(to_json(with_auc).dump());
    EXPECT_EQ(report_from_json(j), with_auc);
  }
  EXPECT_THROW(report_from_json(nlohmann::json{{"tp", 1}}), ValidationError);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc_metric(Vec{0.9, 0.4, 0.6}, std::vector<Label>{1, 0, 1}), 1.0);
  EXPECT_EQ(auc_metric(Vec{1.0, 1.0, 1.0, 1.0}, std::vector<Label>{1, 0, 0, 1}), 0.5);
  EXPECT_EQ(auc_metric(Vec{0.1, 0.2, 0.8, 0.9}, std::vector<Label>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc_metric(Vec{0.9, 0.8, 0.2, 0.1}, std::vector<Label>{0, 0, 1, 1}), 0.0);
  EXPECT_THROW(auc_metric(Vec{0.1, 0.2}, std::vector<Label>{1, 1}), ValidationError);
  EXPECT_THROW(auc_metric(Vec{0.1}, std::vector<Label>{1, 0}), ValidationError);
}

TEST(Auc, RankPathEqualsPairsWithTies) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(2, 128);
  std::uniform_int_distribution<int> grid(0, 6);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = static_cast<std::size_t>(size(rng));
    Vec s(n);
    std::vector<Label> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? grid(rng) / 3.0 : oracle::random_vec(rng, 1)[0];
      y[i] = coin(rng) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    const double ref = oracle::auc_reference(s, y);
    EXPECT_NEAR(auc_metric(s, y), ref, 1e-10);
    EXPECT_NEAR(auc_metric_pairwise(s, y), ref, 1e-10);
  }
}

TEST(Auc, InvariantUnderIncreasingTransforms) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Vec s = oracle::random_vec(rng, 40);
    std::vector<Label> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = i % 4 == 0 ? 1 : 0;
    s[5] = s[4];  // a tie survives every strictly increasing map
    const double base = auc_metric(s, y);
    Vec ex(40), affine(40);
    for (std::size_t i = 0; i < 40; ++i) {
      ex[i] = std::exp(s[i]);
      affine[i] = 3.0 * s[i] - 7.0;
    }
    EXPECT_NEAR(auc_metric(ex, y), base, 1e-12);
    EXPECT_NEAR(auc_metric(affine, y), base, 1e-12);
  }
}

TEST(Table, ColumnOrderAndDecimals) {
  const MetricsReport r = report_from_pr(0.97, 0.6, 0.08, 0.63);
  const std::string table = format_table({{"DR-MoE", r}, {"baseline", prf(Confusion{1, 1, 1, 1})}});
  std::istringstream in(table);
  std::string header;
  std::getline(in, header);
  const std::vector<std::string> cols{"Method", "F-score", "Correct-P", "Correct-R", "Mistake-P", "Mistake-R"};
  std::size_t pos = 0;
  for (const auto& c : cols) {
    const std::size_t at = header.find(c, pos);
    ASSERT_NE(at, std::string::npos) << c;
    pos = at + c.size();
  }
  EXPECT_NE(table.find("DR-MoE  "), std::string::npos);
  EXPECT_NE(table.find("0.44       0.97       0.60       0.08       0.63"), std::string::npos) << table;
  EXPECT_NE(format_table({{"x", r}}, 4).find("0.4417"), std::string::npos);
  EXPECT_EQ(format_table({{"x", r}}), format_table({{"x", r}}));
}
