#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "drmoe/error.hpp"
#include "drmoe/model.hpp"
#include "drmoe/trainer.hpp"
#include "support/oracles.hpp"

using namespace drmoe;

namespace {

ModelConfig small_config(HeadMode heads = HeadMode::full, ExpertMode experts = ExpertMode::fmoe) {
  ModelConfig c;
  c.d_ctx = 3;
  c.d_seg = 3;
  c.d_out = 4;
  c.lora_rank = 2;
  c.head_mode = heads;
  c.expert_mode = experts;
  return c;
}

// Random values everywhere so no gradient path is trivially zero.
DrMoeModel randomized_model(const ModelConfig& cfg, std::mt19937_64& rng) {
  DrMoeModel m = make_model(cfg, rng);
  unpack_all(m, oracle::random_vec(rng, pack_all(m).size(), -1.0, 1.0));
  return m;
}

Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d_ctx, std::size_t d_seg) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    d.samples.push_back({oracle::random_vec(rng, d_ctx), oracle::random_vec(rng, d_seg), static_cast<Label>(i % 2)});
  }
  return d;
}

std::vector<const Sample*> pointers(const Dataset& d) {
  std::vector<const Sample*> out;
  for (const auto& s : d.samples) out.push_back(&s);
  return out;
}

LossSettings imbalanced_settings(SurrogateVariant v) {
  LossSettings s;
  s.freq = ClassFreq(0.8, 0.2);
  s.class_weights = class_weights(s.freq);
  s.surrogate = {v, 1.0};
  return s;
}

TrainConfig fast_config(double lr) {
  TrainConfig c;
  c.adam.lr = lr;
  return c;
}

// Separable by the line x0 + x1 = 0 with a gap of 0.2 on each side.
Dataset separable_2d(std::uint64_t seed, std::size_t per_class) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Dataset d;
  std::size_t counts[2] = {0, 0};
  while (counts[0] < per_class || counts[1] < per_class) {
    const Vec x{u(rng), u(rng)};
    const double s = x[0] + x[1];
    if (std::abs(s) < 0.2) continue;
    const Label y = s > 0 ? 1 : 0;
    if (counts[y] == per_class) continue;
    ++counts[y];
    d.samples.push_back({x, x, y});
  }
  return d;
}

double accuracy(const std::vector<Label>& pred, const std::vector<Label>& truth) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

// Plain batch-gradient logistic regression.
std::vector<Label> logistic_regression_oracle(const Dataset& train, const Dataset& test) {
  double w0 = 0.0, w1 = 0.0, b = 0.0;
  for (int it = 0; it < 500; ++it) {
    double g0 = 0.0, g1 = 0.0, gb = 0.0;
    for (const auto& s : train.samples) {
      const double p = 1.0 / (1.0 + std::exp(-(w0 * s.seg[0] + w1 * s.seg[1] + b)));
      const double r = p - s.label;
      g0 += r * s.seg[0];
      g1 += r * s.seg[1];
      gb += r;
    }
    const double n = static_cast<double>(train.size());
    w0 -= 0.5 * g0 / n;
    w1 -= 0.5 * g1 / n;
    b -= 0.5 * gb / n;
  }
  std::vector<Label> out;
  for (const auto& s : test.samples) out.push_back(w0 * s.seg[0] + w1 * s.seg[1] + b > 0 ? 1 : 0);
  return out;
}

}  // namespace

TEST(ModeNames, RoundTrip) {
  for (auto m : {ExpertMode::fmoe, ExpertMode::frozen_only, ExpertMode::lora_only}) {
    EXPECT_EQ(parse_expert_mode(to_string(m)), m);
  }
  for (auto m : {HeadMode::full, HeadMode::ce, HeadMode::wce, HeadMode::auc, HeadMode::la}) {
    EXPECT_EQ(parse_head_mode(to_string(m)), m);
  }
  for (auto m : {GateMode::scalar, GateMode::input_conditioned}) EXPECT_EQ(parse_gate_mode(to_string(m)), m);
  EXPECT_THROW(parse_head_mode("both"), ValidationError);
}

TEST(Forward, OneHotBetaSelectsHeadOne) {
  std::mt19937_64 rng(1);
  DrMoeModel m = randomized_model(small_config(), rng);
  m.beta_raw = {40.0, 0.0, 0.0};
  for (int i = 0; i < 20; ++i) {
    const Prediction p = forward(m, oracle::random_vec(rng, 3), oracle::random_vec(rng, 3));
    EXPECT_LT(std::abs(p.fused_logits[0] - p.head_logits[0][0]), 1e-10);
    EXPECT_LT(std::abs(p.fused_logits[1] - p.head_logits[0][1]), 1e-10);
  }
}

TEST(Forward, ZeroRawGivesUniformBeta) {
  std::mt19937_64 rng(2);
  const DrMoeModel m = make_model(small_config(), rng);
  const Vec beta = m.beta();
  for (double b : beta) EXPECT_NEAR(b, 1.0 / 3.0, 1e-15);
}

TEST(Forward, ZeroHeadsTieToCorrect) {
  std::mt19937_64 rng(3);
  DrMoeModel m = make_model(small_config(), rng);
  for (auto& h : m.heads) {
    std::fill(h.w.values().begin(), h.w.values().end(), 0.0);
    std::fill(h.bias.begin(), h.bias.end(), 0.0);
  }
  const Prediction p = forward(m, oracle::random_vec(rng, 3), oracle::random_vec(rng, 3));
  EXPECT_EQ(p.fused_logits, (Vec{0.0, 0.0}));
  EXPECT_EQ(p.prob_mistake, 0.5);
  EXPECT_EQ(p.label, 0);
}

TEST(Forward, FusionIsBetaWeightedSumOfHeadLogits) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    DrMoeModel m = randomized_model(small_config(), rng);
    m.beta_raw = oracle::random_vec(rng, 3, -3.0, 3.0);
    const Vec x_ctx = oracle::random_vec(rng, 3);
    const Vec x_seg = oracle::random_vec(rng, 3);
    const Prediction p = forward(m, x_ctx, x_seg);

    // Independent recomputation from the raw tensors.
    const FMoeForward f = fmoe_forward(m.frozen, m.lora, m.gate, x_ctx, x_seg);
    const Vec z1 = head_forward(m.heads[0], f.joint);
    const double s = head_forward(m.heads[1], f.joint)[0];
    const Vec z3 = head_forward(m.heads[2], f.joint);
    const double e0 = std::exp(m.beta_raw[0]), e1 = std::exp(m.beta_raw[1]), e2 = std::exp(m.beta_raw[2]);
    const double sum = e0 + e1 + e2;
    const double fused0 = (e0 * z1[0] + e2 * z3[0]) / sum;
    const double fused1 = (e0 * z1[1] + e1 * s + e2 * z3[1]) / sum;
    EXPECT_NEAR(p.fused_logits[0], fused0, 1e-12);
    EXPECT_NEAR(p.fused_logits[1], fused1, 1e-12);
    EXPECT_GE(p.prob_mistake, 0.0);
    EXPECT_LE(p.prob_mistake, 1.0);
    EXPECT_EQ(p.label, p.prob_mistake > 0.5 ? 1 : 0);
    EXPECT_GT(p.alpha, 0.0);
    EXPECT_LT(p.alpha, 1.0);
  }
}

TEST(Forward, SingleHeadModesUseTheirHead) {
  std::mt19937_64 rng(5);
  const std::pair<HeadMode, std::size_t> cases[] = {{HeadMode::ce, 0}, {HeadMode::wce, 0}, {HeadMode::auc, 1}, {HeadMode::la, 2}};
  for (auto [mode, k] : cases) {
    const DrMoeModel m = randomized_model(small_config(mode), rng);
    const Prediction p = forward(m, oracle::random_vec(rng, 3), oracle::random_vec(rng, 3));
    EXPECT_EQ(p.fused_logits, p.head_logits[k]);
  }
}

TEST(Forward, ExpertModesPinAlpha) {
  std::mt19937_64 rng(6);
  const Vec x_ctx = oracle::random_vec(rng, 3);
  const Vec x_seg = oracle::random_vec(rng, 3);
  const DrMoeModel frozen = randomized_model(small_config(HeadMode::full, ExpertMode::frozen_only), rng);
  const FMoeForward f = joint_features(frozen, x_ctx, x_seg);
  EXPECT_EQ(f.alpha, 1.0);
  EXPECT_EQ(f.joint, frozen_forward(frozen.frozen, x_ctx));
  const DrMoeModel lora = randomized_model(small_config(HeadMode::full, ExpertMode::lora_only), rng);
  const FMoeForward l = joint_features(lora, x_ctx, x_seg);
  EXPECT_EQ(l.alpha, 0.0);
  EXPECT_EQ(l.joint, lora_forward(lora.lora, x_seg));
}

TEST(Forward, DimensionMismatchRejected) {
  std::mt19937_64 rng(7);
  const DrMoeModel m = make_model(small_config(), rng);
  EXPECT_THROW(forward(m, Vec(4, 0.0), Vec(3, 0.0)), ValidationError);
  EXPECT_THROW(forward(m, Vec(3, 0.0), Vec(2, 0.0)), ValidationError);
}

TEST(PredictBatch, EmptyPermutedAndRepeated) {
  std::mt19937_64 rng(8);
  const DrMoeModel m = randomized_model(small_config(), rng);
  EXPECT_TRUE(predict_batch(m, std::vector<Sample>{}).empty());

  Dataset d = random_dataset(rng, 12, 3, 3);
  const auto base = predict_batch(m, d.samples);
  std::vector<std::size_t> perm(d.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Sample> shuffled;
  for (std::size_t i : perm) shuffled.push_back(d.samples[i]);
  const auto moved = predict_batch(m, shuffled);
  for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_EQ(moved[k], base[perm[k]]);

  const std::vector<Sample> twice{d.samples[0], d.samples[0]};
  const auto rep = predict_batch(m, twice);
  EXPECT_EQ(rep[0], rep[1]);
}

TEST(PredictBatch, ErrorNamesSampleIndex) {
  std::mt19937_64 rng(9);
  const DrMoeModel m = make_model(small_config(), rng);
  Dataset d = random_dataset(rng, 5, 3, 3);
  d.samples[3].seg.push_back(1.0);
  try {
    predict_batch(m, d.samples);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 3"), std::string::npos);
  }
}

TEST(Packing, RoundTripsEveryGroup) {
  std::mt19937_64 rng(10);
  DrMoeModel m = randomized_model(small_config(), rng);
  const Vec all = pack_all(m);
  DrMoeModel copy = make_model(small_config(), rng);
  unpack_all(copy, all);
  EXPECT_EQ(pack_all(copy), all);
  for (ParamGroup g : kParamGroups) EXPECT_EQ(pack(copy, g), pack(m, g));
  EXPECT_THROW(unpack(copy, ParamGroup::fusion, Vec{1.0}), ValidationError);
}

TEST(PhaseALoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  int trial = 0;
  for (HeadMode mode : {HeadMode::full, HeadMode::ce, HeadMode::wce, HeadMode::auc, HeadMode::la}) {
    for (GateMode gate : {GateMode::scalar, GateMode::input_conditioned}) {
      for (auto variant : {SurrogateVariant::squared_hinge, SurrogateVariant::logistic}) {
        ModelConfig cfg = small_config(mode);
        cfg.gate_mode = gate;
        const DrMoeModel m = randomized_model(cfg, rng);
        const Dataset d = random_dataset(rng, 4, 3, 3);
        const auto batch = pointers(d);
        const LossSettings settings = imbalanced_settings(variant);

        ModelGrads grads = ModelGrads::zeros_like(m);
        phase_a_loss(m, batch, settings, &grads);
        const Vec x0 = pack_all(m);
        const Vec fd = finite_diff_grad(
            [&](std::span<const double> x) {
              DrMoeModel t = m;
              unpack_all(t, x);
              return phase_a_loss(t, batch, settings, nullptr).total();
            },
            x0);
        EXPECT_LT(relative_error(fd, pack_all(grads)), 1e-5) << "trial " << trial;
        ++trial;
      }
    }
  }
}

TEST(FusionLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    DrMoeModel m = randomized_model(small_config(), rng);
    m.beta_raw = oracle::random_vec(rng, 3);
    const Dataset d = random_dataset(rng, 4, 3, 3);
    const auto batch = pointers(d);
    ModelGrads grads = ModelGrads::zeros_like(m);
    fusion_loss(m, batch, &grads);
    const Vec fd = finite_diff_grad(
        [&](std::span<const double> b) {
          DrMoeModel t = m;
          t.beta_raw.assign(b.begin(), b.end());
          return fusion_loss(t, batch, nullptr);
        },
        m.beta_raw);
    EXPECT_LT(relative_error(fd, grads.beta_raw), 1e-6);
    // No other tensor gets a gradient.
    const Vec shared = pack(grads, ParamGroup::shared);
    EXPECT_TRUE(std::all_of(shared.begin(), shared.end(), [](double v) { return v == 0.0; }));
  }
}

TEST(LaHeadObjective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  const DrMoeModel m = randomized_model(small_config(), rng);
  std::vector<Vec> joints;
  std::vector<Label> labels;
  for (int i = 0; i < 6; ++i) {
    joints.push_back(oracle::random_vec(rng, 4));
    labels.push_back(i % 3 == 0 ? 1 : 0);
  }
  const ClassFreq f(0.9, 0.1);
  const Vec p0 = pack(m, ParamGroup::head3);
  const LossAndGrad lg = la_head_objective(m.heads[2], p0, joints, labels, f);
  const Vec fd = finite_diff_grad(
      [&](std::span<const double> p) { return la_head_objective(m.heads[2], p, joints, labels, f).loss; }, p0);
  EXPECT_LT(relative_error(fd, lg.grad), 1e-6);
}

TEST(Training, SingleClassRejectedBeforeWork) {
  std::mt19937_64 rng(14);
  Dataset d = random_dataset(rng, 10, 3, 3);
  for (auto& s : d.samples) s.label = 0;
  EXPECT_THROW(train(small_config(), TrainConfig{}, 0, d), ValidationError);
}

TEST(Training, DimensionMismatchRejected) {
  std::mt19937_64 rng(15);
  const Dataset d = random_dataset(rng, 10, 4, 3);
  EXPECT_THROW(train(small_config(), TrainConfig{}, 0, d), ValidationError);
}

TEST(Training, BetaStaysOnSimplexAfterEveryStep) {
  std::mt19937_64 rng(16);
  const Dataset d = random_dataset(rng, 40, 3, 3);
  TrainConfig cfg = fast_config(0.5);  // large steps stress the parameterization
  cfg.batch = d.size();                // one step per epoch
  cfg.epochs = 3;
  cfg.fuse_epochs = 30;
  const TrainState st = train(small_config(), cfg, 1, d);
  ASSERT_EQ(st.history.size(), 33u);
  for (const auto& rec : st.history) {
    ASSERT_EQ(rec.steps, 1u);
    double sum = 0.0;
    for (double b : rec.beta) {
      EXPECT_GT(b, 0.0);
      sum += b;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Training, PhaseBChangesOnlyFusionWeights) {
  std::mt19937_64 rng(17);
  const Dataset d = random_dataset(rng, 60, 3, 3);
  TrainConfig cfg = fast_config(1e-2);
  cfg.batch = 16;
  cfg.epochs = 2;
  cfg.fuse_epochs = 3;
  TrainState st = init_training(small_config(), cfg, 3);
  train_until(st, d, cfg, cfg.epochs);
  const DrMoeModel after_a = st.model;
  train_until(st, d, cfg, cfg.total_epochs(HeadMode::full));
  EXPECT_EQ(st.epoch, 5u);
  for (ParamGroup g : {ParamGroup::shared, ParamGroup::head1, ParamGroup::head2, ParamGroup::head3}) {
    EXPECT_EQ(pack(st.model, g), pack(after_a, g)) << to_string(g);
  }
  EXPECT_EQ(st.model.frozen.w0, after_a.frozen.w0);
  EXPECT_EQ(st.model.lora.w0, after_a.lora.w0);
  EXPECT_NE(st.model.beta_raw, after_a.beta_raw);
  for (const auto& rec : st.history) EXPECT_EQ(rec.phase, rec.epoch <= 2 ? 'A' : 'B');
}

TEST(Training, FrozenWeightsNeverMove) {
  std::mt19937_64 rng(18);
  const Dataset d = random_dataset(rng, 60, 3, 3);
  TrainConfig cfg = fast_config(1e-1);
  cfg.batch = 16;
  cfg.epochs = 3;
  TrainState st = init_training(small_config(), cfg, 4);
  const DrMoeModel init = st.model;
  train_until(st, d, cfg, cfg.epochs);
  EXPECT_EQ(st.model.frozen.w0, init.frozen.w0);
  EXPECT_EQ(st.model.lora.w0, init.lora.w0);
  EXPECT_NE(st.model.lora.b, init.lora.b);
}

TEST(Training, NonFusedModesSkipPhaseB) {
  std::mt19937_64 rng(19);
  const Dataset d = random_dataset(rng, 30, 3, 3);
  TrainConfig cfg = fast_config(1e-2);
  cfg.epochs = 2;
  cfg.fuse_epochs = 4;
  EXPECT_EQ(cfg.total_epochs(HeadMode::ce), 2u);
  const TrainState st = train(small_config(HeadMode::auc), cfg, 0, d);
  EXPECT_EQ(st.history.size(), 2u);
  // Heads outside the mode are untouched.
  const TrainState init = init_training(small_config(HeadMode::auc), cfg, 0);
  EXPECT_EQ(st.model.heads[0].w, init.model.heads[0].w);
  EXPECT_EQ(st.model.heads[2].w, init.model.heads[2].w);
  EXPECT_NE(st.model.heads[1].w, init.model.heads[1].w);
}

TEST(Training, Deterministic) {
  std::mt19937_64 rng(20);
  const Dataset d = random_dataset(rng, 50, 3, 3);
  TrainConfig cfg = fast_config(1e-2);
  cfg.batch = 8;
  cfg.epochs = 2;
  cfg.fuse_epochs = 1;
  const TrainState a = train(small_config(), cfg, 9, d, &d);
  const TrainState b = train(small_config(), cfg, 9, d, &d);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.history, b.history);
  EXPECT_TRUE(a.history.back().val.has_value());
}

TEST(Training, ResumeEqualsUninterrupted) {
  std::mt19937_64 rng(21);
  const Dataset d = random_dataset(rng, 50, 3, 3);
  TrainConfig cfg = fast_config(1e-2);
  cfg.batch = 8;
  cfg.epochs = 3;
  cfg.fuse_epochs = 2;
  const TrainState full = train(small_config(), cfg, 5, d);
  TrainState part = init_training(small_config(), cfg, 5);
  for (std::size_t stop = 1; stop <= 5; ++stop) {
    TrainState copy = part;  // optimizer and rng state travel with the copy
    train_until(copy, d, cfg, stop);
    part = copy;
  }
  EXPECT_EQ(part.model, full.model);
  EXPECT_EQ(part.history, full.history);
  EXPECT_EQ(part.optimizers, full.optimizers);
}

TEST(StratifiedBatches, EveryBatchHasBothClassesAndCoversData) {
  std::mt19937_64 rng(22);
  Dataset d = random_dataset(rng, 200, 2, 2);
  for (std::size_t i = 0; i < d.size(); ++i) d.samples[i].label = i < 3 ? 1 : 0;
  const auto batches = stratified_batches(d, 16, rng);
  EXPECT_EQ(batches.size(), 13u);
  std::vector<int> seen(d.size(), 0);
  for (const auto& b : batches) {
    bool has[2] = {false, false};
    for (std::size_t i : b) {
      has[d.samples[i].label] = true;
      ++seen[i];
    }
    EXPECT_TRUE(has[0] && has[1]);
  }
  for (std::size_t i = 3; i < d.size(); ++i) EXPECT_EQ(seen[i], 1);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_GE(seen[i], 1);
  EXPECT_THROW(stratified_batches(d, 0, rng), ValidationError);
}

TEST(Training, SeparableDataLearned) {
  const Dataset train_set = separable_2d(100, 500);
  const Dataset test_set = separable_2d(101, 500);
  const std::vector<Label> truth = test_set.labels();
  ASSERT_GE(accuracy(logistic_regression_oracle(train_set, test_set), truth), 0.98);

  ModelConfig mc;
  mc.d_ctx = 2;
  mc.d_seg = 2;
  mc.lora_rank = 2;
  const TrainState st = train(mc, fast_config(1e-2), 0, train_set);
  std::vector<Label> pred;
  for (const auto& p : predict_batch(st.model, test_set.samples)) pred.push_back(p.label);
  EXPECT_GE(accuracy(pred, truth), 0.98);
}

TEST(Training, NoSignalGivesChanceAuc) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GenSpec g;
    g.n = 2000;
    g.imbalance = 0.5;
    g.mean_shift = 0.0;
    g.seed = seed;
    const auto parts = split_dataset(generate(g), SplitFracs{});
    const TrainState st = train(ModelConfig{}, fast_config(1e-3), seed, parts[0]);
    const MetricsReport r = evaluate(st.model, parts[2]);
    ASSERT_TRUE(r.auc.has_value());
    EXPECT_GE(*r.auc, 0.4) << "seed " << seed;
    EXPECT_LE(*r.auc, 0.6) << "seed " << seed;
  }
}

TEST(Training, FullModelRecallsMistakesAtLeastAsWellAsCeBaseline) {
  GenSpec g;
  g.seed = 0;
  const auto parts = split_dataset(generate(g), SplitFracs{});
  ModelConfig full_cfg;
  ModelConfig ce_cfg;
  ce_cfg.head_mode = HeadMode::ce;
  const TrainConfig cfg = fast_config(1e-3);
  const MetricsReport full = evaluate(train(full_cfg, cfg, 0, parts[0]).model, parts[2]);
  const MetricsReport ce = evaluate(train(ce_cfg, cfg, 0, parts[0]).model, parts[2]);
  EXPECT_GE(full.recall_mistake, ce.recall_mistake);
}
