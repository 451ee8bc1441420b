#include <benchmark/benchmark.h>

#include <random>

#include "drmoe/experts.hpp"
#include "drmoe/losses.hpp"
#include "drmoe/metrics.hpp"
#include "drmoe/trainer.hpp"

using namespace drmoe;

namespace {

Vec random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

void BM_AucLossSorted(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Vec pos = random_vec(rng, n), neg = random_vec(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(auc_loss_sorted(pos, neg, 1.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AucLossSorted)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

void BM_AucLossPairwise(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Vec pos = random_vec(rng, n), neg = random_vec(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(auc_loss_pairwise(pos, neg, SurrogateKind{}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AucLossPairwise)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

void BM_AucMetric(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Vec scores = random_vec(rng, n);
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 10 == 0 ? 1 : 0;
  for (auto _ : state) benchmark::DoNotOptimize(auc_metric(scores, labels));
}
BENCHMARK(BM_AucMetric)->Range(64, 16384);

void BM_FmoeForwardBackward(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto d_out = static_cast<std::size_t>(state.range(0));
  const FrozenExpert frozen = make_frozen_expert(d_out, 16, rng);
  LoraExpert lora = make_lora_expert(frozen.w0, 8, rng);
  const FMoeGate gate = make_gate(16, 16, GateMode::input_conditioned);
  const Vec x_ctx = random_vec(rng, 16), x_seg = random_vec(rng, 16), up = random_vec(rng, d_out);
  ExpertGrads grads = ExpertGrads::zeros_like(lora, gate);
  for (auto _ : state) {
    const FMoeForward f = fmoe_forward(frozen, lora, gate, x_ctx, x_seg);
    fmoe_backward(lora, gate, x_ctx, x_seg, f, up, grads);
    benchmark::DoNotOptimize(grads.b.values().data());
  }
}
BENCHMARK(BM_FmoeForwardBackward)->Arg(64)->Arg(256);

void BM_TrainEpoch(benchmark::State& state) {
  GenSpec g;
  g.n = static_cast<std::size_t>(state.range(0));
  const Dataset data = generate(g);
  TrainConfig cfg;
  cfg.adam.lr = 1e-3;
  TrainState st = init_training(ModelConfig{}, cfg, 0);
  for (auto _ : state) {
    // Replays the first phase-A epoch each iteration.
    TrainState copy = st;
    train_until(copy, data, cfg, 1);
    benchmark::DoNotOptimize(copy.model.lora.b.values().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainEpoch)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
