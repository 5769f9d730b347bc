#include <benchmark/benchmark.h>

#include <random>

#include "dewp/model.hpp"
#include "dewp/train.hpp"

namespace {

using namespace dewp;

ModelConfig bench_config(int stacks, int d_v) {
  ModelConfig cfg;
  cfg.d = 5;
  cfg.lookback = 24;
  cfg.horizon = 12;
  cfg.d_v = d_v;
  cfg.stacks = stacks;
  cfg.conv_channels = d_v;
  cfg.heads = 2;
  cfg.embed_dim_month = 4;
  cfg.embed_dim_weekday = 4;
  cfg.embed_dim_hour = 4;
  return cfg;
}

WindowSample bench_sample(const ModelConfig& cfg) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  WindowSample s;
  s.origin_hour = 405624;
  for (int v = 0; v < cfg.d; ++v) {
    std::vector<double> row(static_cast<std::size_t>(cfg.lookback));
    for (double& x : row) x = dist(rng);
    s.lookback.push_back(std::move(row));
  }
  for (int t = 0; t < cfg.lookback; ++t) {
    s.time_features.push_back(time_features_of_hour(s.origin_hour - cfg.lookback + t));
  }
  for (int h = 0; h < cfg.horizon; ++h) s.target.push_back(dist(rng));
  return s;
}

void BM_Conv1d(benchmark::State& state) {
  const int channels = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> xv(static_cast<std::size_t>(channels) * 24);
  for (double& v : xv) v = dist(rng);
  std::vector<double> kv(static_cast<std::size_t>(channels) * channels * 3);
  for (double& v : kv) v = dist(rng);
  Tensor x = Tensor::from({channels, 24}, std::move(xv));
  Tensor k = Tensor::from({channels, channels, 3}, std::move(kv));
  Tensor b = Tensor::zeros({channels});
  for (auto _ : state) {
    Tensor y = conv1d(x, k, b);
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_Conv1d)->Arg(8)->Arg(32)->Arg(128);

void BM_Forward(benchmark::State& state) {
  ModelConfig cfg = bench_config(static_cast<int>(state.range(0)), 16);
  DewpModel model(cfg, 3);
  WindowSample sample = bench_sample(cfg);
  for (auto _ : state) {
    ForwardResult r = model.forward(sample);
    benchmark::DoNotOptimize(r.prediction.values().data());
  }
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(5);

void BM_ForwardBackward(benchmark::State& state) {
  ModelConfig cfg = bench_config(static_cast<int>(state.range(0)), 16);
  DewpModel model(cfg, 3);
  WindowSample sample = bench_sample(cfg);
  Tensor target = Tensor::from({cfg.horizon}, sample.target);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = mse_loss(model.forward(sample).prediction, target);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(5);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg = bench_config(2, 16);
  DewpModel model(cfg, 3);
  WindowSample sample = bench_sample(cfg);
  Tensor target = Tensor::from({cfg.horizon}, sample.target);
  TrainConfig tc;
  auto params = model.parameters();
  OptimizerState opt = init_adam_state(params);
  for (auto _ : state) {
    Tape tape;
    {
      TapeScope scope(tape);
      Tensor loss = mse_loss(model.forward(sample).prediction, target);
      tape.backward(loss);
    }
    adam_step(params, opt, tc);
    benchmark::DoNotOptimize(opt.t);
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
