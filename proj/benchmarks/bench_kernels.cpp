#include <benchmark/benchmark.h>

#include <random>
#include <span>

#include "pcdu/contrastive.hpp"
#include "pcdu/data.hpp"
#include "pcdu/encoders.hpp"
#include "pcdu/pointops.hpp"

using namespace pcdu;

namespace {

PointCloud cloud(std::size_t n) {
  SynthSpec s;
  s.healthy = 0;
  s.aneurysm = 1;
  s.points = n;
  return gen_synthetic(s, 1).samples[0].cloud;
}

void BM_FarthestPointSample(benchmark::State& state) {
  const auto c = cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(farthest_point_sample(c.coords, c.size() / 2));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FarthestPointSample)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void BM_KnnGroup(benchmark::State& state) {
  const auto c = cloud(1024);
  const auto picks = farthest_point_sample(c.coords, 512);
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(knn_group(c, picks, k));
}
BENCHMARK(BM_KnnGroup)->Arg(16)->Arg(32)->Arg(64);

void BM_NtXent(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 g(3);
  std::normal_distribution<double> nd;
  Tensor z({rows, 128});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = nd(g);
  for (auto _ : state) benchmark::DoNotOptimize(ntxent_loss(z));
}
BENCHMARK(BM_NtXent)->Arg(16)->Arg(64);

void BM_EncoderForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const bool full = state.range(1) != 0;
  const ModelConfig cfg = full ? ModelConfig::full(Task::Classification, n) : ModelConfig::small(Task::Classification, n);
  EncoderModel model(cfg, 5);
  const auto c = cloud(n);
  for (auto _ : state) benchmark::DoNotOptimize(model.represent(std::span<const PointCloud>(&c, 1), Mode::Eval));
  state.SetLabel(full ? "full widths" : "small widths");
}
BENCHMARK(BM_EncoderForward)->Args({128, 0})->Args({1024, 1})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
