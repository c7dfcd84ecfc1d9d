#include <benchmark/benchmark.h>

#include <random>

#include "sqpf/encoder.hpp"
#include "sqpf/metrics.hpp"
#include "sqpf/prototype.hpp"
#include "sqpf/tensor.hpp"

namespace {

using namespace sqpf;

RealGrid random_image(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  RealGrid g(n, n);
  for (double& v : g.raw()) v = dist(rng);
  return g;
}

RealGrid blob_mask(int n) {
  RealGrid m(n, n, 0.0);
  for (int r = n / 4; r < 3 * n / 4; ++r)
    for (int c = n / 4; c < 3 * n / 4; ++c) m(r, c) = 1.0;
  return m;
}

Tensor random_features(int c, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  std::vector<double> v(static_cast<size_t>(c) * n * n);
  for (double& e : v) e = dist(rng);
  return Tensor::from_values({c, n, n}, std::move(v));
}

void BM_MapPool(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor f = random_features(32, n, 1);
  const RealGrid m = blob_mask(n);
  for (auto _ : state) benchmark::DoNotOptimize(map_pool(f, m));
}
BENCHMARK(BM_MapPool)->Arg(16)->Arg(64);

void BM_CosineMap(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor f = random_features(32, n, 2);
  const Tensor p = random_features(32, 1, 3);
  const Tensor proto = Tensor::from_values({32}, {p.values().begin(), p.values().end()});
  for (auto _ : state) benchmark::DoNotOptimize(cosine_map(f, proto));
}
BENCHMARK(BM_CosineMap)->Arg(16)->Arg(64);

void BM_EncodeTiny(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Encoder enc({EncoderKind::kTiny, 32, 4, ""}, 7);
  const RealGrid img = random_image(n, 4);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(enc.encode(img));
}
BENCHMARK(BM_EncodeTiny)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SqpfForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor fs = random_features(32, n, 5);
  const Tensor fq = random_features(32, n, 6);
  const RealGrid mask = blob_mask(n);
  const PipelineConfig cfg;
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(sqpf_forward({{fs, mask}}, fq, cfg));
}
BENCHMARK(BM_SqpfForward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Dice(benchmark::State& state) {
  std::mt19937_64 rng(9);
  std::bernoulli_distribution bit(0.3);
  MaskGrid a(256, 256), b(256, 256);
  for (auto& v : a.raw()) v = bit(rng);
  for (auto& v : b.raw()) v = bit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(dice_score(a, b));
}
BENCHMARK(BM_Dice);

}  // namespace

BENCHMARK_MAIN();
