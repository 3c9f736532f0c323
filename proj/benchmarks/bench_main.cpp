#include <benchmark/benchmark.h>

#include <random>

#include "pgait/gps.hpp"
#include "pgait/metrics.hpp"
#include "pgait/model.hpp"
#include "pgait/ops.hpp"
#include "pgait/synth.hpp"

namespace {

using pgait::ad::Tensor;

Tensor<float> random_tensor(pgait::ad::Shape s, bool grad, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(pgait::ad::numel(s)));
  for (auto& x : v) x = n(rng);
  return Tensor<float>::from_data(std::move(s), std::move(v), grad);
}

void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  auto x = random_tensor({30, c, 64, 44}, false, 1);
  auto w = random_tensor({c, c, 3, 3}, false, 2);
  for (auto _ : state) benchmark::DoNotOptimize(pgait::ad::conv2d(x, w, {1, 1}));
  state.SetItemsProcessed(state.iterations() * 30);
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  auto x = random_tensor({30, c, 64, 44}, true, 1);
  auto w = random_tensor({c, c, 3, 3}, true, 2);
  for (auto _ : state) {
    auto y = pgait::ad::sum(pgait::ad::conv2d(x, w, {1, 1}));
    y.backward();
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Unit(benchmark::kMillisecond);

pgait::GaitParsingSequence walk(int frames) {
  std::mt19937_64 rng(3);
  return pgait::render_walk_sequence(pgait::generate_identity(0, 0), {}, frames, {}, rng);
}

void BM_GpsEncode(benchmark::State& state) {
  const auto s = walk(30);
  for (auto _ : state) benchmark::DoNotOptimize(pgait::encode_gps(s));
  state.SetItemsProcessed(state.iterations() * 30);
}
BENCHMARK(BM_GpsEncode);

void BM_GpsDecode(benchmark::State& state) {
  const auto bytes = pgait::encode_gps(walk(30));
  for (auto _ : state) benchmark::DoNotOptimize(pgait::decode_gps(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_GpsDecode);

void BM_ModelEmbed(benchmark::State& state) {
  pgait::ModelConfig c;
  c.widths = {16, 16, 32, 64};
  c.embedding_dim = 64;
  const pgait::ParsingGaitModel model(c, 0);
  const auto s = walk(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model.embed(s));
}
BENCHMARK(BM_ModelEmbed)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_DistanceMatrix(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n(0.0f, 1.0f);
  pgait::EmbeddingSet q, g;
  for (int i = 0; i < 200; ++i) {
    pgait::Embedding e{36, 128, {}};
    for (int k = 0; k < 36 * 128; ++k) e.values.push_back(n(rng));
    (i < 20 ? q : g).add(std::to_string(i), "s", e);
  }
  for (auto _ : state) benchmark::DoNotOptimize(pgait::distance_matrix(q, g));
}
BENCHMARK(BM_DistanceMatrix)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
