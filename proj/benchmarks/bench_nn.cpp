#include <benchmark/benchmark.h>

#include <random>

#include "vevo/nn/layers.hpp"
#include "vevo/nn/ops.hpp"
#include "vevo/tokenizer/codebook.hpp"

namespace {

using namespace vevo;

void BM_Quantize(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t kRows = 256, kDim = 8;
  nn::Rng rng(1);
  const auto cb = tokenizer::Codebook<float>::random(k, kDim, rng);
  std::normal_distribution<float> g;
  std::vector<float> z(kRows * kDim);
  for (auto& v : z) v = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(tokenizer::nearest_ids(std::span<const float>(z), kRows, cb));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kRows));
}
BENCHMARK(BM_Quantize)->Arg(64)->Arg(1024)->Arg(16384);

void BM_Attention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t kWidth = 128, kHeads = 4;
  nn::Rng rng(2);
  const auto q = nn::truncated_normal<float>({n, kWidth}, 1.0f, rng, false);
  const auto k = nn::truncated_normal<float>({n, kWidth}, 1.0f, rng, false);
  const auto v = nn::truncated_normal<float>({n, kWidth}, 1.0f, rng, false);
  for (auto _ : state) benchmark::DoNotOptimize(nn::attention(q, k, v, kHeads, true));
}
BENCHMARK(BM_Attention)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_AttentionBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t kWidth = 128, kHeads = 4;
  nn::Rng rng(3);
  auto q = nn::truncated_normal<float>({n, kWidth}, 1.0f, rng, true);
  auto k = nn::truncated_normal<float>({n, kWidth}, 1.0f, rng, true);
  auto v = nn::truncated_normal<float>({n, kWidth}, 1.0f, rng, true);
  for (auto _ : state) {
    nn::sum(nn::attention(q, k, v, kHeads, true)).backward();
    for (auto* t : {&q, &k, &v}) t->zero_grad();
  }
}
BENCHMARK(BM_AttentionBackward)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace
