#include <benchmark/benchmark.h>

#include "vevo/dsp/features.hpp"
#include "vevo/dsp/pitch.hpp"

namespace {

using namespace vevo;

void BM_Stft(benchmark::State& state) {
  const auto wav = dsp::make_tone(220.0, static_cast<double>(state.range(0)));
  const dsp::StftConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(dsp::stft(wav.samples, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(wav.samples.size()));
}
BENCHMARK(BM_Stft)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Chromagram(benchmark::State& state) {
  const auto wav = dsp::make_tone(220.0, static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dsp::chromagram(wav));
}
BENCHMARK(BM_Chromagram)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_MelSpectrogram(benchmark::State& state) {
  const auto wav = dsp::make_tone(220.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::mel_spectrogram(wav));
}
BENCHMARK(BM_MelSpectrogram)->Unit(benchmark::kMillisecond);

void BM_EstimateF0(benchmark::State& state) {
  const auto wav = dsp::make_tone(220.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::estimate_f0(wav));
}
BENCHMARK(BM_EstimateF0)->Unit(benchmark::kMillisecond);

}  // namespace
