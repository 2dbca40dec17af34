#include "vevo/pipeline/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vevo/common/error.hpp"
#include "vevo/dsp/features.hpp"
#include "vevo/dsp/pitch.hpp"
#include "vevo/posttrain/prosody_reward.hpp"

namespace vevo::pipeline {

double fpc(std::span<const double> f0_a, std::span<const double> f0_b) {
  if (f0_a.empty() || f0_b.empty()) throw ParameterError("fpc: empty F0 sequence");
  const std::size_t n = std::min(f0_a.size(), f0_b.size());
  std::size_t count = 0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (f0_a[i] > 0.0 && f0_b[i] > 0.0) {
      ma += f0_a[i];
      mb += f0_b[i];
      ++count;
    }
  }
  if (count < kMinVoicedOverlap) throw ParameterError("fpc: fewer than 8 jointly voiced frames");
  ma /= static_cast<double>(count);
  mb /= static_cast<double>(count);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (f0_a[i] > 0.0 && f0_b[i] > 0.0) {
      const double da = f0_a[i] - ma, db = f0_b[i] - mb;
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
  }
  if (saa <= 0.0 || sbb <= 0.0) throw ParameterError("fpc: constant F0 over the voiced overlap");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double fpc(const dsp::Waveform& a, const dsp::Waveform& b) {
  const auto fa = dsp::estimate_f0(a), fb = dsp::estimate_f0(b);
  return fpc(std::span<const double>(fa), std::span<const double>(fb));
}

double chroma_similarity(const dsp::Waveform& a, const dsp::Waveform& b) {
  return posttrain::chroma_cosine(dsp::chromagram(a), dsp::chromagram(b));
}

}  // namespace vevo::pipeline
