#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vevo/common/error.hpp"
#include "vevo/dsp/features.hpp"

namespace vevo::dsp {
namespace {

constexpr double kSilencePower = 1e-10;
constexpr double kMinChromaHz = 40.0;

double magnitude_scale(const StftConfig& cfg) {
  const auto w = analysis_window(cfg);
  return 2.0 / std::accumulate(w.begin(), w.end(), 0.0);
}

}  // namespace

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kChromagram:
      return "chromagram";
    case FeatureKind::kMel:
      return "mel";
    case FeatureKind::kPseudoContent:
      return "pseudo_content";
  }
  return "unknown";
}

std::size_t FeatureMatrix::argmax(std::size_t i) const {
  const auto r = row(i);
  return static_cast<std::size_t>(std::distance(r.begin(), std::max_element(r.begin(), r.end())));
}

double chroma_position(double frequency_hz, int bins) {
  const double per_octave = static_cast<double>(bins);
  double pos = per_octave * std::log2(frequency_hz / 440.0) + 9.0 * per_octave / 12.0;
  pos = std::fmod(pos, per_octave);
  if (pos < 0.0) pos += per_octave;
  if (pos >= per_octave) pos -= per_octave;
  return pos;
}

FeatureMatrix chromagram(const Spectrum& spec, const StftConfig& cfg) {
  cfg.validate();
  const auto bins = static_cast<std::size_t>(cfg.num_chroma_bins);
  FeatureMatrix out(spec.num_frames, bins, FeatureKind::kChromagram, cfg.frame_rate());
  const double scale = magnitude_scale(cfg);
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
  const double max_hz = 0.5 * cfg.sample_rate * 0.95;

  std::vector<double> mag(spec.num_bins);
  std::vector<double> chroma(bins);
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    double total = 0.0;
    for (std::size_t k = 0; k < spec.num_bins; ++k) {
      mag[k] = std::abs(spec.at(t, k)) * scale;
      total += mag[k] * mag[k];
    }
    if (total < kSilencePower) continue;

    std::fill(chroma.begin(), chroma.end(), 0.0);
    for (std::size_t k = 1; k + 1 < spec.num_bins; ++k) {
      const double a = mag[k];
      if (!(a > mag[k - 1] && a >= mag[k + 1])) continue;
      // Two-bin Hann interpolation: offset d toward the larger neighbour is
      // (2b - a) / (a + b), exact for a stationary sinusoid.
      const bool right = mag[k + 1] >= mag[k - 1];
      const double b = right ? mag[k + 1] : mag[k - 1];
      const double d = std::clamp((2.0 * b - a) / (a + b), 0.0, 0.5);
      const double freq = (static_cast<double>(k) + (right ? d : -d)) * bin_hz;
      if (freq < kMinChromaHz || freq > max_hz) continue;
      const double energy = mag[k - 1] * mag[k - 1] + a * a + mag[k + 1] * mag[k + 1];
      const double pos = chroma_position(freq, cfg.num_chroma_bins);
      const auto lo = static_cast<std::size_t>(std::floor(pos)) % bins;
      const double frac = pos - std::floor(pos);
      chroma[lo] += energy * (1.0 - frac);
      chroma[(lo + 1) % bins] += energy * frac;
    }
    const double peak = *std::max_element(chroma.begin(), chroma.end());
    if (peak <= 0.0) continue;
    auto row = out.row(t);
    for (std::size_t c = 0; c < bins; ++c) row[c] = static_cast<float>(chroma[c] / peak);
  }
  return out;
}

FeatureMatrix chromagram(const Waveform& w, const StftConfig& cfg) {
  if (w.empty()) throw ParameterError("chromagram: empty waveform");
  return chromagram(stft(w.samples, cfg), cfg);
}

double hz_to_mel(double hz) {
  constexpr double kLinearStep = 200.0 / 3.0;
  constexpr double kBreakHz = 1000.0;
  const double break_mel = kBreakHz / kLinearStep;
  const double log_step = std::log(6.4) / 27.0;
  if (hz < kBreakHz) return hz / kLinearStep;
  return break_mel + std::log(hz / kBreakHz) / log_step;
}

double mel_to_hz(double mel) {
  constexpr double kLinearStep = 200.0 / 3.0;
  constexpr double kBreakHz = 1000.0;
  const double break_mel = kBreakHz / kLinearStep;
  const double log_step = std::log(6.4) / 27.0;
  if (mel < break_mel) return mel * kLinearStep;
  return kBreakHz * std::exp(log_step * (mel - break_mel));
}

std::vector<double> mel_filterbank(const StftConfig& cfg) {
  cfg.validate();
  const auto n_mels = static_cast<std::size_t>(cfg.num_mel_bins);
  const auto n_bins = static_cast<std::size_t>(cfg.n_fft / 2 + 1);
  const double top = hz_to_mel(0.5 * cfg.sample_rate);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  std::vector<double> fb(n_mels * n_bins, 0.0);
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double v = 0.0;
      if (f > lo && f <= mid) v = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) v = (hi - f) / (hi - mid);
      fb[m * n_bins + k] = v;
    }
  }
  return fb;
}

FeatureMatrix mel_spectrogram(const Spectrum& spec, const StftConfig& cfg) {
  const auto fb = mel_filterbank(cfg);
  const auto n_mels = static_cast<std::size_t>(cfg.num_mel_bins);
  const double scale = magnitude_scale(cfg);
  FeatureMatrix out(spec.num_frames, n_mels, FeatureKind::kMel, cfg.frame_rate());
  std::vector<double> mag(spec.num_bins);
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    for (std::size_t k = 0; k < spec.num_bins; ++k) mag[k] = std::abs(spec.at(t, k)) * scale;
    for (std::size_t m = 0; m < n_mels; ++m) {
      double acc = 0.0;
      const double* w = fb.data() + m * spec.num_bins;
      for (std::size_t k = 0; k < spec.num_bins; ++k) acc += w[k] * mag[k];
      out.at(t, m) = static_cast<float>(std::log(std::max(acc, static_cast<double>(kLogMelFloor))));
    }
  }
  return out;
}

FeatureMatrix mel_spectrogram(const Waveform& w, const StftConfig& cfg) {
  if (w.empty()) throw ParameterError("mel_spectrogram: empty waveform");
  return mel_spectrogram(stft(w.samples, cfg), cfg);
}

std::vector<float> pseudo_content_projection(int num_mel_bins) {
  std::mt19937 rng(kPseudoContentSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> w(static_cast<std::size_t>(num_mel_bins) * kPseudoContentDim);
  for (auto& v : w) v = static_cast<float>(normal(rng));
  return w;
}

FeatureMatrix project_pseudo_content(const FeatureMatrix& mel) {
  if (mel.kind != FeatureKind::kMel) throw ParameterError("project_pseudo_content: expected mel input");
  const auto n_mels = mel.dim;
  const auto proj = pseudo_content_projection(static_cast<int>(n_mels));
  const std::size_t d = kPseudoContentDim;
  std::vector<double> col_sum(d, 0.0), col_norm(d, 0.0);
  for (std::size_t i = 0; i < n_mels; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double v = proj[i * d + j];
      col_sum[j] += v;
      col_norm[j] += v * v;
    }
  }
  for (auto& v : col_norm) v = std::sqrt(v);

  FeatureMatrix out(mel.num_frames, d, FeatureKind::kPseudoContent, mel.frame_rate);
  for (std::size_t t = 0; t < mel.num_frames; ++t) {
    const auto m = mel.row(t);
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n_mels; ++i) acc += static_cast<double>(m[i]) * proj[i * d + j];
      out.at(t, j) = static_cast<float>((acc - kLogMelRefMean * col_sum[j]) / (kLogMelRefStd * col_norm[j]));
    }
  }
  return out;
}

FeatureMatrix pseudo_content_features(const Waveform& w, const StftConfig& cfg) {
  return project_pseudo_content(mel_spectrogram(w, cfg));
}

FeatureMatrix time_scale_features(const FeatureMatrix& f, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ParameterError("time_scale_features: factor must be positive");
  }
  if (f.empty()) throw ParameterError("time_scale_features: empty feature matrix");
  const auto n_in = f.num_frames;
  const auto n_out = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(static_cast<double>(n_in) * factor)));
  FeatureMatrix out(n_out, f.dim, f.kind, f.frame_rate);
  if (n_out == n_in) {
    out.data = f.data;
    return out;
  }
  const double step = n_out > 1 ? static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1) : 0.0;
  for (std::size_t j = 0; j < n_out; ++j) {
    const double src = static_cast<double>(j) * step;
    const auto lo = std::min(static_cast<std::size_t>(std::floor(src)), n_in - 1);
    const auto hi = std::min(lo + 1, n_in - 1);
    const double frac = src - static_cast<double>(lo);
    const auto a = f.row(lo);
    const auto b = f.row(hi);
    auto o = out.row(j);
    for (std::size_t c = 0; c < f.dim; ++c) {
      o[c] = static_cast<float>((1.0 - frac) * a[c] + frac * b[c]);
    }
  }
  return out;
}

}  // namespace vevo::dsp
