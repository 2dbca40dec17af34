#include <algorithm>
#include <cmath>
#include <numbers>

#include "vevo/common/error.hpp"
#include "vevo/dsp/pitch.hpp"

namespace vevo::dsp {
namespace {

double wrap_phase(double p) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  p = std::fmod(p + std::numbers::pi, kTwoPi);
  if (p < 0.0) p += kTwoPi;
  return p - std::numbers::pi;
}

StftConfig vocoder_config() {
  StftConfig cfg;
  cfg.n_fft = 1024;
  cfg.win = 1024;
  cfg.hop = 256;
  return cfg;
}

}  // namespace

std::vector<double> estimate_f0(const Waveform& w, const F0Config& cfg) {
  if (w.empty()) throw ParameterError("estimate_f0: empty waveform");
  if (cfg.min_hz <= 0.0 || cfg.max_hz <= cfg.min_hz) throw ParameterError("estimate_f0: bad F0 range");
  const double sr = w.sample_rate;
  const auto min_lag = static_cast<std::ptrdiff_t>(std::floor(sr / cfg.max_hz));
  const auto max_lag = static_cast<std::ptrdiff_t>(std::ceil(sr / cfg.min_hz));
  const std::ptrdiff_t span = max_lag;  // comparison length
  const std::ptrdiff_t total = span + max_lag + 1;
  const auto n = static_cast<std::ptrdiff_t>(w.samples.size());
  const std::size_t frames = w.samples.size() / static_cast<std::size_t>(cfg.hop) + 1;

  std::vector<double> f0(frames, 0.0);
  std::vector<double> seg(static_cast<std::size_t>(total));
  std::vector<double> r(static_cast<std::size_t>(max_lag + 2), 0.0);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(i) * cfg.hop - total / 2;
    double energy = 0.0;
    for (std::ptrdiff_t j = 0; j < total; ++j) {
      const std::ptrdiff_t idx = start + j;
      const double v = (idx >= 0 && idx < n) ? w.samples[static_cast<std::size_t>(idx)] : 0.0;
      seg[static_cast<std::size_t>(j)] = v;
      energy += v * v;
    }
    if (std::sqrt(energy / static_cast<double>(total)) < cfg.silence_rms) continue;

    double e0 = 0.0;
    for (std::ptrdiff_t j = 0; j < span; ++j) e0 += seg[j] * seg[j];
    double etau = 0.0;
    for (std::ptrdiff_t j = min_lag - 1; j < min_lag - 1 + span; ++j) etau += seg[j] * seg[j];
    double best = -1.0;
    for (std::ptrdiff_t lag = min_lag - 1; lag <= max_lag + 1 && lag + span <= total; ++lag) {
      if (lag > min_lag - 1) {
        etau += seg[lag + span - 1] * seg[lag + span - 1] - seg[lag - 1] * seg[lag - 1];
      }
      double acc = 0.0;
      for (std::ptrdiff_t j = 0; j < span; ++j) acc += seg[j] * seg[j + lag];
      const double denom = std::sqrt(e0 * std::max(etau, 0.0));
      r[static_cast<std::size_t>(lag)] = denom > 1e-20 ? acc / denom : 0.0;
      if (lag >= min_lag && lag <= max_lag) best = std::max(best, r[static_cast<std::size_t>(lag)]);
    }
    if (best < cfg.voicing_threshold) continue;

    // Shortest lag whose local peak is close to the global best avoids
    // sub-octave errors on strongly periodic input.
    for (std::ptrdiff_t lag = min_lag; lag <= max_lag; ++lag) {
      const double c = r[static_cast<std::size_t>(lag)];
      const double l = r[static_cast<std::size_t>(lag - 1)];
      const double h = r[static_cast<std::size_t>(lag + 1)];
      if (c >= l && c >= h && c >= 0.9 * best) {
        const double denom = l - 2.0 * c + h;
        const double delta = std::abs(denom) > 1e-12 ? std::clamp(0.5 * (l - h) / denom, -0.5, 0.5) : 0.0;
        f0[i] = sr / (static_cast<double>(lag) + delta);
        break;
      }
    }
  }
  return f0;
}

double median_voiced(const std::vector<double>& f0) {
  std::vector<double> voiced;
  for (double v : f0) {
    if (v > 0.0) voiced.push_back(v);
  }
  if (voiced.empty()) return 0.0;
  const auto mid = voiced.size() / 2;
  std::nth_element(voiced.begin(), voiced.begin() + static_cast<std::ptrdiff_t>(mid), voiced.end());
  if (voiced.size() % 2 == 1) return voiced[mid];
  const double upper = voiced[mid];
  const double lower = *std::max_element(voiced.begin(), voiced.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<float> time_stretch(std::span<const float> x, std::size_t out_length) {
  if (x.empty() || out_length == 0) return std::vector<float>(out_length, 0.0f);
  const StftConfig cfg = vocoder_config();
  const Spectrum in = stft(x, cfg);
  const double rate = static_cast<double>(x.size()) / static_cast<double>(out_length);

  Spectrum out;
  out.num_bins = in.num_bins;
  out.num_frames = cfg.num_frames(out_length);
  out.data.resize(out.num_frames * out.num_bins);

  const std::size_t last = in.num_frames - 1;
  std::vector<double> phase(in.num_bins);
  for (std::size_t k = 0; k < in.num_bins; ++k) phase[k] = std::arg(in.at(0, k));
  for (std::size_t j = 0; j < out.num_frames; ++j) {
    const double t = static_cast<double>(j) * rate;
    const auto lo = std::min(static_cast<std::size_t>(std::floor(t)), last);
    const auto hi = std::min(lo + 1, last);
    const double alpha = std::min(t - static_cast<double>(lo), 1.0);
    for (std::size_t k = 0; k < in.num_bins; ++k) {
      const double mag = (1.0 - alpha) * std::abs(in.at(lo, k)) + alpha * std::abs(in.at(hi, k));
      out.at(j, k) = std::polar(mag, phase[k]);
      const double expected = 2.0 * std::numbers::pi * static_cast<double>(k) * cfg.hop / cfg.n_fft;
      const double dphi = hi == lo ? 0.0 : wrap_phase(std::arg(in.at(hi, k)) - std::arg(in.at(lo, k)) - expected);
      phase[k] += expected + dphi;
    }
  }
  return istft(out, cfg, out_length);
}

Waveform pitch_shift(const Waveform& w, double semitones) {
  if (!std::isfinite(semitones) || std::abs(semitones) > kMaxPitchShiftSemitones) {
    throw ParameterError("pitch_shift: |semitones| must be <= 24");
  }
  if (w.empty() || semitones == 0.0) return w;
  const double ratio = std::exp2(semitones / 12.0);
  const double sr = w.sample_rate;
  // Reading the input `ratio` times faster raises pitch and shortens it;
  // the stretch then restores the original length.
  const auto squeezed = resample(w.samples, sr * ratio, sr);
  return {time_stretch(squeezed, w.samples.size()), w.sample_rate};
}

}  // namespace vevo::dsp
