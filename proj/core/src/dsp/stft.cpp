#include <cmath>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "vevo/common/error.hpp"
#include "vevo/dsp/features.hpp"

namespace vevo::dsp {

void StftConfig::validate() const {
  if (n_fft <= 0 || hop <= 0 || win <= 0) throw ParameterError("StftConfig: sizes must be positive");
  if (win > n_fft) throw ParameterError("StftConfig: win must not exceed n_fft");
  if (hop > win) throw ParameterError("StftConfig: hop must not exceed win");
  if (num_chroma_bins <= 0 || num_chroma_bins % 12 != 0) {
    throw ParameterError("StftConfig: num_chroma_bins must be a positive multiple of 12");
  }
  if (num_mel_bins <= 0) throw ParameterError("StftConfig: num_mel_bins must be positive");
  if (sample_rate <= 0) throw ParameterError("StftConfig: sample_rate must be positive");
}

std::size_t StftConfig::num_frames(std::size_t num_samples) const {
  return num_samples / static_cast<std::size_t>(hop) + 1;
}

std::vector<double> analysis_window(const StftConfig& cfg) {
  std::vector<double> w(static_cast<std::size_t>(cfg.n_fft), 0.0);
  const int offset = (cfg.n_fft - cfg.win) / 2;
  for (int i = 0; i < cfg.win; ++i) {
    w[static_cast<std::size_t>(offset + i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.win);
  }
  return w;
}

Spectrum stft(std::span<const float> x, const StftConfig& cfg) {
  cfg.validate();
  const auto n_fft = static_cast<std::size_t>(cfg.n_fft);
  const auto hop = static_cast<std::ptrdiff_t>(cfg.hop);
  const auto window = analysis_window(cfg);

  Spectrum spec;
  spec.num_frames = cfg.num_frames(x.size());
  spec.num_bins = n_fft / 2 + 1;
  spec.data.resize(spec.num_frames * spec.num_bins);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(n_fft);
  std::vector<std::complex<double>> bins;
  const auto len = static_cast<std::ptrdiff_t>(x.size());
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * hop - static_cast<std::ptrdiff_t>(n_fft / 2);
    for (std::size_t j = 0; j < n_fft; ++j) {
      const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(j);
      frame[j] = (idx >= 0 && idx < len) ? x[static_cast<std::size_t>(idx)] * window[j] : 0.0;
    }
    fft.fwd(bins, frame);
    std::copy_n(bins.begin(), spec.num_bins, spec.data.begin() + static_cast<std::ptrdiff_t>(t * spec.num_bins));
  }
  return spec;
}

std::vector<float> istft(const Spectrum& spec, const StftConfig& cfg, std::size_t length) {
  cfg.validate();
  const auto n_fft = static_cast<std::size_t>(cfg.n_fft);
  if (spec.num_bins != n_fft / 2 + 1) throw ShapeError("istft: bin count does not match n_fft");
  const auto window = analysis_window(cfg);
  const auto hop = static_cast<std::ptrdiff_t>(cfg.hop);
  const auto half = static_cast<std::ptrdiff_t>(n_fft / 2);

  std::vector<double> acc(length, 0.0);
  std::vector<double> norm(length, 0.0);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> bins(spec.num_bins);
  std::vector<double> frame;
  const auto len = static_cast<std::ptrdiff_t>(length);
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    std::copy_n(spec.data.begin() + static_cast<std::ptrdiff_t>(t * spec.num_bins), spec.num_bins, bins.begin());
    fft.inv(frame, bins, static_cast<Eigen::Index>(n_fft));
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * hop - half;
    for (std::size_t j = 0; j < n_fft; ++j) {
      const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(j);
      if (idx < 0 || idx >= len) continue;
      acc[static_cast<std::size_t>(idx)] += frame[j] * window[j];
      norm[static_cast<std::size_t>(idx)] += window[j] * window[j];
    }
  }
  std::vector<float> y(length);
  for (std::size_t i = 0; i < length; ++i) {
    y[i] = norm[i] > 1e-8 ? static_cast<float>(acc[i] / norm[i]) : 0.0f;
  }
  return y;
}

}  // namespace vevo::dsp
