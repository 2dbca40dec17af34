#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "vevo/common/error.hpp"
#include "vevo/dsp/pitch.hpp"

namespace vevo::dsp {
namespace {

// Linear-magnitude spectrogram whose mel projection best matches `mel`.
Spectrum invert_mel(const FeatureMatrix& mel, const StftConfig& cfg) {
  const auto fb = mel_filterbank(cfg);
  const auto n_mels = static_cast<Eigen::Index>(cfg.num_mel_bins);
  const auto n_bins = static_cast<Eigen::Index>(cfg.n_fft / 2 + 1);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> basis(
      fb.data(), n_mels, n_bins);
  Eigen::MatrixXd gram = basis * basis.transpose();
  const double ridge = 1e-4 * gram.trace() / static_cast<double>(n_mels);
  gram.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);

  const auto window = analysis_window(cfg);
  const double unscale = std::accumulate(window.begin(), window.end(), 0.0) / 2.0;

  Spectrum spec;
  spec.num_frames = mel.num_frames;
  spec.num_bins = static_cast<std::size_t>(n_bins);
  spec.data.resize(spec.num_frames * spec.num_bins);
  Eigen::VectorXd y(n_mels);
  for (std::size_t t = 0; t < mel.num_frames; ++t) {
    for (Eigen::Index m = 0; m < n_mels; ++m) {
      y(m) = std::max(std::exp(static_cast<double>(mel.at(t, static_cast<std::size_t>(m)))) - kLogMelFloor, 0.0);
    }
    const Eigen::VectorXd x = basis.transpose() * solver.solve(y);
    for (Eigen::Index k = 0; k < n_bins; ++k) {
      spec.at(t, static_cast<std::size_t>(k)) = std::max(x(k), 0.0) * unscale;
    }
  }
  return spec;
}

}  // namespace

Waveform griffin_lim(const FeatureMatrix& mel, const StftConfig& cfg, const GriffinLimConfig& gl) {
  if (mel.kind != FeatureKind::kMel) throw ParameterError("griffin_lim: expected a mel feature matrix");
  if (gl.iters < 1) throw ParameterError("griffin_lim: iters must be >= 1");
  if (mel.dim != static_cast<std::size_t>(cfg.num_mel_bins)) {
    throw ShapeError("griffin_lim: mel dim does not match config");
  }
  if (mel.empty()) return {{}, cfg.sample_rate};
  const Spectrum target = invert_mel(mel, cfg);
  const std::size_t length = (mel.num_frames - 1) * static_cast<std::size_t>(cfg.hop);

  std::mt19937_64 rng(gl.seed);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<std::complex<double>> angles(target.data.size());
  for (auto& a : angles) a = std::polar(1.0, uniform(rng));

  Spectrum work = target;
  std::vector<std::complex<double>> previous(target.data.size(), 0.0);
  const double m = gl.momentum / (1.0 + gl.momentum);
  for (int it = 0; it < gl.iters; ++it) {
    for (std::size_t i = 0; i < work.data.size(); ++i) work.data[i] = std::abs(target.data[i]) * angles[i];
    const auto signal = istft(work, cfg, length);
    const Spectrum rebuilt = stft(signal, cfg);
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const auto r = i < rebuilt.data.size() ? rebuilt.data[i] : std::complex<double>{};
      auto a = r - m * previous[i];
      const double mag = std::abs(a);
      angles[i] = mag > 1e-16 ? a / mag : std::complex<double>(1.0, 0.0);
      previous[i] = r;
    }
  }
  for (std::size_t i = 0; i < work.data.size(); ++i) work.data[i] = std::abs(target.data[i]) * angles[i];
  // N frames at the hop rate span N hops; the tail is covered by the last window.
  return {istft(work, cfg, mel.num_frames * static_cast<std::size_t>(cfg.hop)), cfg.sample_rate};
}

Waveform griffin_lim(const FeatureMatrix& mel, const StftConfig& cfg, int iters) {
  GriffinLimConfig gl;
  gl.iters = iters;
  return griffin_lim(mel, cfg, gl);
}

}  // namespace vevo::dsp
