#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "vevo/common/rational.hpp"
#include "vevo/dsp/waveform.hpp"

namespace vevo::dsp {

/// STFT grid shared by every frame-level feature. Frames are centred
/// (zero padding of n_fft/2 on both sides), so a signal of N samples yields
/// floor(N / hop) + 1 frames; at 24 kHz with hop 480 that is 50 frames/s.
struct StftConfig {
  int n_fft = 1920;
  int hop = 480;
  int win = 1920;
  int num_chroma_bins = 24;
  int num_mel_bins = 80;
  int sample_rate = kSampleRate;

  void validate() const;
  [[nodiscard]] Rational frame_rate() const { return {sample_rate, hop}; }
  [[nodiscard]] std::size_t num_frames(std::size_t num_samples) const;
};

enum class FeatureKind : std::uint32_t { kChromagram = 0, kMel = 1, kPseudoContent = 2 };

const char* to_string(FeatureKind kind);

/// Time-major feature frames, row-major [num_frames x dim].
struct FeatureMatrix {
  std::size_t num_frames = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  Rational frame_rate{50, 1};
  FeatureKind kind = FeatureKind::kChromagram;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t frames, std::size_t d, FeatureKind k, Rational rate = {50, 1})
      : num_frames(frames), dim(d), data(frames * d, 0.0f), frame_rate(rate), kind(k) {}

  [[nodiscard]] std::span<float> row(std::size_t i) { return {data.data() + i * dim, dim}; }
  [[nodiscard]] std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
  float& at(std::size_t i, std::size_t j) { return data[i * dim + j]; }
  [[nodiscard]] float at(std::size_t i, std::size_t j) const { return data[i * dim + j]; }
  [[nodiscard]] bool empty() const { return num_frames == 0; }
  /// Column index of the largest entry in frame i (lowest index on ties).
  [[nodiscard]] std::size_t argmax(std::size_t i) const;
};

/// Complex half-spectrum frames, [num_frames x (n_fft/2 + 1)].
struct Spectrum {
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(std::size_t t, std::size_t k) { return data[t * num_bins + k]; }
  [[nodiscard]] const std::complex<double>& at(std::size_t t, std::size_t k) const {
    return data[t * num_bins + k];
  }
};

/// Periodic Hann window of length `win`, zero-padded and centred to n_fft.
std::vector<double> analysis_window(const StftConfig& cfg);

Spectrum stft(std::span<const float> x, const StftConfig& cfg);

/// Weighted overlap-add inverse of stft(); output is trimmed to `length`.
std::vector<float> istft(const Spectrum& spec, const StftConfig& cfg, std::size_t length);

/// Fractional pitch-class position in [0, bins) of a frequency, with bin 0 = C
/// and A4 = 440 Hz (bins/12 bins per semitone).
double chroma_position(double frequency_hz, int bins = 24);

/// 24-bin chromagram at the STFT frame rate. Each spectral peak is refined to
/// sub-bin frequency (Hann two-bin ratio), its lobe energy is split linearly
/// between the two nearest chroma bins, and each frame is L-inf normalised.
/// Frames with total power below 1e-10 are all-zero.
FeatureMatrix chromagram(const Waveform& w, const StftConfig& cfg = {});
FeatureMatrix chromagram(const Spectrum& spec, const StftConfig& cfg);

inline constexpr float kLogMelFloor = 1e-5f;

/// Slaney-scale triangular filters (unit peak), [num_mel_bins x (n_fft/2+1)].
std::vector<double> mel_filterbank(const StftConfig& cfg);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Natural-log mel magnitudes, floored at ln(1e-5). Magnitudes are scaled by
/// 2 / sum(window) so a unit-amplitude sinusoid peaks near 1.
FeatureMatrix mel_spectrogram(const Waveform& w, const StftConfig& cfg = {});
FeatureMatrix mel_spectrogram(const Spectrum& spec, const StftConfig& cfg);

inline constexpr int kPseudoContentDim = 64;
inline constexpr unsigned kPseudoContentSeed = 0x5eedc0de;
/// Reference log-mel statistics used to standardise the pseudo-content projection.
inline constexpr double kLogMelRefMean = -6.0;
inline constexpr double kLogMelRefStd = 3.0;

/// Fixed Gaussian projection matrix [num_mel_bins x kPseudoContentDim], seeded.
std::vector<float> pseudo_content_projection(int num_mel_bins);

/// Projects log-mel frames onto the seeded matrix W and standardises each output
/// dimension j: (m . W_j - mean_ref * sum(W_j)) / (std_ref * ||W_j||).
FeatureMatrix project_pseudo_content(const FeatureMatrix& mel);
FeatureMatrix pseudo_content_features(const Waveform& w, const StftConfig& cfg = {});

/// Linear interpolation along time to round(num_frames * factor) frames, with
/// first and last frames aligned.
FeatureMatrix time_scale_features(const FeatureMatrix& f, double factor);

}  // namespace vevo::dsp
