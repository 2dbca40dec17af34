#pragma once

#include <cstdint>
#include <vector>

#include "vevo/dsp/features.hpp"
#include "vevo/dsp/waveform.hpp"

namespace vevo::dsp {

struct F0Config {
  double min_hz = 50.0;
  double max_hz = 1200.0;
  /// Minimum normalised autocorrelation peak for a frame to count as voiced.
  double voicing_threshold = 0.3;
  /// Frames quieter than this RMS are unvoiced regardless of periodicity.
  double silence_rms = 1e-4;
  int hop = 480;
};

/// Per-frame F0 in Hz on the centred STFT grid (floor(N/hop)+1 frames); 0 marks
/// unvoiced frames. Normalised autocorrelation with parabolic peak refinement.
std::vector<double> estimate_f0(const Waveform& w, const F0Config& cfg = {});

/// Median of the voiced (> 0) entries, or 0 when there are none.
double median_voiced(const std::vector<double>& f0);

inline constexpr double kMaxPitchShiftSemitones = 24.0;

/// Shifts pitch by `semitones` keeping duration: band-limited resampling by
/// 2^(s/12) followed by a phase-vocoder time stretch back to the input length.
Waveform pitch_shift(const Waveform& w, double semitones);

/// Phase-vocoder time stretch to exactly `out_length` samples.
std::vector<float> time_stretch(std::span<const float> x, std::size_t out_length);

struct GriffinLimConfig {
  int iters = 32;
  std::uint64_t seed = 0;
  double momentum = 0.99;
};

/// Inverts a log-mel matrix to audio: ridge-regularised pseudo-inverse of the
/// filterbank (clamped non-negative) followed by fast Griffin-Lim. Output length
/// is num_frames * hop, so N frames last N / frame_rate seconds.
Waveform griffin_lim(const FeatureMatrix& mel, const StftConfig& cfg, const GriffinLimConfig& gl);
Waveform griffin_lim(const FeatureMatrix& mel, const StftConfig& cfg, int iters);

}  // namespace vevo::dsp
