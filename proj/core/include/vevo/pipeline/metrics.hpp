#pragma once

#include <span>

#include "vevo/dsp/waveform.hpp"

namespace vevo::pipeline {

inline constexpr std::size_t kMinVoicedOverlap = 8;

/// Pearson correlation of two F0 tracks over frames voiced (> 0) in both,
/// after truncating to the shorter track. Throws with fewer than 8 such frames
/// or when either side is constant over them.
double fpc(std::span<const double> f0_a, std::span<const double> f0_b);

/// F0 correlation of two waveforms.
double fpc(const dsp::Waveform& a, const dsp::Waveform& b);

/// Cosine similarity of the chromagrams of two waveforms.
double chroma_similarity(const dsp::Waveform& a, const dsp::Waveform& b);

}  // namespace vevo::pipeline
