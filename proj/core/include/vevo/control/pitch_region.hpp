#pragma once

#include "vevo/dsp/waveform.hpp"

namespace vevo::control {

/// Shifts the source before prosody and content-style extraction; |semitones| <= 24.
dsp::Waveform pitch_region_shift(const dsp::Waveform& source, double semitones);

inline constexpr int kMaxSuggestedShift = 12;

/// round(12 log2(median F0 of reference / median F0 of source)), clamped to +-12.
/// Throws when either side has no voiced frames.
int suggest_shift(const dsp::Waveform& source, const dsp::Waveform& reference);

}  // namespace vevo::control
