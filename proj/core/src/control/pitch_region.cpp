#include "vevo/control/pitch_region.hpp"

#include <algorithm>
#include <cmath>

#include "vevo/common/error.hpp"
#include "vevo/dsp/pitch.hpp"

namespace vevo::control {

dsp::Waveform pitch_region_shift(const dsp::Waveform& source, double semitones) {
  if (std::abs(semitones) > dsp::kMaxPitchShiftSemitones) {
    throw ParameterError("pitch_region_shift: shift exceeds 24 semitones");
  }
  if (semitones == 0.0) return source;
  return dsp::pitch_shift(source, semitones);
}

int suggest_shift(const dsp::Waveform& source, const dsp::Waveform& reference) {
  const double src = dsp::median_voiced(dsp::estimate_f0(source));
  const double ref = dsp::median_voiced(dsp::estimate_f0(reference));
  if (src <= 0.0) throw ParameterError("suggest_shift: source has no voiced frames");
  if (ref <= 0.0) throw ParameterError("suggest_shift: reference has no voiced frames");
  const auto s = static_cast<int>(std::lround(12.0 * std::log2(ref / src)));
  return std::clamp(s, -kMaxSuggestedShift, kMaxSuggestedShift);
}

}  // namespace vevo::control
