#include "vevo/control/duration.hpp"

#include <cmath>

#include "vevo/common/error.hpp"

namespace vevo::control {

namespace {

constexpr double kFrameRate = 50.0;
constexpr std::size_t kProsodyDownsample = 8;

void require_positive(double seconds, const char* what) {
  if (!(seconds > 0.0) || !std::isfinite(seconds)) {
    throw ParameterError(std::string(what) + ": target duration must be positive");
  }
}

}  // namespace

std::size_t target_frames(double target_seconds) {
  require_positive(target_seconds, "target_frames");
  return static_cast<std::size_t>(std::llround(target_seconds * kFrameRate));
}

std::size_t expected_prosody_tokens(double target_seconds) {
  return (target_frames(target_seconds) + kProsodyDownsample - 1) / kProsodyDownsample;
}

std::size_t expected_cs_tokens(double target_seconds) { return 2 * expected_prosody_tokens(target_seconds); }

dsp::FeatureMatrix scale_prosody_for_duration(const dsp::FeatureMatrix& chroma, double target_seconds) {
  require_positive(target_seconds, "scale_prosody_for_duration");
  if (chroma.empty()) throw ParameterError("scale_prosody_for_duration: empty features");
  const std::size_t frames = static_cast<std::size_t>(std::llround(target_seconds * chroma.frame_rate.value()));
  if (frames == 0) throw ParameterError("scale_prosody_for_duration: target shorter than one frame");
  auto out = dsp::time_scale_features(chroma, static_cast<double>(frames) / static_cast<double>(chroma.num_frames));
  if (out.num_frames != frames) throw NumericError("scale_prosody_for_duration: frame count drifted");
  return out;
}

double edit_target_duration(double raw_seconds, std::string_view raw_text, std::string_view edited_text) {
  require_positive(raw_seconds, "edit_target_duration");
  if (raw_text.empty()) throw ParameterError("edit_target_duration: raw text is empty");
  return raw_seconds * static_cast<double>(edited_text.size()) / static_cast<double>(raw_text.size());
}

DurationMetrics duration_metrics(std::span<const DurationTarget> pairs) {
  if (pairs.empty()) throw ParameterError("duration_metrics: no pairs");
  double abs_sum = 0.0, rel_sum = 0.0;
  for (const auto& p : pairs) {
    if (!(p.target_seconds > 0.0)) throw ParameterError("duration_metrics: target duration must be positive");
    if (p.achieved_seconds < 0.0) throw ParameterError("duration_metrics: negative achieved duration");
    const double err = std::abs(p.achieved_seconds - p.target_seconds);
    abs_sum += err;
    rel_sum += err / p.target_seconds;
  }
  const double n = static_cast<double>(pairs.size());
  return {abs_sum / n, 1.0 - rel_sum / n};
}

}  // namespace vevo::control
