#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "vevo/dsp/features.hpp"

namespace vevo::control {

struct DurationTarget {
  double target_seconds = 0.0;
  double achieved_seconds = 0.0;
};

/// Frame count a target duration maps to: round(seconds * 50).
std::size_t target_frames(double target_seconds);
/// Prosody tokens for a target duration: ceil(target_frames / 8).
std::size_t expected_prosody_tokens(double target_seconds);
/// Content-style tokens for a target duration, twice the prosody count.
std::size_t expected_cs_tokens(double target_seconds);

/// Linearly rescales prosody features along time to target_frames(target_seconds).
dsp::FeatureMatrix scale_prosody_for_duration(const dsp::FeatureMatrix& chroma, double target_seconds);

/// Editing target: raw duration scaled by the edited/raw text length ratio.
double edit_target_duration(double raw_seconds, std::string_view raw_text, std::string_view edited_text);

struct DurationMetrics {
  double ddur = 0.0;         // mean |d_hat - d| in seconds
  double consistency = 1.0;  // 1 - mean(|d_hat - d| / d)
};

DurationMetrics duration_metrics(std::span<const DurationTarget> pairs);

}  // namespace vevo::control
