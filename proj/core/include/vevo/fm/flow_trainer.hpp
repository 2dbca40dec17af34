#pragma once

#include <cstdint>
#include <vector>

#include "vevo/fm/flow_model.hpp"

namespace vevo::fm {

/// One training pair: condition plus the log-mel it should produce.
struct FmItem {
  FmCondition cond;
  dsp::FeatureMatrix mel;
};

/// Splits one utterance into a reference prompt (first `ref_tokens` tokens)
/// and the target remainder. The mel is edge-padded or cropped to
/// kFramesPerToken frames per token first.
FmItem make_fm_item(const tokenizer::TokenSequence& cs, const dsp::FeatureMatrix& mel, std::size_t ref_tokens);

/// Mel with exactly kFramesPerToken * tokens frames (edge-padded or cropped).
dsp::FeatureMatrix align_mel(const dsp::FeatureMatrix& mel, std::size_t tokens);

struct FmTrainConfig {
  std::int64_t steps = 3000;
  std::size_t batch_size = 4;
  double lr = 1e-3;
  std::int64_t warmup_steps = 100;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  std::int64_t log_every = 100;
  std::uint64_t seed = 0;
};

struct FmTrainReport {
  std::vector<std::pair<std::int64_t, double>> log;
};

FmTrainReport train_fm(FlowModel<float>& model, const std::vector<FmItem>& items, const FmTrainConfig& hyper);

/// Mean squared error (raw log-mel units) between two equally sized mels.
double mel_mse(const dsp::FeatureMatrix& a, const dsp::FeatureMatrix& b);

}  // namespace vevo::fm
