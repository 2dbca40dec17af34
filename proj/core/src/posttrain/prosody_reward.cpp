#include "vevo/posttrain/prosody_reward.hpp"

#include <algorithm>
#include <cmath>

#include "vevo/common/error.hpp"

namespace vevo::posttrain {

double chroma_cosine(const dsp::FeatureMatrix& a, const dsp::FeatureMatrix& b) {
  if (a.dim != b.dim) throw ShapeError("chroma_cosine: feature widths differ");
  const std::size_t n = std::min(a.num_frames, b.num_frames) * a.dim;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += static_cast<double>(a.data[i]) * b.data[i];
    na += static_cast<double>(a.data[i]) * a.data[i];
    nb += static_cast<double>(b.data[i]) * b.data[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double prosody_reward(const tokenizer::TokenSequence& cs, const dsp::FeatureMatrix& gt_chroma,
                      const tokenizer::Tokenizer& cs_tokenizer) {
  if (cs.ids.empty()) return -1.0;
  const auto& kinds = cs_tokenizer.config().input_kinds;
  const auto it = std::find(kinds.begin(), kinds.end(), dsp::FeatureKind::kChromagram);
  if (it == kinds.end()) throw ParameterError("prosody_reward: tokenizer has no chromagram head");
  const auto decoded = tokenizer::decode(cs, cs_tokenizer);
  return chroma_cosine(decoded[static_cast<std::size_t>(it - kinds.begin())], gt_chroma);
}

}  // namespace vevo::posttrain
