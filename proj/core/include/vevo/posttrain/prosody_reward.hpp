#pragma once

#include "vevo/dsp/features.hpp"
#include "vevo/tokenizer/vqvae.hpp"

namespace vevo::posttrain {

/// Cosine similarity of flattened matrices after truncating both to the
/// shorter frame count; 0 when either side has zero norm.
double chroma_cosine(const dsp::FeatureMatrix& a, const dsp::FeatureMatrix& b);

/// Decodes `cs` with the content-style tokenizer's chromagram head and
/// compares it with the ground truth. Empty input scores -1.
double prosody_reward(const tokenizer::TokenSequence& cs, const dsp::FeatureMatrix& gt_chroma,
                      const tokenizer::Tokenizer& cs_tokenizer);

}  // namespace vevo::posttrain
