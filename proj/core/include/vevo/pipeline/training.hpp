#pragma once

#include <random>
#include <string>
#include <vector>

#include "vevo/ar/layout.hpp"
#include "vevo/fm/flow_trainer.hpp"
#include "vevo/pipeline/corpus.hpp"
#include "vevo/posttrain/grpo.hpp"
#include "vevo/posttrain/preferences.hpp"
#include "vevo/tokenizer/trainer.hpp"

namespace vevo::pipeline {

/// One utterance with everything the downstream stages train on.
struct EncodedUtterance {
  std::string text;
  UtteranceKind kind = UtteranceKind::kSpeech;
  tokenizer::TokenSequence prosody;
  tokenizer::TokenSequence cs;
  dsp::FeatureMatrix chroma;
  dsp::FeatureMatrix mel;
};

/// Reads every manifest entry's audio.
std::vector<Utterance> load_corpus_audio(const std::vector<CorpusEntry>& entries);

/// Stacked tokenizer inputs for each utterance.
tokenizer::TokenizerDataset tokenizer_dataset(const std::vector<Utterance>& corpus,
                                              const tokenizer::TokenizerConfig& cfg);

std::vector<EncodedUtterance> encode_corpus(const std::vector<Utterance>& corpus,
                                            const tokenizer::Tokenizer& prosody,
                                            const tokenizer::Tokenizer& content_style);

/// EPL or IPL layout per utterance by a fair coin.
std::vector<ar::SequenceLayout> ar_training_layouts(const std::vector<EncodedUtterance>& data,
                                                    const ar::Vocabulary& vocab, std::mt19937_64& rng);

/// Both layouts of every utterance.
std::vector<ar::SequenceLayout> ar_all_layouts(const std::vector<EncodedUtterance>& data,
                                               const ar::Vocabulary& vocab);

/// Items whose first `ref_fraction` of tokens (at least one) prompt the rest.
std::vector<fm::FmItem> fm_training_items(const std::vector<EncodedUtterance>& data, double ref_fraction = 1.0 / 3.0);

std::vector<posttrain::PreferenceSource> preference_sources(const std::vector<EncodedUtterance>& data);

/// EPL prompts [t, p] -> cs for each utterance, with the utterance chroma as the prosody target.
std::vector<posttrain::GrpoPrompt> grpo_prompts(const std::vector<EncodedUtterance>& data,
                                                const ar::Vocabulary& vocab);

}  // namespace vevo::pipeline
