#include "vevo/pipeline/training.hpp"

#include <algorithm>
#include <cmath>

#include "vevo/common/error.hpp"
#include "vevo/dsp/features.hpp"

namespace vevo::pipeline {

std::vector<Utterance> load_corpus_audio(const std::vector<CorpusEntry>& entries) {
  std::vector<Utterance> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back({e.text, e.kind, dsp::read_wav(e.audio_path)});
  return out;
}

tokenizer::TokenizerDataset tokenizer_dataset(const std::vector<Utterance>& corpus,
                                              const tokenizer::TokenizerConfig& cfg) {
  std::vector<std::vector<dsp::FeatureMatrix>> feats;
  feats.reserve(corpus.size());
  for (const auto& u : corpus) feats.push_back(tokenizer::extract_inputs(u.wav, cfg));
  return tokenizer::make_dataset(feats, cfg);
}

std::vector<EncodedUtterance> encode_corpus(const std::vector<Utterance>& corpus,
                                            const tokenizer::Tokenizer& prosody,
                                            const tokenizer::Tokenizer& content_style) {
  std::vector<EncodedUtterance> out;
  out.reserve(corpus.size());
  for (const auto& u : corpus) {
    EncodedUtterance e;
    e.text = u.text;
    e.kind = u.kind;
    e.prosody = tokenizer::encode(u.wav, prosody);
    e.cs = tokenizer::encode(u.wav, content_style);
    e.chroma = dsp::chromagram(u.wav);
    e.mel = dsp::mel_spectrogram(u.wav);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ar::SequenceLayout> ar_training_layouts(const std::vector<EncodedUtterance>& data,
                                                    const ar::Vocabulary& vocab, std::mt19937_64& rng) {
  std::vector<ar::SequenceLayout> out;
  out.reserve(data.size());
  for (const auto& e : data) {
    out.push_back(ar::choose_mode(rng) == ar::Mode::kEpl ? ar::build_epl(e.text, e.prosody, e.cs, vocab)
                                                         : ar::build_ipl(e.text, e.cs, vocab));
  }
  return out;
}

std::vector<ar::SequenceLayout> ar_all_layouts(const std::vector<EncodedUtterance>& data,
                                               const ar::Vocabulary& vocab) {
  std::vector<ar::SequenceLayout> out;
  out.reserve(2 * data.size());
  for (const auto& e : data) {
    out.push_back(ar::build_epl(e.text, e.prosody, e.cs, vocab));
    out.push_back(ar::build_ipl(e.text, e.cs, vocab));
  }
  return out;
}

std::vector<fm::FmItem> fm_training_items(const std::vector<EncodedUtterance>& data, double ref_fraction) {
  if (!(ref_fraction > 0.0 && ref_fraction < 1.0)) throw ParameterError("fm_training_items: fraction outside (0, 1)");
  std::vector<fm::FmItem> out;
  for (const auto& e : data) {
    if (e.cs.size() < 2) continue;
    const auto ref = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(ref_fraction * static_cast<double>(e.cs.size()))), 1, e.cs.size() - 1);
    out.push_back(fm::make_fm_item(e.cs, e.mel, ref));
  }
  return out;
}

std::vector<posttrain::PreferenceSource> preference_sources(const std::vector<EncodedUtterance>& data) {
  std::vector<posttrain::PreferenceSource> out;
  out.reserve(data.size());
  for (const auto& e : data) out.push_back({e.text, e.cs, e.prosody});
  return out;
}

std::vector<posttrain::GrpoPrompt> grpo_prompts(const std::vector<EncodedUtterance>& data,
                                                const ar::Vocabulary& vocab) {
  std::vector<posttrain::GrpoPrompt> out;
  out.reserve(data.size());
  for (const auto& e : data) {
    posttrain::GrpoPrompt p;
    p.prefix = ar::truncate_before_cs(ar::build_epl(e.text, e.prosody, e.cs, vocab));
    p.text = e.text;
    p.prosody = e.prosody;
    p.gt_chroma = e.chroma;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace vevo::pipeline
