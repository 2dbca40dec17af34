#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vevo/dsp/waveform.hpp"

namespace vevo::pipeline {

enum class UtteranceKind { kSpeech, kSinging };

std::string_view to_string(UtteranceKind kind);
UtteranceKind utterance_kind_from_string(std::string_view name);

/// Vocabulary of the toy corpus. Each word has its own formant pair.
inline constexpr std::array<std::string_view, 16> kWordList{
    "la", "oh", "sun", "sky", "moon", "star", "rain", "song",
    "river", "light", "dream", "ocean", "hello", "night", "golden", "morning"};

/// Frames per word segment; every word spans a whole number of segments so
/// utterances always carry a multiple of 8 feature frames.
inline constexpr std::size_t kSegmentFrames = 8;

/// Segments a word occupies: 1 + length / 4.
std::size_t word_segments(std::string_view word);
/// Feature frames of an utterance of `text` (words from kWordList).
std::size_t utterance_frames(std::string_view text);
/// Sample count giving exactly utterance_frames(text) STFT frames at hop 480.
std::size_t utterance_samples(std::string_view text);

struct Utterance {
  std::string text;
  UtteranceKind kind = UtteranceKind::kSpeech;
  dsp::Waveform wav;
};

/// Space-separated words drawn uniformly from kWordList.
std::string random_text(std::mt19937_64& rng, std::size_t min_words = 3, std::size_t max_words = 5);

/// Speech-like: a flat-pitch harmonic tone plus noise, shaped per word by the
/// word's formants. Singing-like: one scale note per word with vibrato, same
/// formant shaping.
dsp::Waveform synthesize_utterance(std::string_view text, UtteranceKind kind, std::mt19937_64& rng);

/// Exactly half of the utterances (rounded down) are speech, in shuffled order.
std::vector<Utterance> synthesize_corpus(std::uint64_t seed, std::size_t n);

struct CorpusEntry {
  std::filesystem::path audio_path;
  std::string text;
  std::string language = "en";
  UtteranceKind kind = UtteranceKind::kSpeech;
};

/// Writes utt_NNNN.wav files and manifest.jsonl into `out_dir`; returns the manifest path.
std::filesystem::path make_toy_corpus(std::uint64_t seed, std::size_t n, const std::filesystem::path& out_dir);

/// Reads a corpus manifest including the kind field; paths resolve against its directory.
std::vector<CorpusEntry> read_corpus(const std::filesystem::path& manifest);

}  // namespace vevo::pipeline
