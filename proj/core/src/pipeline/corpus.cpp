#include "vevo/pipeline/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "vevo/common/error.hpp"

namespace vevo::pipeline {

namespace {

constexpr std::size_t kHop = 480;
constexpr double kRamp = 0.015;  // seconds of fade at each word edge
constexpr double kMaxHarmonicHz = 5000.0;
constexpr std::array<double, 4> kF1{300.0, 450.0, 600.0, 750.0};
constexpr std::array<double, 4> kF2{900.0, 1300.0, 1800.0, 2300.0};
// Major-scale degrees in semitones used for the sung notes.
constexpr std::array<int, 8> kScale{0, 2, 4, 5, 7, 9, 11, 12};

std::size_t word_index(std::string_view word) {
  const auto it = std::find(kWordList.begin(), kWordList.end(), word);
  if (it == kWordList.end()) throw ParameterError("toy corpus: unknown word '" + std::string(word) + "'");
  return static_cast<std::size_t>(it - kWordList.begin());
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto next = text.find(' ', pos);
    const auto end = next == std::string_view::npos ? text.size() : next;
    if (end > pos) words.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  if (words.empty()) throw ParameterError("toy corpus: empty text");
  return words;
}

double formant_gain(double f, double f1, double f2) {
  const double a = (f - f1) / 150.0, b = (f - f2) / 200.0;
  return 0.05 + std::exp(-a * a) + 0.8 * std::exp(-b * b);
}

}  // namespace

std::string_view to_string(UtteranceKind kind) { return kind == UtteranceKind::kSpeech ? "speech" : "singing"; }

UtteranceKind utterance_kind_from_string(std::string_view name) {
  if (name == "speech") return UtteranceKind::kSpeech;
  if (name == "singing") return UtteranceKind::kSinging;
  throw ParameterError("unknown utterance kind '" + std::string(name) + "'");
}

std::size_t word_segments(std::string_view word) { return 1 + word.size() / 4; }

std::size_t utterance_frames(std::string_view text) {
  std::size_t segments = 0;
  for (auto w : split_words(text)) {
    word_index(w);
    segments += word_segments(w);
  }
  return segments * kSegmentFrames;
}

std::size_t utterance_samples(std::string_view text) { return (utterance_frames(text) - 1) * kHop + kHop / 2; }

std::string random_text(std::mt19937_64& rng, std::size_t min_words, std::size_t max_words) {
  if (min_words == 0 || max_words < min_words) throw ParameterError("random_text: bad word range");
  const auto n = std::uniform_int_distribution<std::size_t>(min_words, max_words)(rng);
  std::uniform_int_distribution<std::size_t> pick(0, kWordList.size() - 1);
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) text += ' ';
    text += kWordList[pick(rng)];
  }
  return text;
}

dsp::Waveform synthesize_utterance(std::string_view text, UtteranceKind kind, std::mt19937_64& rng) {
  const auto words = split_words(text);
  const double sr = dsp::kSampleRate;
  const double speaker = std::uniform_real_distribution<double>(0.92, 1.08)(rng);
  const double base = kind == UtteranceKind::kSpeech ? std::uniform_real_distribution<double>(110.0, 190.0)(rng)
                                                     : std::uniform_real_distribution<double>(196.0, 294.0)(rng);
  std::uniform_int_distribution<std::size_t> degree(0, kScale.size() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);

  dsp::Waveform out;
  out.samples.assign(utterance_samples(text), 0.0f);
  std::size_t start = 0;
  double phase_time = 0.0;  // running vibrato phase keeps note transitions continuous
  for (auto w : words) {
    const std::size_t k = word_index(w);
    const double f1 = kF1[k % 4] * speaker, f2 = kF2[k / 4] * speaker;
    const double f0 = kind == UtteranceKind::kSpeech ? base : base * std::pow(2.0, kScale[degree(rng)] / 12.0);
    const std::size_t len = word_segments(w) * kSegmentFrames * kHop;
    const std::size_t end = std::min(out.samples.size(), start + len);
    const std::size_t harmonics = static_cast<std::size_t>(kMaxHarmonicHz / (f0 * 1.03));
    std::vector<double> gains(harmonics);
    double norm = 0.0;
    for (std::size_t h = 0; h < harmonics; ++h) {
      gains[h] = formant_gain(f0 * static_cast<double>(h + 1), f1, f2) / static_cast<double>(h + 1);
      norm += gains[h];
    }
    double phase = 0.0;
    for (std::size_t s = start; s < end; ++s) {
      const double t = static_cast<double>(s - start) / sr;
      const double dur = static_cast<double>(len) / sr;
      double f = f0;
      if (kind == UtteranceKind::kSinging && t > 0.08) {
        f *= std::pow(2.0, 0.25 / 12.0 * std::sin(2.0 * std::numbers::pi * 5.5 * (phase_time + t)));
      }
      phase += 2.0 * std::numbers::pi * f / sr;
      double v = 0.0;
      for (std::size_t h = 0; h < harmonics; ++h) v += gains[h] * std::sin(static_cast<double>(h + 1) * phase);
      v /= norm;
      if (kind == UtteranceKind::kSpeech) v += 0.03 * noise(rng);
      const double edge = std::min(t, dur - t);
      const double env = edge < kRamp ? 0.5 - 0.5 * std::cos(std::numbers::pi * std::max(edge, 0.0) / kRamp) : 1.0;
      out.samples[s] = static_cast<float>(0.5 * env * v);
    }
    phase_time += static_cast<double>(len) / sr;
    start += len;
  }
  return out;
}

std::vector<Utterance> synthesize_corpus(std::uint64_t seed, std::size_t n) {
  if (n == 0) throw ParameterError("synthesize_corpus: n must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<UtteranceKind> kinds(n, UtteranceKind::kSinging);
  std::fill(kinds.begin(), kinds.begin() + static_cast<std::ptrdiff_t>(n / 2), UtteranceKind::kSpeech);
  std::shuffle(kinds.begin(), kinds.end(), rng);
  std::vector<Utterance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    u.kind = kinds[i];
    u.text = random_text(rng);
    u.wav = synthesize_utterance(u.text, u.kind, rng);
    out.push_back(std::move(u));
  }
  return out;
}

std::filesystem::path make_toy_corpus(std::uint64_t seed, std::size_t n, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const auto corpus = synthesize_corpus(seed, n);
  const auto manifest = out_dir / "manifest.jsonl";
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot write " + manifest.string());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "utt_%04zu.wav", i);
    dsp::write_wav(out_dir / name, corpus[i].wav);
    nlohmann::ordered_json j;
    j["audio_path"] = name;
    j["text"] = corpus[i].text;
    j["language"] = "en";
    j["kind"] = to_string(corpus[i].kind);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + manifest.string());
  return manifest;
}

std::vector<CorpusEntry> read_corpus(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  std::vector<CorpusEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CorpusEntry e;
      e.audio_path = j.at("audio_path").get<std::string>();
      if (e.audio_path.is_relative()) e.audio_path = manifest.parent_path() / e.audio_path;
      e.text = j.at("text").get<std::string>();
      e.language = j.value("language", "en");
      e.kind = utterance_kind_from_string(j.value("kind", "speech"));
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(manifest.string() + ": " + ex.what());
    }
  }
  return entries;
}

}  // namespace vevo::pipeline
