#include "vevo/pipeline/midi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "vevo/common/error.hpp"

namespace vevo::pipeline {

namespace {

struct Profile {
  std::array<float, 8> harmonics;
  double attack, decay, sustain, release;  // seconds, seconds, level, seconds
};

const Profile& profile(Instrument i) {
  static const std::array<Profile, kAllInstruments.size()> table{{
      {{1.0f, 0.5f, 0.3f, 0.2f, 0.12f, 0.08f, 0.05f, 0.03f}, 0.005, 0.25, 0.35, 0.05},  // piano
      {{1.0f, 0.25f, 0.1f, 0.04f, 0.02f, 0.0f, 0.0f, 0.0f}, 0.04, 0.05, 0.85, 0.04},    // flute
      {{1.0f, 0.6f, 0.45f, 0.35f, 0.25f, 0.18f, 0.12f, 0.08f}, 0.06, 0.1, 0.8, 0.05},   // violin
      {{1.0f, 0.02f, 0.5f, 0.02f, 0.3f, 0.02f, 0.15f, 0.02f}, 0.02, 0.05, 0.85, 0.04},  // clarinet
      {{1.0f, 0.8f, 0.6f, 0.3f, 0.2f, 0.1f, 0.05f, 0.02f}, 0.02, 0.05, 0.8, 0.04},      // oboe
      {{1.0f, 0.7f, 0.55f, 0.45f, 0.35f, 0.25f, 0.15f, 0.1f}, 0.03, 0.08, 0.75, 0.05},  // trumpet
      {{1.0f, 0.5f, 0.25f, 0.5f, 0.1f, 0.25f, 0.05f, 0.12f}, 0.01, 0.01, 1.0, 0.02},    // organ
      {{1.0f, 0.45f, 0.3f, 0.15f, 0.1f, 0.05f, 0.03f, 0.02f}, 0.003, 0.3, 0.25, 0.05},  // guitar
  }};
  return table[static_cast<std::size_t>(i)];
}

double envelope(double t, double dur, const Profile& p) {
  const double release = std::min(p.release, 0.3 * dur);
  const double attack = std::min(p.attack, 0.3 * dur);
  double level;
  if (t < attack) {
    level = t / attack;
  } else if (t < attack + p.decay) {
    level = 1.0 - (1.0 - p.sustain) * (t - attack) / p.decay;
  } else {
    level = p.sustain;
  }
  const double to_end = dur - t;
  if (to_end < release) level *= std::max(0.0, to_end / release);
  return level;
}

}  // namespace

void MidiScore::validate() const {
  if (notes.empty()) throw ParameterError("midi: score has no notes");
  for (std::size_t i = 0; i < notes.size(); ++i) {
    const auto& n = notes[i];
    if (n.pitch < 0 || n.pitch > 127) throw ParameterError("midi: pitch outside 0..127");
    if (n.velocity < 1 || n.velocity > 127) throw ParameterError("midi: velocity outside 1..127");
    if (!(n.duration > 0.0)) throw ParameterError("midi: note duration must be positive");
    if (n.onset < 0.0) throw ParameterError("midi: negative onset");
    if (i > 0) {
      const auto& prev = notes[i - 1];
      if (n.onset < prev.onset) throw ParameterError("midi: onsets must be non-decreasing");
      if (n.onset < prev.onset + prev.duration - 1e-9) throw ParameterError("midi: overlapping notes");
    }
  }
}

double MidiScore::end_seconds() const {
  double end = 0.0;
  for (const auto& n : notes) end = std::max(end, n.onset + n.duration);
  return end;
}

std::string_view to_string(Instrument instrument) {
  switch (instrument) {
    case Instrument::kPiano: return "piano";
    case Instrument::kFlute: return "flute";
    case Instrument::kViolin: return "violin";
    case Instrument::kClarinet: return "clarinet";
    case Instrument::kOboe: return "oboe";
    case Instrument::kTrumpet: return "trumpet";
    case Instrument::kOrgan: return "organ";
    case Instrument::kGuitar: return "guitar";
  }
  return "?";
}

Instrument instrument_from_string(std::string_view name) {
  for (auto i : kAllInstruments) {
    if (to_string(i) == name) return i;
  }
  throw ParameterError("unknown instrument '" + std::string(name) + "'");
}

double midi_to_hz(double pitch) { return 440.0 * std::pow(2.0, (pitch - 69.0) / 12.0); }

dsp::Waveform render_midi(const MidiScore& score, Instrument instrument, int sample_rate) {
  score.validate();
  if (sample_rate <= 0) throw ParameterError("render_midi: sample rate must be positive");
  const auto& prof = profile(instrument);
  const double sr = sample_rate;
  dsp::Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(static_cast<std::size_t>(std::llround(score.end_seconds() * sr)), 0.0f);
  const double nyquist = 0.5 * sr;
  float norm = 0.0f;
  for (float h : prof.harmonics) norm += h;
  for (const auto& n : score.notes) {
    const double f0 = midi_to_hz(n.pitch);
    const auto begin = static_cast<std::size_t>(std::llround(n.onset * sr));
    const auto end = std::min(out.samples.size(), static_cast<std::size_t>(std::llround((n.onset + n.duration) * sr)));
    const double gain = 0.6 * n.velocity / 127.0 / norm;
    for (std::size_t s = begin; s < end; ++s) {
      const double t = static_cast<double>(s - begin) / sr;
      const double env = envelope(t, n.duration, prof);
      double v = 0.0;
      for (std::size_t h = 0; h < prof.harmonics.size(); ++h) {
        const double f = f0 * static_cast<double>(h + 1);
        if (f >= nyquist) break;
        if (prof.harmonics[h] == 0.0f) continue;
        v += prof.harmonics[h] * std::sin(2.0 * std::numbers::pi * f * t);
      }
      out.samples[s] += static_cast<float>(gain * env * v);
    }
  }
  return out;
}

MidiScore parse_midi_json(std::string_view text) {
  MidiScore score;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& n : j.at("notes")) {
      MidiNote note;
      note.pitch = n.at("pitch").get<int>();
      note.onset = n.at("onset").get<double>();
      note.duration = n.at("duration").get<double>();
      note.velocity = n.value("velocity", 100);
      score.notes.push_back(note);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("midi json: ") + e.what());
  }
  score.validate();
  return score;
}

std::string midi_to_json(const MidiScore& score) {
  nlohmann::ordered_json j;
  j["notes"] = nlohmann::ordered_json::array();
  for (const auto& n : score.notes) {
    j["notes"].push_back({{"pitch", n.pitch}, {"onset", n.onset}, {"duration", n.duration}, {"velocity", n.velocity}});
  }
  return j.dump(2) + "\n";
}

MidiScore load_midi_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_midi_json(ss.str());
}

void save_midi_json(const std::filesystem::path& path, const MidiScore& score) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << midi_to_json(score);
}

}  // namespace vevo::pipeline
