#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vevo/dsp/waveform.hpp"

namespace vevo::pipeline {

struct MidiNote {
  int pitch = 69;         // MIDI note number
  double onset = 0.0;     // seconds
  double duration = 0.5;  // seconds
  int velocity = 100;     // 1..127
};

/// Monophonic note list: onsets non-decreasing, no overlaps.
struct MidiScore {
  std::vector<MidiNote> notes;

  void validate() const;
  [[nodiscard]] double end_seconds() const;
};

/// Harmonic-profile stand-ins for general MIDI instruments.
enum class Instrument { kPiano, kFlute, kViolin, kClarinet, kOboe, kTrumpet, kOrgan, kGuitar };

inline constexpr std::array kAllInstruments{Instrument::kPiano,   Instrument::kFlute,   Instrument::kViolin,
                                            Instrument::kClarinet, Instrument::kOboe,   Instrument::kTrumpet,
                                            Instrument::kOrgan,   Instrument::kGuitar};

std::string_view to_string(Instrument instrument);
Instrument instrument_from_string(std::string_view name);

double midi_to_hz(double pitch);

/// Additive synthesis: per-instrument harmonic amplitudes under an ADSR
/// envelope that closes within each note. Output length is
/// round(end_seconds * sample_rate).
dsp::Waveform render_midi(const MidiScore& score, Instrument instrument, int sample_rate = dsp::kSampleRate);

/// JSON note list: {"notes": [{"pitch": 60, "onset": 0.0, "duration": 0.5, "velocity": 100}, ...]}.
/// Velocity is optional and defaults to 100.
MidiScore parse_midi_json(std::string_view text);
std::string midi_to_json(const MidiScore& score);
MidiScore load_midi_json(const std::filesystem::path& path);
void save_midi_json(const std::filesystem::path& path, const MidiScore& score);

}  // namespace vevo::pipeline
