#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vevo/ar/layout.hpp"
#include "vevo/dsp/waveform.hpp"
#include "vevo/pipeline/midi.hpp"
#include "vevo/tokenizer/tokens.hpp"

namespace vevo::pipeline {

enum class Task {
  kTts,
  kSvs,
  kVcStyleConverted,
  kSvcStyleConverted,
  kSpeechEdit,
  kLyricEdit,
  kHummingToSinging,
  kInstrumentToSinging,
  kEmotionConversion,
  kAccentConversion,
  kWhisperToNormal,
  kSingingStyleConversion,
  kVcStylePreserved,
  kSvcStylePreserved,
};

inline constexpr std::array kAllTasks{
    Task::kTts,               Task::kSvs,                    Task::kVcStyleConverted, Task::kSvcStyleConverted,
    Task::kSpeechEdit,        Task::kLyricEdit,              Task::kHummingToSinging, Task::kInstrumentToSinging,
    Task::kEmotionConversion, Task::kAccentConversion,       Task::kWhisperToNormal,  Task::kSingingStyleConversion,
    Task::kVcStylePreserved,  Task::kSvcStylePreserved};

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);

/// Named inputs of a recipe. For editing tasks the raw recording goes in
/// kSource; for melody-driven tasks the humming or instrument recording goes
/// in kMelody and the singer in kReference.
enum class Slot { kText, kSource, kReference, kMidi, kMelody };

std::string_view to_string(Slot slot);

/// Where the flow-matching stage takes its timbre prompt from.
enum class TimbreFrom { kReference, kSource };

/// Static description of one task row.
struct RecipeSpec {
  Task task;
  std::vector<Slot> required;
  bool uses_ar = true;
  ar::Mode mode = ar::Mode::kIpl;
  TimbreFrom timbre = TimbreFrom::kReference;
  std::string_view ar_expression;  // bracket notation of the AR prefix
  std::string_view fm_expression;
};

const RecipeSpec& recipe_spec(Task task);

struct AudioInput {
  dsp::Waveform wav;
  std::string transcript;  // needed whenever the row uses this input's text
};

struct TaskRecipe {
  Task task = Task::kTts;
  std::optional<std::string> text;
  std::optional<AudioInput> source;
  std::optional<AudioInput> reference;
  std::optional<MidiScore> midi;
  std::optional<AudioInput> melody;
  Instrument instrument = Instrument::kPiano;  // MIDI rendering voice
  /// Duration control for EPL rows. Editing rows derive it from the text
  /// ratio and singing voice conversion from the source when unset.
  std::optional<double> target_seconds;
  double pitch_shift = 0.0;  // semitones applied to the source before extraction
  bool auto_pitch_shift = false;
};

/// Throws RecipeError naming the first missing slot or transcript.
void validate_recipe(const TaskRecipe& recipe);

/// Tokens and text contributed by one input.
struct RoleTokens {
  std::string text;
  tokenizer::TokenSequence prosody{{}, {25, 4}, tokenizer::TokenKind::kProsody};
  tokenizer::TokenSequence cs{{}, {25, 2}, tokenizer::TokenKind::kContentStyle};
};

struct RecipeTokens {
  std::string text;  // target or edited text
  RoleTokens source;
  RoleTokens reference;
  RoleTokens melody;
  /// Prosody for the generated target in editing rows (raw prosody rescaled
  /// to the target duration).
  std::optional<tokenizer::TokenSequence> edited_prosody;
};

/// AR prefix for a row, ending right after <start_of_cs> plus any reference
/// cs prompt. Throws for style-preserved rows, which have no AR stage.
ar::SequenceLayout build_recipe_prefix(Task task, const RecipeTokens& tokens, const ar::Vocabulary& vocab);

/// Span signature as text, for example "text:reference text:target cs:reference".
std::string signature_string(const std::vector<std::pair<ar::SpanType, ar::SpanRole>>& sig);

}  // namespace vevo::pipeline
