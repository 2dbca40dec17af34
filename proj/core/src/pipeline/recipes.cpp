#include "vevo/pipeline/recipes.hpp"

#include <algorithm>

#include "vevo/common/error.hpp"

namespace vevo::pipeline {

namespace {

using ar::Mode;
using ar::SpanRole;

constexpr std::string_view kFmReference = "[cs(reference), mel(reference), cs^] -> [mel^]";
constexpr std::string_view kFmSource = "[cs(source), mel(source), cs^] -> [mel^]";

const std::array<RecipeSpec, kAllTasks.size()>& table() {
  static const std::array<RecipeSpec, kAllTasks.size()> specs{{
      {Task::kTts, {Slot::kText, Slot::kReference}, true, Mode::kIpl, TimbreFrom::kReference,
       "[t(reference), t(target), cs(reference)] -> [cs^]", kFmReference},
      {Task::kSvs, {Slot::kText, Slot::kMidi, Slot::kReference}, true, Mode::kEpl, TimbreFrom::kReference,
       "[t(reference), t(target), p(reference), p(melody), cs(reference)] -> [cs^]", kFmReference},
      {Task::kVcStyleConverted, {Slot::kSource, Slot::kReference}, true, Mode::kIpl, TimbreFrom::kReference,
       "[t(reference), t(source), cs(reference)] -> [cs^]", kFmReference},
      {Task::kSvcStyleConverted, {Slot::kSource, Slot::kReference}, true, Mode::kEpl, TimbreFrom::kReference,
       "[t(reference), t(source), p(reference), p(source), cs(reference)] -> [cs^]", kFmReference},
      {Task::kSpeechEdit, {Slot::kText, Slot::kSource}, true, Mode::kEpl, TimbreFrom::kSource,
       "[t(raw), t(edited), p(raw), p(edited), cs(raw)] -> [cs^]", kFmSource},
      {Task::kLyricEdit, {Slot::kText, Slot::kSource}, true, Mode::kEpl, TimbreFrom::kSource,
       "[t(raw), t(edited), p(raw), p(edited), cs(raw)] -> [cs^]", kFmSource},
      {Task::kHummingToSinging, {Slot::kText, Slot::kMelody, Slot::kReference}, true, Mode::kEpl,
       TimbreFrom::kReference, "[t(target), p(melody)] -> [cs^]", kFmReference},
      {Task::kInstrumentToSinging, {Slot::kText, Slot::kMelody, Slot::kReference}, true, Mode::kEpl,
       TimbreFrom::kReference, "[t(target), p(melody)] -> [cs^]", kFmReference},
      {Task::kEmotionConversion, {Slot::kSource, Slot::kReference}, true, Mode::kIpl, TimbreFrom::kSource,
       "[t(reference), t(source), cs(reference)] -> [cs^]", kFmSource},
      {Task::kAccentConversion, {Slot::kSource, Slot::kReference}, true, Mode::kIpl, TimbreFrom::kSource,
       "[t(reference), t(source), cs(reference)] -> [cs^]", kFmSource},
      {Task::kWhisperToNormal, {Slot::kSource, Slot::kReference}, true, Mode::kIpl, TimbreFrom::kSource,
       "[t(reference), t(source), cs(reference)] -> [cs^]", kFmSource},
      {Task::kSingingStyleConversion, {Slot::kSource, Slot::kReference}, true, Mode::kEpl, TimbreFrom::kSource,
       "[t(reference), t(source), p(reference), p(source), cs(reference)] -> [cs^]", kFmSource},
      {Task::kVcStylePreserved, {Slot::kSource, Slot::kReference}, false, Mode::kIpl, TimbreFrom::kReference, "-",
       "[cs(reference), mel(reference), cs(source)] -> [mel^]"},
      {Task::kSvcStylePreserved, {Slot::kSource, Slot::kReference}, false, Mode::kIpl, TimbreFrom::kReference, "-",
       "[cs(reference), mel(reference), cs(source)] -> [mel^]"},
  }};
  return specs;
}

// Which audio inputs contribute a transcript to the AR prefix.
bool uses_source_text(Task t) {
  switch (t) {
    case Task::kVcStyleConverted:
    case Task::kSvcStyleConverted:
    case Task::kSpeechEdit:
    case Task::kLyricEdit:
    case Task::kEmotionConversion:
    case Task::kAccentConversion:
    case Task::kWhisperToNormal:
    case Task::kSingingStyleConversion: return true;
    default: return false;
  }
}

bool uses_reference_text(Task t) {
  switch (t) {
    case Task::kTts:
    case Task::kSvs:
    case Task::kVcStyleConverted:
    case Task::kSvcStyleConverted:
    case Task::kEmotionConversion:
    case Task::kAccentConversion:
    case Task::kWhisperToNormal:
    case Task::kSingingStyleConversion: return true;
    default: return false;
  }
}

bool present(const TaskRecipe& r, Slot s) {
  switch (s) {
    case Slot::kText: return r.text.has_value() && !r.text->empty();
    case Slot::kSource: return r.source.has_value() && !r.source->wav.empty();
    case Slot::kReference: return r.reference.has_value() && !r.reference->wav.empty();
    case Slot::kMidi: return r.midi.has_value() && !r.midi->notes.empty();
    case Slot::kMelody: return r.melody.has_value() && !r.melody->wav.empty();
  }
  return false;
}

ar::Part<std::string> text_part(const std::string& text, SpanRole role) { return {text, role}; }
ar::Part<tokenizer::TokenSequence> p_part(const tokenizer::TokenSequence& p, SpanRole role) { return {p, role}; }

}  // namespace

std::string_view to_string(Task task) {
  switch (task) {
    case Task::kTts: return "tts";
    case Task::kSvs: return "svs";
    case Task::kVcStyleConverted: return "vc_style_converted";
    case Task::kSvcStyleConverted: return "svc_style_converted";
    case Task::kSpeechEdit: return "speech_edit";
    case Task::kLyricEdit: return "lyric_edit";
    case Task::kHummingToSinging: return "humming_to_singing";
    case Task::kInstrumentToSinging: return "instrument_to_singing";
    case Task::kEmotionConversion: return "emotion_conversion";
    case Task::kAccentConversion: return "accent_conversion";
    case Task::kWhisperToNormal: return "whisper_to_normal";
    case Task::kSingingStyleConversion: return "singing_style_conversion";
    case Task::kVcStylePreserved: return "vc_style_preserved";
    case Task::kSvcStylePreserved: return "svc_style_preserved";
  }
  return "?";
}

Task task_from_string(std::string_view name) {
  for (auto t : kAllTasks) {
    if (to_string(t) == name) return t;
  }
  throw RecipeError("unknown task '" + std::string(name) + "'");
}

std::string_view to_string(Slot slot) {
  switch (slot) {
    case Slot::kText: return "text";
    case Slot::kSource: return "source";
    case Slot::kReference: return "reference";
    case Slot::kMidi: return "midi";
    case Slot::kMelody: return "melody";
  }
  return "?";
}

const RecipeSpec& recipe_spec(Task task) { return table()[static_cast<std::size_t>(task)]; }

void validate_recipe(const TaskRecipe& recipe) {
  const auto& spec = recipe_spec(recipe.task);
  for (auto s : spec.required) {
    if (!present(recipe, s)) {
      throw RecipeError(std::string(to_string(recipe.task)) + ": missing slot '" + std::string(to_string(s)) + "'");
    }
  }
  if (uses_source_text(recipe.task) && recipe.source->transcript.empty()) {
    throw RecipeError(std::string(to_string(recipe.task)) + ": missing slot 'source transcript'");
  }
  if (uses_reference_text(recipe.task) && recipe.reference->transcript.empty()) {
    throw RecipeError(std::string(to_string(recipe.task)) + ": missing slot 'reference transcript'");
  }
  if (recipe.midi) recipe.midi->validate();
  if (recipe.target_seconds && !(*recipe.target_seconds > 0.0)) {
    throw RecipeError(std::string(to_string(recipe.task)) + ": target duration must be positive");
  }
}

ar::SequenceLayout build_recipe_prefix(Task task, const RecipeTokens& tk, const ar::Vocabulary& vocab) {
  const auto& spec = recipe_spec(task);
  if (!spec.uses_ar) throw RecipeError(std::string(to_string(task)) + " has no autoregressive stage");
  ar::PrefixSpec p;
  p.mode = spec.mode;
  p.cs_prompt_role = SpanRole::kReference;
  switch (task) {
    case Task::kTts:
      p.texts = {text_part(tk.reference.text, SpanRole::kReference), text_part(tk.text, SpanRole::kTarget)};
      p.cs_prompt = tk.reference.cs.ids;
      break;
    case Task::kSvs:
      p.texts = {text_part(tk.reference.text, SpanRole::kReference), text_part(tk.text, SpanRole::kTarget)};
      p.prosody = {p_part(tk.reference.prosody, SpanRole::kReference), p_part(tk.melody.prosody, SpanRole::kMelody)};
      p.cs_prompt = tk.reference.cs.ids;
      break;
    case Task::kVcStyleConverted:
    case Task::kEmotionConversion:
    case Task::kAccentConversion:
    case Task::kWhisperToNormal:
      p.texts = {text_part(tk.reference.text, SpanRole::kReference), text_part(tk.source.text, SpanRole::kSource)};
      p.cs_prompt = tk.reference.cs.ids;
      break;
    case Task::kSvcStyleConverted:
    case Task::kSingingStyleConversion:
      p.texts = {text_part(tk.reference.text, SpanRole::kReference), text_part(tk.source.text, SpanRole::kSource)};
      p.prosody = {p_part(tk.reference.prosody, SpanRole::kReference), p_part(tk.source.prosody, SpanRole::kSource)};
      p.cs_prompt = tk.reference.cs.ids;
      break;
    case Task::kSpeechEdit:
    case Task::kLyricEdit:
      // The raw recording plays the reference role; the edited text and its
      // rescaled prosody describe the target.
      p.texts = {text_part(tk.source.text, SpanRole::kReference), text_part(tk.text, SpanRole::kTarget)};
      p.prosody = {p_part(tk.source.prosody, SpanRole::kReference),
                   p_part(tk.edited_prosody ? *tk.edited_prosody : tk.source.prosody, SpanRole::kTarget)};
      p.cs_prompt = tk.source.cs.ids;
      break;
    case Task::kHummingToSinging:
    case Task::kInstrumentToSinging:
      p.texts = {text_part(tk.text, SpanRole::kTarget)};
      p.prosody = {p_part(tk.melody.prosody, SpanRole::kMelody)};
      break;
    case Task::kVcStylePreserved:
    case Task::kSvcStylePreserved: break;
  }
  return ar::build_prefix(p, vocab);
}

std::string signature_string(const std::vector<std::pair<ar::SpanType, ar::SpanRole>>& sig) {
  std::string out;
  for (const auto& [type, role] : sig) {
    if (!out.empty()) out += ' ';
    out += ar::to_string(type);
    out += ':';
    out += ar::to_string(role);
  }
  return out;
}

}  // namespace vevo::pipeline
