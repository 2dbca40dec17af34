#include "vevo/pipeline/runner.hpp"

#include <random>

#include "vevo/common/error.hpp"
#include "vevo/control/duration.hpp"
#include "vevo/control/pitch_region.hpp"
#include "vevo/dsp/pitch.hpp"
#include "vevo/fm/flow_trainer.hpp"

namespace vevo::pipeline {

namespace {

const tokenizer::Tokenizer& need(const tokenizer::Tokenizer* t, const char* what) {
  if (!t) throw ParameterError(std::string("run_task: missing ") + what + " tokenizer");
  return *t;
}

// Which prosody input describes the generated target, and so follows a duration target.
enum class TargetProsody { kNone, kSource, kMelody, kEdited };

TargetProsody target_prosody(Task t) {
  switch (t) {
    case Task::kSvs:
    case Task::kHummingToSinging:
    case Task::kInstrumentToSinging: return TargetProsody::kMelody;
    case Task::kSvcStyleConverted:
    case Task::kSingingStyleConversion: return TargetProsody::kSource;
    case Task::kSpeechEdit:
    case Task::kLyricEdit: return TargetProsody::kEdited;
    default: return TargetProsody::kNone;
  }
}

std::vector<dsp::FeatureMatrix> scaled(std::vector<dsp::FeatureMatrix> feats, std::optional<double> seconds) {
  if (!seconds) return feats;
  for (auto& f : feats) f = control::scale_prosody_for_duration(f, *seconds);
  return feats;
}

tokenizer::TokenSequence prosody_tokens(const dsp::Waveform& wav, const tokenizer::Tokenizer& tk,
                                        std::optional<double> seconds) {
  return tokenizer::encode(scaled(tokenizer::extract_inputs(wav, tk.config()), seconds), tk);
}

// Content-style tokens; a pitch shift replaces only the chromagram input.
tokenizer::TokenSequence cs_tokens(const dsp::Waveform& wav, const dsp::Waveform* shifted,
                                   const tokenizer::Tokenizer& tk) {
  auto feats = tokenizer::extract_inputs(wav, tk.config());
  if (shifted) {
    const auto alt = tokenizer::extract_inputs(*shifted, tk.config());
    for (std::size_t i = 0; i < feats.size(); ++i) {
      if (feats[i].kind == dsp::FeatureKind::kChromagram) feats[i] = alt[i];
    }
  }
  return tokenizer::encode(feats, tk);
}

const dsp::Waveform& melody_wav(const TaskRecipe& r, std::optional<dsp::Waveform>& rendered) {
  if (r.melody) return r.melody->wav;
  if (!r.midi) throw RecipeError(std::string(to_string(r.task)) + ": missing slot 'midi'");
  rendered = render_midi(*r.midi, r.instrument);
  return *rendered;
}

}  // namespace

std::optional<double> resolve_target_seconds(const TaskRecipe& recipe) {
  if (recipe.target_seconds) return recipe.target_seconds;
  switch (recipe.task) {
    case Task::kSpeechEdit:
    case Task::kLyricEdit:
      if (!recipe.source || !recipe.text) return std::nullopt;
      return control::edit_target_duration(recipe.source->wav.duration_seconds(), recipe.source->transcript,
                                           *recipe.text);
    case Task::kSvcStyleConverted:
      if (!recipe.source) return std::nullopt;
      return recipe.source->wav.duration_seconds();
    default: return std::nullopt;
  }
}

RecipeTokens extract_recipe_tokens(const TaskRecipe& recipe, const Models& models, double pitch_shift,
                                   std::optional<double> target_seconds) {
  const auto& spec = recipe_spec(recipe.task);
  const auto& cs_tk = need(models.content_style, "content-style");
  const bool epl = spec.uses_ar && spec.mode == ar::Mode::kEpl;
  const auto target = target_prosody(recipe.task);
  RecipeTokens tk;
  if (recipe.text) tk.text = *recipe.text;

  std::optional<dsp::Waveform> shifted;
  if (recipe.source && pitch_shift != 0.0) shifted = control::pitch_region_shift(recipe.source->wav, pitch_shift);

  if (recipe.source) {
    const auto& src = recipe.source->wav;
    tk.source.text = recipe.source->transcript;
    tk.source.cs = cs_tokens(src, shifted ? &*shifted : nullptr, cs_tk);
    if (epl) {
      const auto& ptk = need(models.prosody, "prosody");
      const auto& pwav = shifted ? *shifted : src;
      if (target == TargetProsody::kEdited) {
        tk.source.prosody = prosody_tokens(pwav, ptk, std::nullopt);
        tk.edited_prosody = prosody_tokens(pwav, ptk, target_seconds);
      } else {
        tk.source.prosody = prosody_tokens(pwav, ptk, target == TargetProsody::kSource ? target_seconds : std::nullopt);
      }
    }
  }
  if (recipe.reference) {
    tk.reference.text = recipe.reference->transcript;
    tk.reference.cs = cs_tokens(recipe.reference->wav, nullptr, cs_tk);
    if (epl) tk.reference.prosody = prosody_tokens(recipe.reference->wav, need(models.prosody, "prosody"), std::nullopt);
  }
  if (epl && target == TargetProsody::kMelody) {
    std::optional<dsp::Waveform> rendered;
    const auto& wav = melody_wav(recipe, rendered);
    tk.melody.prosody = prosody_tokens(wav, need(models.prosody, "prosody"), target_seconds);
  }
  return tk;
}

TaskOutput run_task(const TaskRecipe& recipe, const Models& models, const RunConfig& cfg) {
  validate_recipe(recipe);
  const auto& spec = recipe_spec(recipe.task);
  if (!models.fm) throw ParameterError("run_task: missing flow-matching model");
  const auto& cs_tk = need(models.content_style, "content-style");

  TaskOutput out;
  auto& rep = out.report;
  rep.task = recipe.task;

  double shift = recipe.pitch_shift;
  if (recipe.auto_pitch_shift && recipe.source && recipe.reference) {
    shift = control::suggest_shift(recipe.source->wav, recipe.reference->wav);
  }
  rep.pitch_shift = shift;

  const bool epl = spec.uses_ar && spec.mode == ar::Mode::kEpl;
  std::optional<double> target = resolve_target_seconds(recipe);
  if (target && !epl) {
    if (recipe.target_seconds) {
      throw RecipeError(std::string(to_string(recipe.task)) + ": duration control needs a prosody input");
    }
    target.reset();
  }
  rep.target_seconds = target;

  const auto tokens = extract_recipe_tokens(recipe, models, shift, target);

  if (spec.uses_ar) {
    if (!models.ar) throw ParameterError("run_task: missing autoregressive model");
    auto prefix = build_recipe_prefix(recipe.task, tokens, models.ar->model().vocab());
    auto sampling = cfg.sampling;
    if (target) {
      rep.expected_cs_tokens = control::expected_cs_tokens(*target);
      sampling.forced_length = rep.expected_cs_tokens;
    }
    const auto gen = (*models.ar)(prefix, sampling);
    rep.ar_used = true;
    rep.signature = signature_string(ar::span_signature(prefix));
    rep.prefix = std::move(prefix);
    rep.truncated = gen.truncated;
    rep.length_warning = gen.length_warning;
    out.cs = gen.cs;
    const auto tp = target_prosody(recipe.task);
    rep.prosody_tokens = tp == TargetProsody::kMelody   ? tokens.melody.prosody.size()
                         : tp == TargetProsody::kSource ? tokens.source.prosody.size()
                         : tp == TargetProsody::kEdited ? tokens.edited_prosody->size()
                                                        : 0;
    rep.reference_cs_tokens =
        (recipe.task == Task::kSpeechEdit || recipe.task == Task::kLyricEdit) ? tokens.source.cs.size()
                                                                               : tokens.reference.cs.size();
  } else {
    out.cs = tokens.source.cs;
  }
  rep.cs_tokens = out.cs.size();
  if (out.cs.ids.empty()) return out;

  // Timbre prompt for the flow-matching stage.
  const AudioInput& timbre = spec.timbre == TimbreFrom::kSource ? *recipe.source : *recipe.reference;
  fm::FmCondition cond;
  cond.cs = out.cs;
  cond.ref_cs = spec.timbre == TimbreFrom::kSource ? tokens.source.cs : tokens.reference.cs;
  if (spec.timbre == TimbreFrom::kSource && shift != 0.0) cond.ref_cs = cs_tokens(timbre.wav, nullptr, cs_tk);
  cond.ref_mel = fm::align_mel(dsp::mel_spectrogram(timbre.wav), cond.ref_cs.size());

  std::mt19937_64 rng(cfg.seed ^ 0xf10u);
  out.mel = fm::sample(cond, cfg.fm_steps, *models.fm, rng);
  if (target) {
    // The token grid rounds the target up to whole prosody tokens; trim the excess frames.
    const std::size_t frames = control::target_frames(*target);
    if (frames < out.mel.num_frames) {
      out.mel.num_frames = frames;
      out.mel.data.resize(frames * out.mel.dim);
    }
  }
  rep.mel_frames = out.mel.num_frames;
  if (cfg.vocode && out.mel.num_frames >= 2) {
    out.wav = dsp::griffin_lim(out.mel, dsp::StftConfig{}, dsp::GriffinLimConfig{.iters = cfg.griffin_lim_iters,
                                                                                   .seed = cfg.seed});
    rep.output_seconds = out.wav.duration_seconds();
  } else {
    rep.output_seconds = static_cast<double>(out.mel.num_frames) / out.mel.frame_rate.value();
  }
  return out;
}

}  // namespace vevo::pipeline
