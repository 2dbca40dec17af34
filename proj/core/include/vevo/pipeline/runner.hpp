#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "vevo/ar/generate.hpp"
#include "vevo/dsp/features.hpp"
#include "vevo/fm/flow_model.hpp"
#include "vevo/pipeline/recipes.hpp"
#include "vevo/tokenizer/vqvae.hpp"

namespace vevo::pipeline {

/// Frozen models a recipe runs against. `ar` may be null for style-preserved rows.
struct Models {
  const tokenizer::Tokenizer* prosody = nullptr;
  const tokenizer::Tokenizer* content_style = nullptr;
  ar::ArStage* ar = nullptr;
  const fm::FlowModel<float>* fm = nullptr;
};

struct RunConfig {
  ar::SamplingConfig sampling;
  std::size_t fm_steps = fm::kDefaultSampleSteps;
  int griffin_lim_iters = 32;
  bool vocode = true;
  std::uint64_t seed = 0;
};

struct TaskReport {
  Task task = Task::kTts;
  bool ar_used = false;
  std::optional<ar::SequenceLayout> prefix;
  std::string signature;                 // span signature of the prefix, empty without AR
  std::size_t prosody_tokens = 0;        // target prosody tokens (EPL rows)
  std::size_t reference_cs_tokens = 0;   // cs prompt length
  std::size_t cs_tokens = 0;             // tokens rendered by the flow-matching stage
  std::size_t expected_cs_tokens = 0;    // 0 when unconstrained
  std::size_t mel_frames = 0;            // after duration trimming
  std::optional<double> target_seconds;
  double output_seconds = 0.0;           // waveform length, or mel frames / 50 without vocoding
  double pitch_shift = 0.0;
  bool truncated = false;
  bool length_warning = false;
};

struct TaskOutput {
  dsp::Waveform wav;
  dsp::FeatureMatrix mel;
  tokenizer::TokenSequence cs;
  TaskReport report;
};

/// Text and tokens extracted from the recipe's inputs, with pitch shifting
/// and duration scaling applied.
RecipeTokens extract_recipe_tokens(const TaskRecipe& recipe, const Models& models, double pitch_shift,
                                   std::optional<double> target_seconds);

/// Target duration a recipe resolves to: explicit, text-ratio for editing,
/// source length for singing voice conversion, otherwise none.
std::optional<double> resolve_target_seconds(const TaskRecipe& recipe);

/// Runs the row: prefix assembly and AR sampling (skipped for style-preserved
/// rows), flow-matching with the row's timbre prompt, then Griffin-Lim.
TaskOutput run_task(const TaskRecipe& recipe, const Models& models, const RunConfig& cfg);

}  // namespace vevo::pipeline
