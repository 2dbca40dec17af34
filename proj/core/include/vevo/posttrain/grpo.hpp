#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vevo/ar/generate.hpp"
#include "vevo/ar/layout.hpp"
#include "vevo/ar/transformer.hpp"
#include "vevo/dsp/features.hpp"
#include "vevo/nn/optim.hpp"

namespace vevo::posttrain {

/// A rollout prompt and what its rewards need.
struct GrpoPrompt {
  ar::SequenceLayout prefix;  // ends with <start_of_cs>
  std::string text;
  std::optional<tokenizer::TokenSequence> prosody;
  dsp::FeatureMatrix gt_chroma;
};

struct Completion {
  std::vector<std::int32_t> ids;     // vocabulary ids appended to the prefix
  tokenizer::TokenSequence cs;
  std::vector<double> old_logprobs;  // per completion token, recorded at sampling time
};

struct RewardGroup {
  const GrpoPrompt* prompt = nullptr;
  std::vector<Completion> completions;
  std::vector<double> r_int;
  std::vector<double> r_pro;
  std::vector<double> advantages;
};

/// Scores one completion for a prompt.
using RewardFn = std::function<double(const GrpoPrompt&, const tokenizer::TokenSequence&)>;

struct GrpoConfig {
  std::size_t group_size = 8;       // completions per prompt
  std::size_t prompts_per_step = 2;
  double clip_eps = 0.2;
  double kl_coef = 0.01;
  double lr = 1e-4;
  double clip_norm = 1.0;
  ar::SamplingConfig sampling{
      .temperature = 1.0, .top_k = 0, .max_len = 256, .constrained = true, .forced_length = std::nullopt, .seed = 0};
  std::uint64_t seed = 0;
};

struct GrpoStats {
  double mean_reward = 0.0;     // mean of r_int + r_pro over the batch
  double mean_advantage = 0.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double loss = 0.0;
};

/// Per-token log-probabilities of `completion` after `prefix`, at temperature 1.
template <typename T>
std::vector<double> sequence_logprobs(const ar::ArTransformer<T>& model, const ar::SequenceLayout& prefix,
                                      std::span<const std::int32_t> completion);

/// Differentiable log-probabilities of the completion tokens, shape [m].
template <typename T>
nn::Tensor<T> completion_logprobs(const ar::ArTransformer<T>& model, const ar::SequenceLayout& prefix,
                                  std::span<const std::int32_t> completion);

/// Per-token clipped-surrogate objective with a k3 KL penalty, negated for
/// minimisation and averaged over tokens:
///   -(min(r A, clip(r, 1-eps, 1+eps) A) - kl_coef * (e^(ref-new) - (ref-new) - 1)),
/// with r = exp(new - old). Gradient flows to `logp_new` only.
template <typename T>
nn::Tensor<T> clipped_surrogate(const nn::Tensor<T>& logp_new, std::span<const double> logp_old,
                                std::span<const double> logp_ref, std::span<const double> advantages, double clip_eps,
                                double kl_coef, double* clip_fraction = nullptr, double* kl = nullptr);

/// Samples `group_size` completions and scores them.
RewardGroup sample_group(const GrpoPrompt& prompt, const ar::ArModel& policy, const RewardFn& r_int,
                         const RewardFn& r_pro, const GrpoConfig& cfg, std::uint64_t seed);

/// One optimizer step over the groups. Throws if a completion lacks old log-probs.
GrpoStats grpo_update(ar::ArModel& policy, const ar::ArModel& ref_policy, const std::vector<RewardGroup>& groups,
                      nn::AdamW<float>& opt, const GrpoConfig& cfg);

struct GrpoReport {
  std::vector<GrpoStats> steps;
};

/// Runs `steps` rounds of sample -> score -> update, cycling through prompts.
GrpoReport run_grpo(ar::ArModel& policy, const ar::ArModel& ref_policy, const std::vector<GrpoPrompt>& prompts,
                    const RewardFn& r_int, const RewardFn& r_pro, std::int64_t steps, const GrpoConfig& cfg);

/// Mean of r_int + r_pro over `samples` seeded completions per prompt.
double mean_composite_reward(const ar::ArModel& policy, const std::vector<GrpoPrompt>& prompts,
                             const RewardFn& r_int, const RewardFn& r_pro, const ar::SamplingConfig& sampling,
                             std::size_t samples, std::uint64_t seed);

}  // namespace vevo::posttrain
