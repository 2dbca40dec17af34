#include "vevo/posttrain/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "vevo/common/error.hpp"
#include "vevo/nn/ops.hpp"
#include "vevo/posttrain/advantages.hpp"

namespace vevo::posttrain {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<std::int32_t> joined(const ar::SequenceLayout& prefix, std::span<const std::int32_t> completion) {
  std::vector<std::int32_t> ids(prefix.ids);
  // The last completion token is only a target, never an input.
  ids.insert(ids.end(), completion.begin(), completion.end() - 1);
  return ids;
}

}  // namespace

template <typename T>
nn::Tensor<T> completion_logprobs(const ar::ArTransformer<T>& model, const ar::SequenceLayout& prefix,
                                  std::span<const std::int32_t> completion) {
  if (prefix.ids.empty()) throw ParameterError("completion_logprobs: empty prefix");
  if (completion.empty()) throw ParameterError("completion_logprobs: empty completion");
  const auto ids = joined(prefix, completion);
  const auto h = model.hidden(ids);
  const auto logits = model.project(nn::slice_rows(h, prefix.ids.size() - 1, ids.size()));
  return nn::log_softmax_gather(logits, completion);
}

template <typename T>
std::vector<double> sequence_logprobs(const ar::ArTransformer<T>& model, const ar::SequenceLayout& prefix,
                                      std::span<const std::int32_t> completion) {
  const auto lp = completion_logprobs(model, prefix, completion);
  return {lp.data().begin(), lp.data().end()};
}

template <typename T>
nn::Tensor<T> clipped_surrogate(const nn::Tensor<T>& logp_new, std::span<const double> logp_old,
                                std::span<const double> logp_ref, std::span<const double> advantages, double clip_eps,
                                double kl_coef, double* clip_fraction, double* kl) {
  const std::size_t m = logp_new.numel();
  if (m == 0) throw ShapeError("clipped_surrogate: no tokens");
  if (logp_old.size() != m || logp_ref.size() != m || advantages.size() != m) {
    throw ShapeError("clipped_surrogate: per-token inputs differ in length");
  }
  const auto lp = logp_new.data();
  std::vector<T> dloss(m);
  double loss = 0.0, clipped = 0.0, kl_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = std::exp(static_cast<double>(lp[i]) - logp_old[i]);
    const double a = advantages[i];
    const double unclipped = r * a;
    const double rc = std::clamp(r, 1.0 - clip_eps, 1.0 + clip_eps);
    const double obj = std::min(unclipped, rc * a);
    const double delta = logp_ref[i] - static_cast<double>(lp[i]);
    const double k3 = std::exp(delta) - delta - 1.0;
    loss += -obj + kl_coef * k3;
    kl_sum += k3;
    if (rc != r) clipped += 1.0;
    const double dobj = unclipped <= rc * a ? unclipped : 0.0;
    dloss[i] = static_cast<T>((-dobj + kl_coef * (1.0 - std::exp(delta))) / static_cast<double>(m));
  }
  if (clip_fraction) *clip_fraction = clipped / static_cast<double>(m);
  if (kl) *kl = kl_sum / static_cast<double>(m);
  return nn::Tensor<T>::make_result(
      "clipped_surrogate", nn::Shape{1}, {static_cast<T>(loss / static_cast<double>(m))}, {logp_new},
      [dloss = std::move(dloss)](const nn::detail::Node<T>& self) {
        auto& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        const T g = self.grad[0];
        T* pg = parent.grad_buffer();
        for (std::size_t i = 0; i < dloss.size(); ++i) pg[i] += g * dloss[i];
      });
}

RewardGroup sample_group(const GrpoPrompt& prompt, const ar::ArModel& policy, const RewardFn& r_int,
                         const RewardFn& r_pro, const GrpoConfig& cfg, std::uint64_t seed) {
  if (cfg.group_size < 2) throw ParameterError("sample_group: group_size must be at least 2");
  RewardGroup g;
  g.prompt = &prompt;
  for (std::size_t k = 0; k < cfg.group_size; ++k) {
    auto s = cfg.sampling;
    s.seed = mix(seed, k);
    auto res = ar::generate(prompt.prefix, policy, s);
    Completion c;
    c.ids = std::move(res.completion);
    c.cs = std::move(res.cs);
    if (!c.ids.empty()) c.old_logprobs = sequence_logprobs(policy, prompt.prefix, c.ids);
    g.r_int.push_back(r_int(prompt, c.cs));
    g.r_pro.push_back(r_pro(prompt, c.cs));
    g.completions.push_back(std::move(c));
  }
  g.advantages = group_advantages(g.r_int, g.r_pro);
  return g;
}

GrpoStats grpo_update(ar::ArModel& policy, const ar::ArModel& ref_policy, const std::vector<RewardGroup>& groups,
                      nn::AdamW<float>& opt, const GrpoConfig& cfg) {
  std::size_t total_tokens = 0, completions = 0;
  double reward = 0.0, adv = 0.0;
  for (const auto& g : groups) {
    if (g.advantages.size() != g.completions.size()) throw ShapeError("grpo_update: advantages do not match group");
    for (std::size_t k = 0; k < g.completions.size(); ++k) {
      const auto& c = g.completions[k];
      if (c.old_logprobs.size() != c.ids.size()) throw ParameterError("grpo_update: completion lacks old log-probs");
      total_tokens += c.ids.size();
      reward += g.r_int[k] + g.r_pro[k];
      adv += g.advantages[k];
      ++completions;
    }
  }
  GrpoStats stats;
  if (completions == 0) return stats;
  stats.mean_reward = reward / static_cast<double>(completions);
  stats.mean_advantage = adv / static_cast<double>(completions);
  if (total_tokens == 0) return stats;

  // Each completion's token mean is reweighted so the total is a mean over all tokens.
  nn::Tensor<float> loss;
  for (const auto& g : groups) {
    for (std::size_t k = 0; k < g.completions.size(); ++k) {
      const auto& c = g.completions[k];
      if (c.ids.empty()) continue;
      const auto lp = completion_logprobs(policy, g.prompt->prefix, c.ids);
      const auto ref = sequence_logprobs(ref_policy, g.prompt->prefix, c.ids);
      const std::vector<double> a(c.ids.size(), g.advantages[k]);
      double cf = 0.0, kl = 0.0;
      const auto s = clipped_surrogate(lp, c.old_logprobs, ref, a, cfg.clip_eps, cfg.kl_coef, &cf, &kl);
      const double w = static_cast<double>(c.ids.size()) / static_cast<double>(total_tokens);
      stats.clip_fraction += cf * w;
      stats.kl += kl * w;
      auto part = nn::scale(s, static_cast<float>(w));
      loss = loss.defined() ? nn::add(loss, part) : part;
    }
  }
  stats.loss = loss.item();
  loss.backward();
  if (cfg.clip_norm > 0.0) nn::clip_grad_norm(opt.parameters(), cfg.clip_norm);
  opt.step();
  return stats;
}

GrpoReport run_grpo(ar::ArModel& policy, const ar::ArModel& ref_policy, const std::vector<GrpoPrompt>& prompts,
                    const RewardFn& r_int, const RewardFn& r_pro, std::int64_t steps, const GrpoConfig& cfg) {
  if (prompts.empty()) throw ParameterError("run_grpo: no prompts");
  if (steps <= 0 || cfg.prompts_per_step == 0) throw ParameterError("run_grpo: steps and prompts_per_step must be > 0");
  nn::AdamW<float> opt(policy.parameters(), nn::LrSchedule{cfg.lr, 0, steps}, nn::AdamWConfig{.weight_decay = 0.0});
  GrpoReport report;
  std::size_t cursor = 0;
  for (std::int64_t step = 0; step < steps; ++step) {
    std::vector<RewardGroup> groups;
    for (std::size_t i = 0; i < cfg.prompts_per_step; ++i) {
      const auto& p = prompts[cursor++ % prompts.size()];
      groups.push_back(sample_group(p, policy, r_int, r_pro, cfg, mix(cfg.seed, static_cast<std::uint64_t>(step) * 131 + i)));
    }
    report.steps.push_back(grpo_update(policy, ref_policy, groups, opt, cfg));
  }
  return report;
}

double mean_composite_reward(const ar::ArModel& policy, const std::vector<GrpoPrompt>& prompts,
                             const RewardFn& r_int, const RewardFn& r_pro, const ar::SamplingConfig& sampling,
                             std::size_t samples, std::uint64_t seed) {
  if (prompts.empty() || samples == 0) throw ParameterError("mean_composite_reward: nothing to evaluate");
  double total = 0.0;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    for (std::size_t s = 0; s < samples; ++s) {
      auto cfg = sampling;
      cfg.seed = mix(seed, p * 1009 + s);
      const auto res = ar::generate(prompts[p].prefix, policy, cfg);
      total += r_int(prompts[p], res.cs) + r_pro(prompts[p], res.cs);
    }
  }
  return total / static_cast<double>(prompts.size() * samples);
}

template nn::Tensor<float> completion_logprobs(const ar::ArTransformer<float>&, const ar::SequenceLayout&,
                                               std::span<const std::int32_t>);
template nn::Tensor<double> completion_logprobs(const ar::ArTransformer<double>&, const ar::SequenceLayout&,
                                                std::span<const std::int32_t>);
template std::vector<double> sequence_logprobs(const ar::ArTransformer<float>&, const ar::SequenceLayout&,
                                               std::span<const std::int32_t>);
template std::vector<double> sequence_logprobs(const ar::ArTransformer<double>&, const ar::SequenceLayout&,
                                               std::span<const std::int32_t>);
template nn::Tensor<float> clipped_surrogate(const nn::Tensor<float>&, std::span<const double>,
                                             std::span<const double>, std::span<const double>, double, double,
                                             double*, double*);
template nn::Tensor<double> clipped_surrogate(const nn::Tensor<double>&, std::span<const double>,
                                              std::span<const double>, std::span<const double>, double, double,
                                              double*, double*);

}  // namespace vevo::posttrain
