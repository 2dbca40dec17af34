#include "vevo/ar/generate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "vevo/common/error.hpp"

namespace vevo::ar {
namespace {

const Rational kCsRate{25, 2};

std::int32_t pick(const std::vector<float>& logits, const std::vector<std::int32_t>& allowed, const SamplingConfig& cfg,
                  std::mt19937_64& rng) {
  if (allowed.size() == 1) return allowed.front();
  if (cfg.temperature <= 0.0) {
    std::int32_t best = allowed.front();
    for (auto id : allowed) {
      if (logits[static_cast<std::size_t>(id)] > logits[static_cast<std::size_t>(best)]) best = id;
    }
    return best;
  }
  std::vector<std::int32_t> cand = allowed;
  if (cfg.top_k > 0 && cfg.top_k < cand.size()) {
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(cfg.top_k), cand.end(),
                      [&](std::int32_t a, std::int32_t b) {
                        const float la = logits[static_cast<std::size_t>(a)], lb = logits[static_cast<std::size_t>(b)];
                        return la > lb || (la == lb && a < b);
                      });
    cand.resize(cfg.top_k);
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (auto id : cand) mx = std::max(mx, static_cast<double>(logits[static_cast<std::size_t>(id)]));
  std::vector<double> w(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    w[i] = std::exp((logits[static_cast<std::size_t>(cand[i])] - mx) / cfg.temperature);
  }
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return cand[dist(rng)];
}

}  // namespace

GenerationResult generate(const SequenceLayout& prefix, const ArModel& model, const SamplingConfig& cfg) {
  const auto& vocab = model.vocab();
  const std::int32_t start_cs = vocab.special(Special::kStartOfCs);
  const std::int32_t end_cs = vocab.special(Special::kEndOfCs);
  if (prefix.spans.empty() || prefix.spans.back().type != SpanType::kContentStyle ||
      prefix.ids.at(prefix.spans.back().begin) != start_cs) {
    throw ParameterError("generate: prefix must end inside an open cs span");
  }
  std::size_t prosody_count = 0, prompt_count = 0;
  for (std::size_t i = 0; i < prefix.ids.size(); ++i) {
    const auto cls = vocab.classify(prefix.ids[i]);
    if (cls == TokenClass::kProsody) ++prosody_count;
    if (i > prefix.spans.back().begin) {
      if (cls != TokenClass::kContentStyle) throw ParameterError("generate: open cs span holds a non-cs token");
      ++prompt_count;
    }
  }

  GenerationResult result;
  result.cs.frame_rate = kCsRate;
  result.cs.kind = tokenizer::TokenKind::kContentStyle;
  if (prefix.mode == Mode::kEpl && 2 * prosody_count > prompt_count) {
    result.expected_length = 2 * prosody_count - prompt_count;
  }

  std::vector<std::int32_t> cs_range(vocab.cs_size());
  std::iota(cs_range.begin(), cs_range.end(), vocab.cs_offset());
  std::vector<std::int32_t> all(vocab.size());
  std::iota(all.begin(), all.end(), 0);

  if (cfg.max_len == 0 && cfg.forced_length.value_or(1) != 0) {
    result.truncated = true;
    return result;
  }

  std::mt19937_64 rng(cfg.seed);
  auto cache = model.make_cache();
  std::vector<float> logits;
  for (auto id : prefix.ids) logits = model.advance(cache, id);

  for (;;) {
    const std::size_t n = result.cs.ids.size();
    if (cfg.forced_length && n == *cfg.forced_length) {
      result.completion.push_back(end_cs);
      break;
    }
    if (n >= cfg.max_len) {
      result.truncated = true;
      break;
    }
    std::vector<std::int32_t> allowed;
    if (cfg.constrained) {
      allowed = cs_range;
      if (!cfg.forced_length) allowed.push_back(end_cs);
    } else {
      allowed = all;
      if (cfg.forced_length) std::erase(allowed, end_cs);
    }
    const auto id = pick(logits, allowed, cfg, rng);
    result.completion.push_back(id);
    if (!vocab.is_cs(id)) break;  // <end_of_cs>, or any non-cs id when unconstrained
    result.cs.ids.push_back(vocab.cs_code(id));
    if (cache.length >= model.config().max_len) {
      result.truncated = true;
      break;
    }
    logits = model.advance(cache, id);
  }

  if (result.expected_length > 0) {
    const double dev = std::abs(static_cast<double>(result.cs.ids.size()) - static_cast<double>(result.expected_length));
    result.length_warning = dev > 0.25 * static_cast<double>(result.expected_length);
  }
  return result;
}

GenerationResult ArStage::operator()(const SequenceLayout& prefix, const SamplingConfig& cfg) {
  ++calls_;
  return generate(prefix, *model_, cfg);
}

}  // namespace vevo::ar
