#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "vevo/dsp/features.hpp"
#include "vevo/nn/layers.hpp"
#include "vevo/tokenizer/tokens.hpp"

namespace vevo::fm {

/// Mel frames per content-style token (50 Hz over 12.5 Hz).
inline constexpr std::size_t kFramesPerToken = 4;

/// Log-mel values are mapped to (mel - kMelShift) / kMelScale before modelling.
inline constexpr float kMelShift = -6.0f;
inline constexpr float kMelScale = 3.0f;

struct FmCondition {
  tokenizer::TokenSequence cs;      // tokens to render
  tokenizer::TokenSequence ref_cs;  // timbre reference tokens (may be empty)
  dsp::FeatureMatrix ref_mel;       // log-mel, kFramesPerToken x ref_cs frames

  /// Throws if the reference mel and tokens are not aligned.
  void validate(std::size_t mel_bins) const;
  [[nodiscard]] std::size_t target_frames() const { return kFramesPerToken * cs.size(); }
};

struct FmConfig {
  std::size_t cs_size = 1024;
  std::size_t mel_bins = 80;
  std::size_t width = 128;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t max_frames = 1024;  // reference plus target

  void validate() const;
};

/// Each token id repeated kFramesPerToken times.
std::vector<std::int32_t> upsample_ids(std::span<const std::int32_t> ids);

/// Token embeddings at frame rate: [kFramesPerToken * len x width].
template <typename T>
nn::Tensor<T> upsample_tokens_to_frames(const tokenizer::TokenSequence& cs, const nn::Tensor<T>& table);

/// Bidirectional transformer over [reference mel | noisy target] frames, with
/// per-frame token embeddings, a region embedding, learned positions and a
/// sinusoidal time embedding. Predicts the velocity on the target region.
template <typename T>
class FlowModel {
 public:
  FlowModel() = default;
  FlowModel(FmConfig cfg, std::uint64_t seed);

  [[nodiscard]] const FmConfig& config() const { return cfg_; }

  /// `x_t` is the normalised target state, [target_frames x mel_bins].
  [[nodiscard]] nn::Tensor<T> velocity(const nn::Tensor<T>& x_t, T t, const FmCondition& cond) const;

  [[nodiscard]] nn::ParameterList<T> parameters() const;

 private:
  FmConfig cfg_;
  nn::Linear<T> in_proj_;
  nn::Embedding<T> token_emb_;
  nn::Embedding<T> region_emb_;
  nn::Embedding<T> pos_emb_;
  nn::Linear<T> time_fc1_;
  nn::Linear<T> time_fc2_;
  std::vector<nn::TransformerBlock<T>> blocks_;
  nn::LayerNorm<T> ln_f_;
  nn::Linear<T> out_proj_;
};

/// Normalised copy of a log-mel matrix as a tensor.
template <typename T>
nn::Tensor<T> normalize_mel(const dsp::FeatureMatrix& mel);
dsp::FeatureMatrix denormalize_mel(std::span<const float> x, std::size_t frames, std::size_t bins);

/// Flow-matching loss at a given time and noise draw: MSE between the
/// predicted velocity at x_t = (1-t) x0 + t x1 and x1 - x0. `x1` and `x0`
/// are normalised, [target_frames x mel_bins].
template <typename T>
nn::Tensor<T> cfm_loss_at(const nn::Tensor<T>& x1, const nn::Tensor<T>& x0, T t, const FmCondition& cond,
                          const FlowModel<T>& model);

/// Draws t ~ U(0,1) and x0 ~ N(0, I); `target` is the raw log-mel target.
nn::Tensor<float> cfm_loss(const dsp::FeatureMatrix& target, const FmCondition& cond, const FlowModel<float>& model,
                           std::mt19937_64& rng);

/// Euler integration from t=0 to t=1 in `steps` uniform steps. Returns raw
/// log-mel for the target region only.
dsp::FeatureMatrix sample(const FmCondition& cond, std::size_t steps, const FlowModel<float>& model,
                          std::mt19937_64& rng);

/// Same as `sample` but from a caller-supplied normalised initial state.
dsp::FeatureMatrix sample_from(const FmCondition& cond, std::size_t steps, const FlowModel<float>& model,
                               std::vector<float> x0);

inline constexpr std::size_t kDefaultSampleSteps = 16;

void save_flow_model(const std::filesystem::path& path, const FlowModel<float>& model);
FlowModel<float> load_flow_model(const std::filesystem::path& path);

extern template class FlowModel<float>;
extern template class FlowModel<double>;

}  // namespace vevo::fm
