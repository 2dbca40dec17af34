#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vevo/common/rational.hpp"
#include "vevo/dsp/features.hpp"
#include "vevo/dsp/waveform.hpp"
#include "vevo/nn/layers.hpp"
#include "vevo/tokenizer/codebook.hpp"
#include "vevo/tokenizer/tokens.hpp"

namespace vevo::tokenizer {

inline constexpr std::size_t kProsodyCodebookSize = 512;
inline constexpr std::size_t kContentStyleCodebookSize = 16384;  // full-scale vocabulary
inline constexpr std::size_t kDeskContentStyleCodebookSize = 1024;

struct TokenizerConfig {
  TokenKind kind = TokenKind::kProsody;
  std::size_t downsample_ratio = 8;
  std::size_t codebook_size = kProsodyCodebookSize;
  std::size_t code_dim = 8;
  std::size_t hidden = 128;
  std::size_t num_blocks = 2;
  double recon_weight = 1.0;   // lambda
  double commit_weight = 0.25; // beta
  std::vector<dsp::FeatureKind> input_kinds{dsp::FeatureKind::kChromagram};
  Rational feature_rate{50, 1};

  void validate() const;
  [[nodiscard]] Rational token_rate() const;
  /// Width of each reconstruction head, in input order.
  [[nodiscard]] std::vector<std::size_t> input_dims() const;
  [[nodiscard]] std::size_t input_width() const;
  [[nodiscard]] std::size_t num_tokens(std::size_t num_frames) const;
};

TokenizerConfig prosody_config(std::size_t codebook_size = kProsodyCodebookSize);
TokenizerConfig content_style_config(std::size_t codebook_size = kDeskContentStyleCodebookSize);

/// Bits per second: token rate times log2(K).
double bitrate(const TokenizerConfig& cfg);

/// Strided-conv VQ-VAE. The encoder downsamples by `downsample_ratio`, runs
/// residual conv blocks, then projects to `code_dim` and L2-normalizes. The
/// decoder mirrors it and upsamples with a per-token linear expansion.
template <typename T>
class VqVae {
 public:
  struct Output {
    nn::Tensor<T> z_e;                  // [tokens x code_dim], unit rows
    nn::Tensor<T> z_q;                  // codebook rows (gradient reaches the codebook)
    std::vector<std::int32_t> ids;
    std::vector<nn::Tensor<T>> recon;   // one head per input kind, cropped to the input length
  };

  VqVae() = default;
  VqVae(TokenizerConfig cfg, std::uint64_t seed);

  [[nodiscard]] const TokenizerConfig& config() const { return cfg_; }

  /// `x` is [frames x input_width]; frames are edge-padded to a multiple of the ratio.
  [[nodiscard]] nn::Tensor<T> encode_latent(const nn::Tensor<T>& x) const;
  /// Decodes [tokens x code_dim] latents into heads of [tokens*ratio x dim_k].
  [[nodiscard]] std::vector<nn::Tensor<T>> decode_latent(const nn::Tensor<T>& z) const;
  [[nodiscard]] Output forward(const nn::Tensor<T>& x) const;

  [[nodiscard]] nn::ParameterList<T> parameters() const;

  Codebook<T> codebook;

 private:
  TokenizerConfig cfg_;
  nn::Conv1d<T> down_;
  std::vector<nn::ResidualConvBlock<T>> enc_blocks_;
  nn::LayerNorm<T> enc_norm_;
  nn::Linear<T> in_proj_;
  nn::Linear<T> out_proj_;
  std::vector<nn::ResidualConvBlock<T>> dec_blocks_;
  nn::Linear<T> up_;
  std::vector<nn::ResidualConvBlock<T>> post_blocks_;
  std::vector<nn::Linear<T>> heads_;
};

/// lambda * MSE(x, x_hat) + beta * MSE(z_e, sg(z_q)), mean-reduced.
template <typename T>
nn::Tensor<T> vqvae_loss(const nn::Tensor<T>& x, const nn::Tensor<T>& x_hat, const nn::Tensor<T>& z_e,
                         const nn::Tensor<T>& z_q, T lambda, T beta);

/// Multi-head form: the reconstruction term is the mean of per-head MSEs.
template <typename T>
nn::Tensor<T> vqvae_loss(const std::vector<nn::Tensor<T>>& xs, const std::vector<nn::Tensor<T>>& x_hats,
                         const nn::Tensor<T>& z_e, const nn::Tensor<T>& z_q, T lambda, T beta);

/// MSE(sg(z_e), z_q): pulls selected entries toward encoder outputs.
template <typename T>
nn::Tensor<T> codebook_loss(const nn::Tensor<T>& z_e, const nn::Tensor<T>& z_q);

/// Splits `x` ([frames x input_width]) into per-kind column blocks.
template <typename T>
std::vector<nn::Tensor<T>> split_inputs(const nn::Tensor<T>& x, const TokenizerConfig& cfg);

using Tokenizer = VqVae<float>;

/// Feature matrices matching cfg.input_kinds, computed from audio.
std::vector<dsp::FeatureMatrix> extract_inputs(const dsp::Waveform& wav, const TokenizerConfig& cfg);

/// Checks kinds and frame counts, then concatenates columns.
nn::Tensor<float> stack_inputs(const std::vector<dsp::FeatureMatrix>& features, const TokenizerConfig& cfg);

TokenSequence encode(const std::vector<dsp::FeatureMatrix>& features, const Tokenizer& model);
TokenSequence encode(const dsp::Waveform& wav, const Tokenizer& model);
std::vector<dsp::FeatureMatrix> decode(const TokenSequence& tokens, const Tokenizer& model);

void save_tokenizer(const std::filesystem::path& path, const Tokenizer& model);
Tokenizer load_tokenizer(const std::filesystem::path& path);

extern template class VqVae<float>;
extern template class VqVae<double>;

}  // namespace vevo::tokenizer
