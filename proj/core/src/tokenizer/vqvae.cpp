#include "vevo/tokenizer/vqvae.hpp"

#include <cmath>
#include <sstream>

#include "vevo/common/error.hpp"
#include "vevo/nn/checkpoint.hpp"
#include "vevo/nn/ops.hpp"

namespace vevo::tokenizer {

using nn::Tensor;

void TokenizerConfig::validate() const {
  if (downsample_ratio == 0) throw ParameterError("tokenizer: downsample_ratio must be positive");
  if (codebook_size == 0 || code_dim == 0 || hidden == 0) {
    throw ParameterError("tokenizer: codebook_size, code_dim and hidden must be positive");
  }
  if (input_kinds.empty()) throw ParameterError("tokenizer: at least one input kind is required");
  if (recon_weight < 0.0 || commit_weight < 0.0) throw ParameterError("tokenizer: loss weights must be >= 0");
}

Rational TokenizerConfig::token_rate() const {
  return feature_rate / Rational(static_cast<std::int64_t>(downsample_ratio));
}

std::vector<std::size_t> TokenizerConfig::input_dims() const {
  const dsp::StftConfig stft;
  std::vector<std::size_t> dims;
  for (auto k : input_kinds) {
    switch (k) {
      case dsp::FeatureKind::kChromagram: dims.push_back(static_cast<std::size_t>(stft.num_chroma_bins)); break;
      case dsp::FeatureKind::kMel: dims.push_back(static_cast<std::size_t>(stft.num_mel_bins)); break;
      case dsp::FeatureKind::kPseudoContent: dims.push_back(dsp::kPseudoContentDim); break;
    }
  }
  return dims;
}

std::size_t TokenizerConfig::input_width() const {
  std::size_t w = 0;
  for (auto d : input_dims()) w += d;
  return w;
}

std::size_t TokenizerConfig::num_tokens(std::size_t num_frames) const {
  return (num_frames + downsample_ratio - 1) / downsample_ratio;
}

TokenizerConfig prosody_config(std::size_t codebook_size) {
  TokenizerConfig cfg;
  cfg.kind = TokenKind::kProsody;
  cfg.downsample_ratio = 8;
  cfg.codebook_size = codebook_size;
  cfg.input_kinds = {dsp::FeatureKind::kChromagram};
  return cfg;
}

TokenizerConfig content_style_config(std::size_t codebook_size) {
  TokenizerConfig cfg;
  cfg.kind = TokenKind::kContentStyle;
  cfg.downsample_ratio = 4;
  cfg.codebook_size = codebook_size;
  cfg.input_kinds = {dsp::FeatureKind::kChromagram, dsp::FeatureKind::kPseudoContent};
  return cfg;
}

double bitrate(const TokenizerConfig& cfg) {
  cfg.validate();
  return cfg.token_rate().value() * std::log2(static_cast<double>(cfg.codebook_size));
}

template <typename T>
VqVae<T>::VqVae(TokenizerConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  nn::Rng rng(seed);
  const std::size_t h = cfg_.hidden, r = cfg_.downsample_ratio;
  down_ = nn::Conv1d<T>(cfg_.input_width(), h, r, r, rng);
  for (std::size_t i = 0; i < cfg_.num_blocks; ++i) enc_blocks_.emplace_back(h, rng);
  enc_norm_ = nn::LayerNorm<T>(h);
  in_proj_ = nn::Linear<T>(h, cfg_.code_dim, rng);
  codebook = Codebook<T>::random(cfg_.codebook_size, cfg_.code_dim, rng);
  out_proj_ = nn::Linear<T>(cfg_.code_dim, h, rng);
  for (std::size_t i = 0; i < cfg_.num_blocks; ++i) dec_blocks_.emplace_back(h, rng);
  up_ = nn::Linear<T>(h, r * h, rng);
  post_blocks_.emplace_back(h, rng);
  for (auto d : cfg_.input_dims()) heads_.emplace_back(h, d, rng);
}

template <typename T>
Tensor<T> VqVae<T>::encode_latent(const Tensor<T>& x) const {
  if (!x.defined() || x.rank() != 2 || x.cols() != cfg_.input_width()) {
    throw ShapeError("tokenizer: expected [frames x " + std::to_string(cfg_.input_width()) + "] input");
  }
  const std::size_t n = x.rows();
  if (n == 0) throw ShapeError("tokenizer: empty input");
  const std::size_t padded = cfg_.num_tokens(n) * cfg_.downsample_ratio;
  Tensor<T> h = x;
  if (padded != n) h = nn::concat_rows<T>({x, nn::repeat_rows(nn::slice_rows(x, n - 1, n), padded - n)});
  h = down_(h);
  for (const auto& b : enc_blocks_) h = b(h);
  return nn::l2_normalize_rows(in_proj_(enc_norm_(h)));
}

template <typename T>
std::vector<Tensor<T>> VqVae<T>::decode_latent(const Tensor<T>& z) const {
  if (!z.defined() || z.rank() != 2 || z.cols() != cfg_.code_dim) {
    throw ShapeError("tokenizer: expected [tokens x " + std::to_string(cfg_.code_dim) + "] latents");
  }
  Tensor<T> h = out_proj_(z);
  for (const auto& b : dec_blocks_) h = b(h);
  h = nn::reshape(up_(h), {z.rows() * cfg_.downsample_ratio, cfg_.hidden});
  for (const auto& b : post_blocks_) h = b(h);
  std::vector<Tensor<T>> out;
  out.reserve(heads_.size());
  for (const auto& head : heads_) out.push_back(head(h));
  return out;
}

template <typename T>
typename VqVae<T>::Output VqVae<T>::forward(const Tensor<T>& x) const {
  Output o;
  o.z_e = encode_latent(x);
  auto q = quantize(o.z_e, codebook);
  o.z_q = q.z_q;
  o.ids = std::move(q.ids);
  auto heads = decode_latent(nn::straight_through(o.z_e, o.z_q));
  for (auto& r : heads) o.recon.push_back(nn::slice_rows(r, 0, x.rows()));
  return o;
}

template <typename T>
nn::ParameterList<T> VqVae<T>::parameters() const {
  nn::ParameterList<T> p;
  down_.collect(p, "enc.down");
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i) enc_blocks_[i].collect(p, "enc.block" + std::to_string(i));
  enc_norm_.collect(p, "enc.norm");
  in_proj_.collect(p, "enc.in_proj");
  p.push_back({"codebook", codebook.entries, false});
  out_proj_.collect(p, "dec.out_proj");
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) dec_blocks_[i].collect(p, "dec.block" + std::to_string(i));
  up_.collect(p, "dec.up");
  for (std::size_t i = 0; i < post_blocks_.size(); ++i) post_blocks_[i].collect(p, "dec.post" + std::to_string(i));
  for (std::size_t i = 0; i < heads_.size(); ++i) heads_[i].collect(p, "dec.head" + std::to_string(i));
  return p;
}

template <typename T>
Tensor<T> vqvae_loss(const Tensor<T>& x, const Tensor<T>& x_hat, const Tensor<T>& z_e, const Tensor<T>& z_q,
                     T lambda, T beta) {
  return nn::add(nn::scale(nn::mse(x_hat, x), lambda), nn::scale(nn::mse(z_e, nn::stop_gradient(z_q)), beta));
}

template <typename T>
Tensor<T> vqvae_loss(const std::vector<Tensor<T>>& xs, const std::vector<Tensor<T>>& x_hats, const Tensor<T>& z_e,
                     const Tensor<T>& z_q, T lambda, T beta) {
  if (xs.empty() || xs.size() != x_hats.size()) throw ShapeError("vqvae_loss: head count mismatch");
  Tensor<T> recon = nn::mse(x_hats[0], xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) recon = nn::add(recon, nn::mse(x_hats[i], xs[i]));
  recon = nn::scale(recon, T(1) / static_cast<T>(xs.size()));
  return nn::add(nn::scale(recon, lambda), nn::scale(nn::mse(z_e, nn::stop_gradient(z_q)), beta));
}

template <typename T>
Tensor<T> codebook_loss(const Tensor<T>& z_e, const Tensor<T>& z_q) {
  return nn::mse(z_q, nn::stop_gradient(z_e));
}

template <typename T>
std::vector<Tensor<T>> split_inputs(const Tensor<T>& x, const TokenizerConfig& cfg) {
  std::vector<Tensor<T>> parts;
  std::size_t c = 0;
  for (auto d : cfg.input_dims()) {
    parts.push_back(nn::slice_cols(x, c, c + d));
    c += d;
  }
  if (c != x.cols()) throw ShapeError("split_inputs: input width does not match the config");
  return parts;
}

std::vector<dsp::FeatureMatrix> extract_inputs(const dsp::Waveform& wav, const TokenizerConfig& cfg) {
  dsp::StftConfig stft;
  stft.sample_rate = wav.sample_rate;
  const auto spec = dsp::stft(wav.samples, stft);
  std::vector<dsp::FeatureMatrix> out;
  for (auto k : cfg.input_kinds) {
    switch (k) {
      case dsp::FeatureKind::kChromagram: out.push_back(dsp::chromagram(spec, stft)); break;
      case dsp::FeatureKind::kMel: out.push_back(dsp::mel_spectrogram(spec, stft)); break;
      case dsp::FeatureKind::kPseudoContent:
        out.push_back(dsp::project_pseudo_content(dsp::mel_spectrogram(spec, stft)));
        break;
    }
  }
  return out;
}

Tensor<float> stack_inputs(const std::vector<dsp::FeatureMatrix>& features, const TokenizerConfig& cfg) {
  if (features.size() != cfg.input_kinds.size()) {
    throw ParameterError("tokenizer: expected " + std::to_string(cfg.input_kinds.size()) + " feature inputs");
  }
  const auto dims = cfg.input_dims();
  const std::size_t n = features[0].num_frames;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].kind != cfg.input_kinds[i]) {
      throw ParameterError(std::string("tokenizer: expected ") + dsp::to_string(cfg.input_kinds[i]) + " input, got " +
                           dsp::to_string(features[i].kind));
    }
    if (features[i].dim != dims[i]) throw ShapeError("tokenizer: feature width mismatch");
    if (features[i].num_frames != n) throw ShapeError("tokenizer: feature frame counts differ");
  }
  if (n == 0) throw ShapeError("tokenizer: empty feature input");
  const std::size_t width = cfg.input_width();
  std::vector<float> data(n * width);
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t c = 0;
    for (const auto& f : features) {
      const auto row = f.row(t);
      std::copy(row.begin(), row.end(), data.begin() + static_cast<std::ptrdiff_t>(t * width + c));
      c += f.dim;
    }
  }
  return Tensor<float>::from_vector(std::move(data), {n, width});
}

TokenSequence encode(const std::vector<dsp::FeatureMatrix>& features, const Tokenizer& model) {
  const auto& cfg = model.config();
  const auto z = model.encode_latent(stack_inputs(features, cfg));
  return TokenSequence{nearest_ids<float>(z.data(), z.rows(), model.codebook), cfg.token_rate(), cfg.kind};
}

TokenSequence encode(const dsp::Waveform& wav, const Tokenizer& model) {
  return encode(extract_inputs(wav, model.config()), model);
}

std::vector<dsp::FeatureMatrix> decode(const TokenSequence& tokens, const Tokenizer& model) {
  const auto& cfg = model.config();
  if (tokens.kind != cfg.kind) throw ParameterError("decode: token kind does not match the tokenizer");
  if (tokens.ids.empty()) throw ShapeError("decode: empty token sequence");
  tokens.check_range(cfg.codebook_size);
  const auto z = nn::embedding(model.codebook.entries.detach(), std::span<const std::int32_t>(tokens.ids));
  const auto heads = model.decode_latent(z);
  std::vector<dsp::FeatureMatrix> out;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    dsp::FeatureMatrix f(heads[i].rows(), heads[i].cols(), cfg.input_kinds[i], cfg.feature_rate);
    std::copy(heads[i].data().begin(), heads[i].data().end(), f.data.begin());
    out.push_back(std::move(f));
  }
  return out;
}

void save_tokenizer(const std::filesystem::path& path, const Tokenizer& model) {
  const auto& cfg = model.config();
  std::ostringstream kinds;
  for (std::size_t i = 0; i < cfg.input_kinds.size(); ++i) {
    kinds << (i ? "," : "") << static_cast<int>(cfg.input_kinds[i]);
  }
  std::map<std::string, std::string> hp{
      {"kind", std::string(to_string(cfg.kind))},
      {"downsample_ratio", std::to_string(cfg.downsample_ratio)},
      {"codebook_size", std::to_string(cfg.codebook_size)},
      {"code_dim", std::to_string(cfg.code_dim)},
      {"hidden", std::to_string(cfg.hidden)},
      {"num_blocks", std::to_string(cfg.num_blocks)},
      {"recon_weight", std::to_string(cfg.recon_weight)},
      {"commit_weight", std::to_string(cfg.commit_weight)},
      {"input_kinds", kinds.str()},
  };
  nn::save_checkpoint(path, nn::capture("tokenizer", std::move(hp), model.parameters()));
}

Tokenizer load_tokenizer(const std::filesystem::path& path) {
  const auto ckpt = nn::load_checkpoint(path);
  if (ckpt.module != "tokenizer") throw FormatError("checkpoint holds '" + ckpt.module + "', not a tokenizer");
  TokenizerConfig cfg;
  cfg.kind = token_kind_from_string(ckpt.hparam("kind"));
  cfg.downsample_ratio = static_cast<std::size_t>(ckpt.hparam_int("downsample_ratio"));
  cfg.codebook_size = static_cast<std::size_t>(ckpt.hparam_int("codebook_size"));
  cfg.code_dim = static_cast<std::size_t>(ckpt.hparam_int("code_dim"));
  cfg.hidden = static_cast<std::size_t>(ckpt.hparam_int("hidden"));
  cfg.num_blocks = static_cast<std::size_t>(ckpt.hparam_int("num_blocks"));
  cfg.recon_weight = ckpt.hparam_double("recon_weight");
  cfg.commit_weight = ckpt.hparam_double("commit_weight");
  cfg.input_kinds.clear();
  std::istringstream kinds(ckpt.hparam("input_kinds"));
  for (std::string tok; std::getline(kinds, tok, ',');) {
    const int k = std::stoi(tok);
    if (k < 0 || k > static_cast<int>(dsp::FeatureKind::kPseudoContent)) throw FormatError("bad input kind");
    cfg.input_kinds.push_back(static_cast<dsp::FeatureKind>(k));
  }
  Tokenizer model(cfg, 0);
  nn::restore(ckpt, model.parameters());
  return model;
}

template class VqVae<float>;
template class VqVae<double>;

#define VEVO_INSTANTIATE_VQ(T)                                                                                 \
  template Tensor<T> vqvae_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, T); \
  template Tensor<T> vqvae_loss(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&, const Tensor<T>&, \
                                const Tensor<T>&, T, T);                                                       \
  template Tensor<T> codebook_loss(const Tensor<T>&, const Tensor<T>&);                                       \
  template std::vector<Tensor<T>> split_inputs(const Tensor<T>&, const TokenizerConfig&);

VEVO_INSTANTIATE_VQ(float)
VEVO_INSTANTIATE_VQ(double)

}  // namespace vevo::tokenizer
