#include "vevo/fm/flow_model.hpp"

#include <cmath>
#include <numeric>

#include "vevo/common/error.hpp"
#include "vevo/nn/checkpoint.hpp"
#include "vevo/nn/ops.hpp"

namespace vevo::fm {

using nn::Tensor;

void FmCondition::validate(std::size_t mel_bins) const {
  if (cs.kind != tokenizer::TokenKind::kContentStyle || ref_cs.kind != tokenizer::TokenKind::kContentStyle) {
    throw ParameterError("FmCondition: tokens must be content-style");
  }
  if (cs.ids.empty()) throw ParameterError("FmCondition: no target tokens");
  if (ref_mel.num_frames != kFramesPerToken * ref_cs.size()) {
    throw ShapeError("FmCondition: reference mel has " + std::to_string(ref_mel.num_frames) + " frames for " +
                     std::to_string(ref_cs.size()) + " reference tokens");
  }
  if (!ref_cs.ids.empty() && ref_mel.dim != mel_bins) throw ShapeError("FmCondition: reference mel width mismatch");
}

void FmConfig::validate() const {
  if (cs_size == 0 || mel_bins == 0 || width == 0 || layers == 0) throw ParameterError("FmConfig: sizes must be positive");
  if (heads == 0 || width % heads != 0 || width % 2 != 0) {
    throw ParameterError("FmConfig: width must be even and divisible by heads");
  }
}

std::vector<std::int32_t> upsample_ids(std::span<const std::int32_t> ids) {
  std::vector<std::int32_t> out;
  out.reserve(ids.size() * kFramesPerToken);
  for (auto id : ids) out.insert(out.end(), kFramesPerToken, id);
  return out;
}

template <typename T>
Tensor<T> upsample_tokens_to_frames(const tokenizer::TokenSequence& cs, const Tensor<T>& table) {
  if (cs.kind != tokenizer::TokenKind::kContentStyle) throw ParameterError("upsample: expected content-style tokens");
  const auto ids = upsample_ids(cs.ids);
  if (ids.empty()) return Tensor<T>::zeros({0, table.cols()});
  return nn::embedding(table, std::span<const std::int32_t>(ids));
}

template <typename T>
Tensor<T> normalize_mel(const dsp::FeatureMatrix& mel) {
  std::vector<T> v(mel.data.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>((mel.data[i] - kMelShift) / kMelScale);
  return Tensor<T>::from_vector(std::move(v), {mel.num_frames, mel.dim});
}

dsp::FeatureMatrix denormalize_mel(std::span<const float> x, std::size_t frames, std::size_t bins) {
  if (x.size() != frames * bins) throw ShapeError("denormalize_mel: size mismatch");
  dsp::FeatureMatrix mel(frames, bins, dsp::FeatureKind::kMel);
  for (std::size_t i = 0; i < x.size(); ++i) mel.data[i] = x[i] * kMelScale + kMelShift;
  return mel;
}

template <typename T>
FlowModel<T>::FlowModel(FmConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  const std::size_t d = cfg_.width;
  in_proj_ = nn::Linear<T>(cfg_.mel_bins, d, rng);
  token_emb_ = nn::Embedding<T>(cfg_.cs_size, d, rng);
  region_emb_ = nn::Embedding<T>(2, d, rng);
  pos_emb_ = nn::Embedding<T>(cfg_.max_frames, d, rng);
  time_fc1_ = nn::Linear<T>(d, d, rng);
  time_fc2_ = nn::Linear<T>(d, d, rng);
  for (std::size_t i = 0; i < cfg_.layers; ++i) blocks_.emplace_back(d, cfg_.heads, false, rng);
  ln_f_ = nn::LayerNorm<T>(d);
  out_proj_ = nn::Linear<T>(d, cfg_.mel_bins, rng);
}

template <typename T>
Tensor<T> FlowModel<T>::velocity(const Tensor<T>& x_t, T t, const FmCondition& cond) const {
  cond.validate(cfg_.mel_bins);
  const std::size_t nr = cond.ref_mel.num_frames, nt = cond.target_frames(), n = nr + nt, d = cfg_.width;
  if (!x_t.defined() || x_t.rank() != 2 || x_t.rows() != nt || x_t.cols() != cfg_.mel_bins) {
    throw ShapeError("FlowModel: state must be [" + std::to_string(nt) + " x " + std::to_string(cfg_.mel_bins) + "]");
  }
  if (n > cfg_.max_frames) throw ShapeError("FlowModel: " + std::to_string(n) + " frames exceed max_frames");
  for (auto id : cond.cs.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.cs_size) throw ParameterError("FlowModel: token id out of range");
  }

  Tensor<T> x = nr > 0 ? nn::concat_rows<T>({normalize_mel<T>(cond.ref_mel), x_t}) : x_t;
  std::vector<std::int32_t> tokens = upsample_ids(cond.ref_cs.ids);
  const auto target_tokens = upsample_ids(cond.cs.ids);
  tokens.insert(tokens.end(), target_tokens.begin(), target_tokens.end());
  std::vector<std::int32_t> region(n, 1), positions(n);
  std::fill(region.begin(), region.begin() + static_cast<std::ptrdiff_t>(nr), 0);
  std::iota(positions.begin(), positions.end(), 0);

  std::vector<T> feat(d);
  const std::size_t half = d / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    feat[i] = static_cast<T>(std::sin(1000.0 * static_cast<double>(t) * freq));
    feat[half + i] = static_cast<T>(std::cos(1000.0 * static_cast<double>(t) * freq));
  }
  const auto temb = time_fc2_(nn::gelu(time_fc1_(Tensor<T>::from_vector(std::move(feat), {1, d}))));

  Tensor<T> h = nn::add(in_proj_(x), token_emb_(tokens));
  h = nn::add(h, nn::add(region_emb_(region), pos_emb_(positions)));
  h = nn::add_row(h, nn::reshape(temb, {d}));
  for (const auto& b : blocks_) h = b(h);
  h = ln_f_(h);
  if (nr > 0) h = nn::slice_rows(h, nr, n);
  return out_proj_(h);
}

template <typename T>
nn::ParameterList<T> FlowModel<T>::parameters() const {
  nn::ParameterList<T> p;
  in_proj_.collect(p, "in_proj");
  token_emb_.collect(p, "token_emb");
  region_emb_.collect(p, "region_emb");
  pos_emb_.collect(p, "pos_emb");
  time_fc1_.collect(p, "time.fc1");
  time_fc2_.collect(p, "time.fc2");
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(p, "block" + std::to_string(i));
  ln_f_.collect(p, "ln_f");
  out_proj_.collect(p, "out_proj");
  return p;
}

template <typename T>
Tensor<T> cfm_loss_at(const Tensor<T>& x1, const Tensor<T>& x0, T t, const FmCondition& cond,
                      const FlowModel<T>& model) {
  if (x1.shape() != x0.shape()) throw ShapeError("cfm_loss: x0 and x1 shapes differ");
  if (!(t >= T(0) && t <= T(1))) throw ParameterError("cfm_loss: t must lie in [0, 1]");
  const auto x_t = nn::add(nn::scale(x0, T(1) - t), nn::scale(x1, t));
  return nn::mse(model.velocity(x_t, t, cond), nn::sub(x1, x0));
}

namespace {

std::vector<float> gaussian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace

Tensor<float> cfm_loss(const dsp::FeatureMatrix& target, const FmCondition& cond, const FlowModel<float>& model,
                       std::mt19937_64& rng) {
  if (target.num_frames != cond.target_frames() || target.dim != model.config().mel_bins) {
    throw ShapeError("cfm_loss: target mel must have " + std::to_string(cond.target_frames()) + " frames");
  }
  const float t = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
  auto x0 = Tensor<float>::from_vector(gaussian(target.data.size(), rng), {target.num_frames, target.dim});
  return cfm_loss_at(normalize_mel<float>(target), x0, t, cond, model);
}

dsp::FeatureMatrix sample_from(const FmCondition& cond, std::size_t steps, const FlowModel<float>& model,
                               std::vector<float> x0) {
  if (steps == 0) throw ParameterError("sample: steps must be >= 1");
  const std::size_t frames = cond.target_frames(), bins = model.config().mel_bins;
  if (x0.size() != frames * bins) throw ShapeError("sample: initial state has the wrong size");
  std::vector<float> x = std::move(x0);
  const float dt = 1.0f / static_cast<float>(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const float t = static_cast<float>(i) * dt;
    const auto vel = model.velocity(Tensor<float>::from_vector(x, {frames, bins}), t, cond);
    const auto v = vel.data();
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += dt * v[j];
  }
  return denormalize_mel(x, frames, bins);
}

dsp::FeatureMatrix sample(const FmCondition& cond, std::size_t steps, const FlowModel<float>& model,
                          std::mt19937_64& rng) {
  cond.validate(model.config().mel_bins);
  return sample_from(cond, steps, model, gaussian(cond.target_frames() * model.config().mel_bins, rng));
}

void save_flow_model(const std::filesystem::path& path, const FlowModel<float>& model) {
  const auto& c = model.config();
  std::map<std::string, std::string> hp{
      {"cs_size", std::to_string(c.cs_size)}, {"mel_bins", std::to_string(c.mel_bins)},
      {"width", std::to_string(c.width)},     {"layers", std::to_string(c.layers)},
      {"heads", std::to_string(c.heads)},     {"max_frames", std::to_string(c.max_frames)},
  };
  nn::save_checkpoint(path, nn::capture("fm", std::move(hp), model.parameters()));
}

FlowModel<float> load_flow_model(const std::filesystem::path& path) {
  const auto ckpt = nn::load_checkpoint(path);
  if (ckpt.module != "fm") throw FormatError("checkpoint holds '" + ckpt.module + "', not a flow model");
  FmConfig c;
  c.cs_size = static_cast<std::size_t>(ckpt.hparam_int("cs_size"));
  c.mel_bins = static_cast<std::size_t>(ckpt.hparam_int("mel_bins"));
  c.width = static_cast<std::size_t>(ckpt.hparam_int("width"));
  c.layers = static_cast<std::size_t>(ckpt.hparam_int("layers"));
  c.heads = static_cast<std::size_t>(ckpt.hparam_int("heads"));
  c.max_frames = static_cast<std::size_t>(ckpt.hparam_int("max_frames"));
  FlowModel<float> model(c, 0);
  nn::restore(ckpt, model.parameters());
  return model;
}

template class FlowModel<float>;
template class FlowModel<double>;
template Tensor<float> upsample_tokens_to_frames(const tokenizer::TokenSequence&, const Tensor<float>&);
template Tensor<double> upsample_tokens_to_frames(const tokenizer::TokenSequence&, const Tensor<double>&);
template Tensor<float> normalize_mel(const dsp::FeatureMatrix&);
template Tensor<double> normalize_mel(const dsp::FeatureMatrix&);
template Tensor<float> cfm_loss_at(const Tensor<float>&, const Tensor<float>&, float, const FmCondition&,
                                   const FlowModel<float>&);
template Tensor<double> cfm_loss_at(const Tensor<double>&, const Tensor<double>&, double, const FmCondition&,
                                    const FlowModel<double>&);

}  // namespace vevo::fm
