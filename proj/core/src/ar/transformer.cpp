#include "vevo/ar/transformer.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numeric>

#include "vevo/common/error.hpp"
#include "vevo/nn/checkpoint.hpp"
#include "vevo/nn/ops.hpp"

namespace vevo::ar {
namespace {

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMat<T>> weight_of(const nn::Linear<T>& l) {
  return {l.weight.data().data(), static_cast<Eigen::Index>(l.weight.rows()),
          static_cast<Eigen::Index>(l.weight.cols())};
}

template <typename T>
Vec<T> apply(const nn::Linear<T>& l, const Vec<T>& x) {
  Vec<T> y = weight_of(l) * x;
  if (l.bias.defined()) y += Eigen::Map<const Vec<T>>(l.bias.data().data(), y.size());
  return y;
}

template <typename T>
Vec<T> apply(const nn::LayerNorm<T>& ln, const Vec<T>& x) {
  const auto m = static_cast<T>(x.size());
  const T mu = x.sum() / m;
  const T var = (x.array() - mu).square().sum() / m;
  const T inv = T(1) / std::sqrt(var + T(1e-5));
  const Eigen::Map<const Vec<T>> g(ln.gamma.data().data(), x.size());
  const Eigen::Map<const Vec<T>> b(ln.beta.data().data(), x.size());
  return ((x.array() - mu) * inv * g.array() + b.array()).matrix();
}

template <typename T>
T gelu(T x) {
  constexpr T kC = static_cast<T>(0.7978845608028654);
  constexpr T kA = static_cast<T>(0.044715);
  return T(0.5) * x * (T(1) + std::tanh(kC * (x + kA * x * x * x)));
}

}  // namespace

void ArConfig::validate() const {
  if (width == 0 || layers == 0 || heads == 0 || width % heads != 0) {
    throw ParameterError("ArConfig: width must be positive and divisible by heads");
  }
  if (max_len < 2) throw ParameterError("ArConfig: max_len must be at least 2");
}

template <typename T>
ArTransformer<T>::ArTransformer(ArConfig cfg, std::uint64_t seed) : cfg_(cfg), vocab_(cfg.vocabulary()) {
  cfg_.validate();
  nn::Rng rng(seed);
  tok_ = nn::Embedding<T>(vocab_.size(), cfg_.width, rng);
  pos_ = nn::Embedding<T>(cfg_.max_len, cfg_.width, rng);
  for (std::size_t i = 0; i < cfg_.layers; ++i) blocks_.emplace_back(cfg_.width, cfg_.heads, true, rng);
  ln_f_ = nn::LayerNorm<T>(cfg_.width);
  head_ = nn::Linear<T>(cfg_.width, vocab_.size(), rng);
}

template <typename T>
nn::Tensor<T> ArTransformer<T>::hidden(std::span<const std::int32_t> ids) const {
  if (ids.empty()) throw ShapeError("ArTransformer: empty input");
  if (ids.size() > cfg_.max_len) {
    throw ShapeError("ArTransformer: sequence of " + std::to_string(ids.size()) + " exceeds max_len " +
                     std::to_string(cfg_.max_len));
  }
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) throw VocabularyError("ArTransformer: id out of range");
  }
  std::vector<std::int32_t> positions(ids.size());
  std::iota(positions.begin(), positions.end(), 0);
  auto x = nn::add(tok_(ids), pos_(positions));
  for (const auto& b : blocks_) x = b(x);
  return ln_f_(x);
}

template <typename T>
nn::ParameterList<T> ArTransformer<T>::parameters() const {
  nn::ParameterList<T> p;
  tok_.collect(p, "tok");
  pos_.collect(p, "pos");
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(p, "block" + std::to_string(i));
  ln_f_.collect(p, "ln_f");
  head_.collect(p, "head");
  return p;
}

template <typename T>
KvCache<T> ArTransformer<T>::make_cache() const {
  KvCache<T> c;
  c.keys.resize(cfg_.layers);
  c.values.resize(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    c.keys[l].reserve(cfg_.max_len * cfg_.width);
    c.values[l].reserve(cfg_.max_len * cfg_.width);
  }
  return c;
}

template <typename T>
std::vector<T> ArTransformer<T>::advance(KvCache<T>& cache, std::int32_t id) const {
  const std::size_t d = cfg_.width, pos = cache.length;
  if (pos >= cfg_.max_len) throw ShapeError("ArTransformer: KV cache is full");
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) throw VocabularyError("ArTransformer: id out of range");
  if (cache.keys.size() != cfg_.layers) throw ShapeError("ArTransformer: cache built for another model");
  const auto ed = static_cast<Eigen::Index>(d);
  Vec<T> x = Eigen::Map<const Vec<T>>(tok_.table.data().data() + static_cast<std::size_t>(id) * d, ed) +
             Eigen::Map<const Vec<T>>(pos_.table.data().data() + pos * d, ed);

  const std::size_t heads = cfg_.heads, dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<T> scores(pos + 1);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& blk = blocks_[l];
    const Vec<T> qkv = apply(blk.attn.qkv, apply(blk.ln1, x));
    auto& keys = cache.keys[l];
    auto& vals = cache.values[l];
    keys.insert(keys.end(), qkv.data() + d, qkv.data() + 2 * d);
    vals.insert(vals.end(), qkv.data() + 2 * d, qkv.data() + 3 * d);
    Vec<T> o = Vec<T>::Zero(ed);
    for (std::size_t h = 0; h < heads; ++h) {
      const T* q = qkv.data() + h * dh;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j <= pos; ++j) {
        const T* k = keys.data() + j * d + h * dh;
        T s = T(0);
        for (std::size_t c = 0; c < dh; ++c) s += q[c] * k[c];
        scores[j] = s * scale;
        mx = std::max(mx, scores[j]);
      }
      T z = T(0);
      for (std::size_t j = 0; j <= pos; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        z += scores[j];
      }
      for (std::size_t j = 0; j <= pos; ++j) {
        const T w = scores[j] / z;
        const T* v = vals.data() + j * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) o[static_cast<Eigen::Index>(h * dh + c)] += w * v[c];
      }
    }
    x += apply(blk.attn.proj, o);
    Vec<T> m = apply(blk.mlp.fc1, apply(blk.ln2, x));
    for (auto& v : m) v = gelu(v);
    x += apply(blk.mlp.fc2, m);
  }
  ++cache.length;
  const Vec<T> logits = apply(head_, apply(ln_f_, x));
  return {logits.data(), logits.data() + logits.size()};
}

void save_ar_model(const std::filesystem::path& path, const ArModel& model) {
  const auto& c = model.config();
  std::map<std::string, std::string> hp{
      {"prosody_size", std::to_string(c.prosody_size)}, {"cs_size", std::to_string(c.cs_size)},
      {"width", std::to_string(c.width)},               {"layers", std::to_string(c.layers)},
      {"heads", std::to_string(c.heads)},               {"max_len", std::to_string(c.max_len)},
  };
  nn::save_checkpoint(path, nn::capture("ar", std::move(hp), model.parameters()));
}

ArModel load_ar_model(const std::filesystem::path& path) {
  const auto ckpt = nn::load_checkpoint(path);
  if (ckpt.module != "ar") throw FormatError("checkpoint holds '" + ckpt.module + "', not an AR model");
  ArConfig c;
  c.prosody_size = static_cast<std::size_t>(ckpt.hparam_int("prosody_size"));
  c.cs_size = static_cast<std::size_t>(ckpt.hparam_int("cs_size"));
  c.width = static_cast<std::size_t>(ckpt.hparam_int("width"));
  c.layers = static_cast<std::size_t>(ckpt.hparam_int("layers"));
  c.heads = static_cast<std::size_t>(ckpt.hparam_int("heads"));
  c.max_len = static_cast<std::size_t>(ckpt.hparam_int("max_len"));
  ArModel model(c, 0);
  nn::restore(ckpt, model.parameters());
  return model;
}

template class ArTransformer<float>;
template class ArTransformer<double>;

}  // namespace vevo::ar
