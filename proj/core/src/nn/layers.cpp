#include "vevo/nn/layers.hpp"

#include "vevo/common/error.hpp"

namespace vevo::nn {

template <typename T>
Tensor<T> truncated_normal(Shape shape, T stddev, Rng& rng, bool requires_grad) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> values(numel_of(shape));
  for (auto& v : values) {
    double z = normal(rng);
    while (std::abs(z) > 2.0) z = normal(rng);
    v = static_cast<T>(z) * stddev;
  }
  return Tensor<T>::from_vector(std::move(values), std::move(shape), requires_grad);
}

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : weight(truncated_normal<T>({out, in}, static_cast<T>(kInitStd), rng)) {
  if (with_bias) bias = Tensor<T>::zeros({out}, true);
}

template <typename T>
void Linear<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, false});
}

template <typename T>
Conv1d<T>::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size, std::size_t stride_,
                  Rng& rng)
    : weight(truncated_normal<T>({out_channels, kernel_size * in_channels}, static_cast<T>(kInitStd), rng)),
      bias(Tensor<T>::zeros({out_channels}, true)),
      kernel(kernel_size),
      stride(stride_) {
  if (stride == 1) {
    pad_left = (kernel - 1) / 2;
    pad_right = kernel - 1 - pad_left;
  }
}

template <typename T>
Tensor<T> Conv1d<T>::operator()(const Tensor<T>& x) const {
  return conv1d(x, weight, bias, kernel, stride, pad_left, pad_right);
}

template <typename T>
void Conv1d<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, false});
}

template <typename T>
LayerNorm<T>::LayerNorm(std::size_t width)
    : gamma(Tensor<T>::full({width}, T(1), true)), beta(Tensor<T>::zeros({width}, true)) {}

template <typename T>
void LayerNorm<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma, false});
  out.push_back({prefix + ".beta", beta, false});
}

template <typename T>
Embedding<T>::Embedding(std::size_t count, std::size_t width, Rng& rng)
    : table(truncated_normal<T>({count, width}, static_cast<T>(kInitStd), rng)) {}

template <typename T>
void Embedding<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".table", table, true});
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(std::size_t width, std::size_t heads_, bool causal_, Rng& rng)
    : qkv(width, 3 * width, rng), proj(width, width, rng), heads(heads_), causal(causal_) {
  if (heads == 0 || width % heads != 0) throw ParameterError("MultiHeadAttention: width must divide into heads");
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::operator()(const Tensor<T>& x) const {
  const std::size_t d = x.cols();
  const auto packed = qkv(x);
  const auto q = slice_cols(packed, 0, d);
  const auto k = slice_cols(packed, d, 2 * d);
  const auto v = slice_cols(packed, 2 * d, 3 * d);
  return proj(attention(q, k, v, heads, causal));
}

template <typename T>
void MultiHeadAttention<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  qkv.collect(out, prefix + ".qkv");
  proj.collect(out, prefix + ".proj");
}

template <typename T>
Mlp<T>::Mlp(std::size_t width, std::size_t hidden, Rng& rng) : fc1(width, hidden, rng), fc2(hidden, width, rng) {}

template <typename T>
void Mlp<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  fc1.collect(out, prefix + ".fc1");
  fc2.collect(out, prefix + ".fc2");
}

template <typename T>
TransformerBlock<T>::TransformerBlock(std::size_t width, std::size_t heads, bool causal, Rng& rng)
    : ln1(width), attn(width, heads, causal, rng), ln2(width), mlp(width, 4 * width, rng) {}

template <typename T>
Tensor<T> TransformerBlock<T>::operator()(const Tensor<T>& x) const {
  const auto h = add(x, attn(ln1(x)));
  return add(h, mlp(ln2(h)));
}

template <typename T>
void TransformerBlock<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  ln1.collect(out, prefix + ".ln1");
  attn.collect(out, prefix + ".attn");
  ln2.collect(out, prefix + ".ln2");
  mlp.collect(out, prefix + ".mlp");
}

template <typename T>
ResidualConvBlock<T>::ResidualConvBlock(std::size_t width, Rng& rng)
    : norm(width), conv1(width, width, 3, 1, rng), conv2(width, width, 3, 1, rng) {}

template <typename T>
Tensor<T> ResidualConvBlock<T>::operator()(const Tensor<T>& x) const {
  return add(x, conv2(gelu(conv1(norm(x)))));
}

template <typename T>
void ResidualConvBlock<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  norm.collect(out, prefix + ".norm");
  conv1.collect(out, prefix + ".conv1");
  conv2.collect(out, prefix + ".conv2");
}

template <typename Dst, typename Src>
void copy_parameters(const ParameterList<Src>& from, ParameterList<Dst>& to) {
  if (from.size() != to.size()) throw ShapeError("copy_parameters: parameter counts differ");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].name != to[i].name || from[i].tensor.shape() != to[i].tensor.shape()) {
      throw ShapeError("copy_parameters: mismatch at " + from[i].name);
    }
    const auto src = from[i].tensor.data();
    auto dst = to[i].tensor.mutable_data();
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<Dst>(src[j]);
  }
}

template <typename T>
std::size_t parameter_count(const ParameterList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

#define VEVO_INSTANTIATE_LAYERS(T)                                              \
  template Tensor<T> truncated_normal(Shape, T, Rng&, bool);                    \
  template class Linear<T>;                                                     \
  template class Conv1d<T>;                                                     \
  template class LayerNorm<T>;                                                  \
  template class Embedding<T>;                                                  \
  template class MultiHeadAttention<T>;                                         \
  template class Mlp<T>;                                                        \
  template class TransformerBlock<T>;                                           \
  template class ResidualConvBlock<T>;                                          \
  template std::size_t parameter_count(const ParameterList<T>&);

VEVO_INSTANTIATE_LAYERS(float)
VEVO_INSTANTIATE_LAYERS(double)

template void copy_parameters(const ParameterList<float>&, ParameterList<double>&);
template void copy_parameters(const ParameterList<double>&, ParameterList<float>&);
template void copy_parameters(const ParameterList<float>&, ParameterList<float>&);

}  // namespace vevo::nn
