#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vevo/nn/ops.hpp"
#include "vevo/nn/tensor.hpp"

namespace vevo::nn {

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
  bool decay = true;  // weight decay applies (matrices yes, biases/norms no)
};

template <typename T>
using ParameterList = std::vector<NamedParameter<T>>;

using Rng = std::mt19937_64;

/// Normal(0, stddev) truncated to +-2 stddev by resampling.
template <typename T>
Tensor<T> truncated_normal(Shape shape, T stddev, Rng& rng, bool requires_grad = true);

inline constexpr double kInitStd = 0.02;

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  [[nodiscard]] Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
  void collect(ParameterList<T>& out, const std::string& prefix) const;

  Tensor<T> weight;  // [out x in]
  Tensor<T> bias;    // [out], may be undefined
};

/// Time-major convolution; odd kernels with stride 1 keep the frame count.
template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride, Rng& rng);
  [[nodiscard]] Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParameterList<T>& out, const std::string& prefix) const;

  Tensor<T> weight;  // [Cout x kernel*Cin]
  Tensor<T> bias;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t width);
  [[nodiscard]] Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta); }
  void collect(ParameterList<T>& out, const std::string& prefix) const;

  Tensor<T> gamma;
  Tensor<T> beta;
};

template <typename T>
class Embedding {
 public:
  Embedding() = default;
  Embedding(std::size_t count, std::size_t width, Rng& rng);
  [[nodiscard]] Tensor<T> operator()(std::span<const std::int32_t> ids) const { return embedding(table, ids); }
  void collect(ParameterList<T>& out, const std::string& prefix) const;

  Tensor<T> table;  // [count x width]
};

template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t width, std::size_t heads, bool causal, Rng& rng);
  [[nodiscard]] Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParameterList<T>& out, const std::string& prefix) const;

  Linear<T> qkv;  // width -> 3*width, packed [q | k | v]
  Linear<T> proj;
  std::size_t heads = 1;
  bool causal = true;
};

template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t width, std::size_t hidden, Rng& rng);
  [[nodiscard]] Tensor<T> operator()(const Tensor<T>& x) const { return fc2(gelu(fc1(x))); }
  void collect(ParameterList<T>& out, const std::string& prefix) const;

  Linear<T> fc1;
  Linear<T> fc2;
};

/// Pre-norm transformer block: x + attn(ln1(x)), then + mlp(ln2(x)).
template <typename T>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(std::size_t width, std::size_t heads, bool causal, Rng& rng);
  [[nodiscard]] Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParameterList<T>& out, const std::string& prefix) const;

  LayerNorm<T> ln1;
  MultiHeadAttention<T> attn;
  LayerNorm<T> ln2;
  Mlp<T> mlp;
};

/// x + conv2(gelu(conv1(ln(x)))) with kernel-3 same-length convolutions.
template <typename T>
class ResidualConvBlock {
 public:
  ResidualConvBlock() = default;
  ResidualConvBlock(std::size_t width, Rng& rng);
  [[nodiscard]] Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParameterList<T>& out, const std::string& prefix) const;

  LayerNorm<T> norm;
  Conv1d<T> conv1;
  Conv1d<T> conv2;
};

/// Copies parameter values between lists with identical names and shapes
/// (for example float weights into a double-precision replica).
template <typename Dst, typename Src>
void copy_parameters(const ParameterList<Src>& from, ParameterList<Dst>& to);

template <typename T>
std::size_t parameter_count(const ParameterList<T>& params);

}  // namespace vevo::nn
