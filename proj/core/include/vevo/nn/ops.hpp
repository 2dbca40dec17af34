#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vevo/nn/tensor.hpp"

namespace vevo::nn {

// Differentiable operations. Matrices are rank-2 and row-major; sequence
// tensors are time-major [frames x channels].

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
/// a[n x m] + b[m] broadcast over rows.
template <typename T> Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& b);
/// a[n x m] * b[m] broadcast over rows.
template <typename T> Tensor<T> mul_row(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> relu(const Tensor<T>& a);
/// tanh-approximated GELU.
template <typename T> Tensor<T> gelu(const Tensor<T>& a);
template <typename T> Tensor<T> tanh(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> log_sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);

/// a[n x k] . b[k x m]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a[n x k] . b[m x k]^T
template <typename T> Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
/// x[n x in] . W[out x in]^T + b[out]; `bias` may be undefined.
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
template <typename T> Tensor<T> slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
/// Each row repeated `times` times consecutively: [n x d] -> [n*times x d].
template <typename T> Tensor<T> repeat_rows(const Tensor<T>& a, std::size_t times);
/// Rows of table[V x D] gathered by id.
template <typename T> Tensor<T> embedding(const Tensor<T>& table, std::span<const std::int32_t> ids);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
/// Mean of squared differences over all elements.
template <typename T> Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));
/// Each row divided by max(||row||, eps).
template <typename T> Tensor<T> l2_normalize_rows(const Tensor<T>& x, T eps = T(1e-6));

/// Weighted mean of -log softmax(logits)[target]: sum_i w_i * nll_i / sum_i w_i.
/// Rows with zero weight contribute nothing (their targets are ignored).
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> targets,
                                std::span<const T> weights);
/// Per-row log softmax(logits)[target], shape [n].
template <typename T>
Tensor<T> log_softmax_gather(const Tensor<T>& logits, std::span<const std::int32_t> targets);

/// Multi-head scaled dot-product attention over q, k, v [T x D], heads | D.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads, bool causal);

/// 1-D convolution over time: x[T x Cin], weight[Cout x (kernel*Cin)] laid out
/// tap-major (column j*Cin + c is tap j, channel c), bias[Cout] (may be undefined).
/// Output frames: (T + pad_left + pad_right - kernel) / stride + 1.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t kernel,
                 std::size_t stride, std::size_t pad_left, std::size_t pad_right);

/// Value of `a` with no gradient path.
template <typename T> Tensor<T> stop_gradient(const Tensor<T>& a);

/// Forward value z_q; backward passes the incoming gradient to z_e unchanged.
template <typename T> Tensor<T> straight_through(const Tensor<T>& z_e, const Tensor<T>& z_q);

}  // namespace vevo::nn
