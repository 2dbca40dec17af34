#pragma once

#include <Eigen/Core>
#include <string>

#include "vevo/common/error.hpp"
#include "vevo/nn/tensor.hpp"

namespace vevo::nn::detail {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const Mat<T>>;
template <typename T>
using MutMap = Eigen::Map<Mat<T>>;

/// Gradient buffer of parent i, or nullptr when it does not need one.
template <typename T>
T* parent_grad(const Node<T>& out, std::size_t i) {
  const auto& p = out.parents[i];
  if (!p || !p->requires_grad) return nullptr;
  return p->grad_buffer();
}

template <typename T>
const std::vector<T>& parent_data(const Node<T>& out, std::size_t i) {
  return out.parents[i]->data;
}

template <typename T>
void require_rank2(const Tensor<T>& t, const char* op) {
  if (!t.defined() || t.rank() != 2) throw ShapeError(std::string(op) + ": expected a rank-2 tensor");
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <typename T>
ConstMap<T> as_matrix(const std::vector<T>& v, std::size_t rows, std::size_t cols) {
  return ConstMap<T>(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
MutMap<T> as_matrix(T* p, std::size_t rows, std::size_t cols) {
  return MutMap<T>(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace vevo::nn::detail
