#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vevo::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node {
  std::vector<T> data;
  std::vector<T> grad;  // allocated lazily
  Shape shape;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad (and data) and accumulates into the parents.
  std::function<void(const Node&)> backward;

  T* grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad.data();
  }
};

}  // namespace detail

/// Reference-counted handle to a node of a reverse-mode autodiff graph.
/// Copies alias the same storage. Ops record a graph only when at least one
/// input requires gradients, so inference with frozen parameters is graph-free.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;
  using BackwardFn = std::function<void(const detail::Node<T>&)>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_vector(std::vector<T> values, Shape shape, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  /// Builds an op result. Validates finiteness of `values` (NaN/Inf tripwire)
  /// and only wires `backward` when some parent requires gradients.
  static Tensor make_result(const char* op, Shape shape, std::vector<T> values,
                            std::vector<Tensor> parents, BackwardFn backward);

  [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::size_t rank() const { return shape().size(); }
  [[nodiscard]] std::size_t dim(std::size_t i) const;
  [[nodiscard]] std::size_t numel() const;
  /// First and second extents of a rank-2 tensor.
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;

  [[nodiscard]] std::span<const T> data() const;
  /// Direct write access, meant for initialisers and optimisers on leaves.
  [[nodiscard]] std::span<T> mutable_data();
  [[nodiscard]] std::span<const T> grad() const;
  [[nodiscard]] std::span<T> mutable_grad();
  [[nodiscard]] bool has_grad() const;
  [[nodiscard]] bool requires_grad() const;
  void set_requires_grad(bool value);
  void zero_grad();
  [[nodiscard]] T item() const;

  /// Leaf copy of the value with no history.
  [[nodiscard]] Tensor detach() const;

  /// Reverse pass from a scalar. Populates grad() of every leaf that requires
  /// gradients and releases the intermediate graph.
  void backward() const;

  [[nodiscard]] const NodePtr& node() const { return node_; }

 private:
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}
  NodePtr node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace vevo::nn
