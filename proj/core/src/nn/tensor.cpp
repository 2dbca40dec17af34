#include "vevo/nn/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "vevo/common/error.hpp"

namespace vevo::nn {

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto node = std::make_shared<detail::Node<T>>();
  node->data.assign(numel_of(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from_vector(std::vector<T> values, Shape shape, bool requires_grad) {
  if (values.size() != numel_of(shape)) {
    throw ShapeError("Tensor: " + std::to_string(values.size()) + " values for shape " + to_string(shape));
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->data = std::move(values);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_vector({value}, {1}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::make_result(const char* op, Shape shape, std::vector<T> values,
                                 std::vector<Tensor> parents, BackwardFn backward) {
  if (values.size() != numel_of(shape)) {
    throw ShapeError(std::string(op) + ": result size does not match shape " + to_string(shape));
  }
  for (const T& v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value in result");
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->data = std::move(values);
  node->shape = std::move(shape);
  bool any = false;
  for (const auto& p : parents) any = any || (p.defined() && p.requires_grad());
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);  // may be null for optional inputs
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw ShapeError("Tensor: undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t i) const {
  const auto& s = shape();
  if (i >= s.size()) throw ShapeError("Tensor: dimension index out of range");
  return s[i];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return node_ ? node_->data.size() : 0;
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  if (rank() != 2) throw ShapeError("Tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
  return node_->shape[0];
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (rank() != 2) throw ShapeError("Tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
  return node_->shape[1];
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  if (!node_) return {};
  return node_->data;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_) return {};
  return node_->data;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!node_) return {};
  return node_->grad;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (!node_) return {};
  node_->grad_buffer();
  return node_->grad;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return node_ && node_->grad.size() == node_->data.size() && !node_->grad.empty();
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
  if (node_) node_->requires_grad = value;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("Tensor: item() on tensor with " + std::to_string(numel()) + " elements");
  return node_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from_vector(node_->data, node_->shape, false);
}

template <typename T>
void Tensor<T>::backward() const {
  if (!node_) throw ShapeError("backward: undefined tensor");
  if (node_->data.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(node_->shape));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> visited;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      auto* p = n->parents[next++].get();
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* n = *it;
    if (n->backward) {
      n->grad_buffer();
      n->backward(*n);
    }
  }
  for (auto* n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->parents.clear();
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace vevo::nn
