#include "vevo/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nn/op_support.hpp"

namespace vevo::nn {

using detail::as_matrix;
using detail::Node;
using detail::parent_data;
using detail::parent_grad;
using detail::require_rank2;
using detail::require_same_shape;

namespace {

template <typename T, typename F, typename D>
Tensor<T> unary(const char* op, const Tensor<T>& a, F f, D dfdx) {
  const auto x = a.data();
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return Tensor<T>::make_result(op, a.shape(), std::move(y), {a}, [dfdx](const Node<T>& out) {
    if (T* g = parent_grad(out, 0)) {
      const auto& xv = parent_data(out, 0);
      for (std::size_t i = 0; i < xv.size(); ++i) g[i] += out.grad[i] * dfdx(xv[i], out.data[i]);
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  const auto x = a.data(), y = b.data();
  std::vector<T> r(x.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] + y[i];
  return Tensor<T>::make_result("add", a.shape(), std::move(r), {a, b}, [](const Node<T>& out) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (T* g = parent_grad(out, p)) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  const auto x = a.data(), y = b.data();
  std::vector<T> r(x.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] - y[i];
  return Tensor<T>::make_result("sub", a.shape(), std::move(r), {a, b}, [](const Node<T>& out) {
    if (T* g = parent_grad(out, 0)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
    }
    if (T* g = parent_grad(out, 1)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] -= out.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  const auto x = a.data(), y = b.data();
  std::vector<T> r(x.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] * y[i];
  return Tensor<T>::make_result("mul", a.shape(), std::move(r), {a, b}, [](const Node<T>& out) {
    const auto& xv = parent_data(out, 0);
    const auto& yv = parent_data(out, 1);
    if (T* g = parent_grad(out, 0)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * yv[i];
    }
    if (T* g = parent_grad(out, 1)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * xv[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return unary("scale", a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary("add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "add_row");
  const std::size_t n = a.rows(), m = a.cols();
  if (b.numel() != m) throw ShapeError("add_row: bias length does not match columns");
  const auto x = a.data(), y = b.data();
  std::vector<T> r(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) r[i * m + j] = x[i * m + j] + y[j];
  }
  return Tensor<T>::make_result("add_row", a.shape(), std::move(r), {a, b}, [n, m](const Node<T>& out) {
    if (T* g = parent_grad(out, 0)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
    }
    if (T* g = parent_grad(out, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) g[j] += out.grad[i * m + j];
      }
    }
  });
}

template <typename T>
Tensor<T> mul_row(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "mul_row");
  const std::size_t n = a.rows(), m = a.cols();
  if (b.numel() != m) throw ShapeError("mul_row: scale length does not match columns");
  const auto x = a.data(), y = b.data();
  std::vector<T> r(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) r[i * m + j] = x[i * m + j] * y[j];
  }
  return Tensor<T>::make_result("mul_row", a.shape(), std::move(r), {a, b}, [n, m](const Node<T>& out) {
    const auto& xv = parent_data(out, 0);
    const auto& yv = parent_data(out, 1);
    if (T* g = parent_grad(out, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) g[i * m + j] += out.grad[i * m + j] * yv[j];
      }
    }
    if (T* g = parent_grad(out, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) g[j] += out.grad[i * m + j] * xv[i * m + j];
      }
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary("relu", a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  constexpr T kC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = static_cast<T>(0.044715);
  return unary(
      "gelu", a,
      [](T x) { return T(0.5) * x * (T(1) + std::tanh(kC * (x + kA * x * x * x))); },
      [](T x, T) {
        const T u = kC * (x + kA * x * x * x);
        const T th = std::tanh(u);
        const T du = kC * (T(1) + T(3) * kA * x * x);
        return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
      });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary("tanh", a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary(
      "sigmoid", a,
      [](T x) { return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> log_sigmoid(const Tensor<T>& a) {
  // log sigma(x) = -softplus(-x), computed stably; derivative is sigma(-x).
  return unary(
      "log_sigmoid", a,
      [](T x) { return x >= T(0) ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); },
      [](T x, T) { return x >= T(0) ? std::exp(-x) / (T(1) + std::exp(-x)) : T(1) / (T(1) + std::exp(x)); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary("exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary("square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) throw ShapeError("matmul: inner dimensions differ " + to_string(a.shape()) + " . " + to_string(b.shape()));
  std::vector<T> r(n * m);
  as_matrix(r.data(), n, m).noalias() = as_matrix(a.node()->data, n, k) * as_matrix(b.node()->data, k, m);
  return Tensor<T>::make_result("matmul", {n, m}, std::move(r), {a, b}, [n, k, m](const Node<T>& out) {
    const auto dy = as_matrix(out.grad, n, m);
    if (T* g = parent_grad(out, 0)) as_matrix(g, n, k).noalias() += dy * as_matrix(parent_data(out, 1), k, m).transpose();
    if (T* g = parent_grad(out, 1)) as_matrix(g, k, m).noalias() += as_matrix(parent_data(out, 0), n, k).transpose() * dy;
  });
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k) throw ShapeError("matmul_nt: inner dimensions differ " + to_string(a.shape()) + " . " + to_string(b.shape()) + "^T");
  std::vector<T> r(n * m);
  as_matrix(r.data(), n, m).noalias() = as_matrix(a.node()->data, n, k) * as_matrix(b.node()->data, m, k).transpose();
  return Tensor<T>::make_result("matmul_nt", {n, m}, std::move(r), {a, b}, [n, k, m](const Node<T>& out) {
    const auto dy = as_matrix(out.grad, n, m);
    if (T* g = parent_grad(out, 0)) as_matrix(g, n, k).noalias() += dy * as_matrix(parent_data(out, 1), m, k);
    if (T* g = parent_grad(out, 1)) as_matrix(g, m, k).noalias() += dy.transpose() * as_matrix(parent_data(out, 0), n, k);
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank2(x, "linear");
  require_rank2(weight, "linear");
  const std::size_t n = x.rows(), in = x.cols(), o = weight.rows();
  if (weight.cols() != in) {
    throw ShapeError("linear: input width " + std::to_string(in) + " vs weight " + to_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != o) throw ShapeError("linear: bias length does not match output width");
  std::vector<T> r(n * o);
  auto y = as_matrix(r.data(), n, o);
  y.noalias() = as_matrix(x.node()->data, n, in) * as_matrix(weight.node()->data, o, in).transpose();
  if (has_bias) {
    const auto bv = bias.data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < o; ++j) r[i * o + j] += bv[j];
    }
  }
  return Tensor<T>::make_result("linear", {n, o}, std::move(r), {x, weight, bias}, [n, in, o](const Node<T>& out) {
    const auto dy = as_matrix(out.grad, n, o);
    if (T* g = parent_grad(out, 0)) as_matrix(g, n, in).noalias() += dy * as_matrix(parent_data(out, 1), o, in);
    if (T* g = parent_grad(out, 1)) as_matrix(g, o, in).noalias() += dy.transpose() * as_matrix(parent_data(out, 0), n, in);
    if (T* g = parent_grad(out, 2)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < o; ++j) g[j] += out.grad[i * o + j];
      }
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  return Tensor<T>::make_result("reshape", std::move(shape), std::vector<T>(a.data().begin(), a.data().end()), {a},
                                [](const Node<T>& out) {
                                  if (T* g = parent_grad(out, 0)) {
                                    for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
                                  }
                                });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank2(a, "transpose");
  const std::size_t n = a.rows(), m = a.cols();
  std::vector<T> r(n * m);
  as_matrix(r.data(), m, n) = as_matrix(a.node()->data, n, m).transpose();
  return Tensor<T>::make_result("transpose", {m, n}, std::move(r), {a}, [n, m](const Node<T>& out) {
    if (T* g = parent_grad(out, 0)) as_matrix(g, n, m) += as_matrix(out.grad, m, n).transpose();
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_rows");
  const std::size_t m = a.cols();
  if (begin > end || end > a.rows()) throw ShapeError("slice_rows: range out of bounds");
  const auto x = a.data();
  std::vector<T> r(x.begin() + static_cast<std::ptrdiff_t>(begin * m), x.begin() + static_cast<std::ptrdiff_t>(end * m));
  return Tensor<T>::make_result("slice_rows", {end - begin, m}, std::move(r), {a}, [begin, m](const Node<T>& out) {
    if (T* g = parent_grad(out, 0)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[begin * m + i] += out.grad[i];
    }
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  const std::size_t n = a.rows(), m = a.cols(), w = end - begin;
  if (begin > end || end > m) throw ShapeError("slice_cols: range out of bounds");
  const auto x = a.data();
  std::vector<T> r(n * w);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * m + begin), w, r.begin() + static_cast<std::ptrdiff_t>(i * w));
  }
  return Tensor<T>::make_result("slice_cols", {n, w}, std::move(r), {a}, [n, m, w, begin](const Node<T>& out) {
    if (T* g = parent_grad(out, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) g[i * m + begin + j] += out.grad[i * w + j];
      }
    }
  });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t m = parts.front().cols();
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != m) throw ShapeError("concat_rows: column counts differ");
    n += p.rows();
  }
  std::vector<T> r;
  r.reserve(n * m);
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(r.size());
    r.insert(r.end(), p.data().begin(), p.data().end());
  }
  return Tensor<T>::make_result("concat_rows", {n, m}, std::move(r), parts, [offsets](const Node<T>& out) {
    for (std::size_t p = 0; p < offsets.size(); ++p) {
      if (T* g = parent_grad(out, p)) {
        const std::size_t len = out.parents[p]->data.size();
        for (std::size_t i = 0; i < len; ++i) g[i] += out.grad[offsets[p] + i];
      }
    }
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts.front().rows();
  std::size_t m = 0;
  std::vector<std::size_t> widths, offsets;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != n) throw ShapeError("concat_cols: row counts differ");
    offsets.push_back(m);
    widths.push_back(p.cols());
    m += p.cols();
  }
  std::vector<T> r(n * m);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto x = parts[p].data();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * widths[p]), widths[p],
                  r.begin() + static_cast<std::ptrdiff_t>(i * m + offsets[p]));
    }
  }
  return Tensor<T>::make_result("concat_cols", {n, m}, std::move(r), parts, [n, m, widths, offsets](const Node<T>& out) {
    for (std::size_t p = 0; p < widths.size(); ++p) {
      if (T* g = parent_grad(out, p)) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < widths[p]; ++j) g[i * widths[p] + j] += out.grad[i * m + offsets[p] + j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> repeat_rows(const Tensor<T>& a, std::size_t times) {
  require_rank2(a, "repeat_rows");
  const std::size_t n = a.rows(), m = a.cols();
  const auto x = a.data();
  std::vector<T> r(n * times * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < times; ++t) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * m), m, r.begin() + static_cast<std::ptrdiff_t>((i * times + t) * m));
    }
  }
  return Tensor<T>::make_result("repeat_rows", {n * times, m}, std::move(r), {a}, [n, m, times](const Node<T>& out) {
    if (T* g = parent_grad(out, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < times; ++t) {
          for (std::size_t j = 0; j < m; ++j) g[i * m + j] += out.grad[(i * times + t) * m + j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::int32_t> ids) {
  require_rank2(table, "embedding");
  const std::size_t v = table.rows(), d = table.cols();
  const auto x = table.data();
  std::vector<T> r(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw ShapeError("embedding: id " + std::to_string(ids[i]) + " outside table of " + std::to_string(v));
    }
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * d), d,
                r.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return Tensor<T>::make_result("embedding", {ids.size(), d}, std::move(r), {table}, [idv, d](const Node<T>& out) {
    if (T* g = parent_grad(out, 0)) {
      for (std::size_t i = 0; i < idv.size(); ++i) {
        T* row = g + static_cast<std::size_t>(idv[i]) * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += out.grad[i * d + j];
      }
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.data()) s += v;
  return Tensor<T>::make_result("sum", {1}, {s}, {a}, [](const Node<T>& out) {
    if (T* g = parent_grad(out, 0)) {
      const std::size_t len = out.parents[0]->data.size();
      for (std::size_t i = 0; i < len; ++i) g[i] += out.grad[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mse");
  if (a.numel() == 0) throw ShapeError("mse: empty tensors");
  const auto x = a.data(), y = b.data();
  T s = T(0);
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  const T inv = T(1) / static_cast<T>(x.size());
  return Tensor<T>::make_result("mse", {1}, {s * inv}, {a, b}, [inv](const Node<T>& out) {
    const auto& xv = parent_data(out, 0);
    const auto& yv = parent_data(out, 1);
    const T g0 = out.grad[0] * T(2) * inv;
    if (T* g = parent_grad(out, 0)) {
      for (std::size_t i = 0; i < xv.size(); ++i) g[i] += g0 * (xv[i] - yv[i]);
    }
    if (T* g = parent_grad(out, 1)) {
      for (std::size_t i = 0; i < xv.size(); ++i) g[i] -= g0 * (xv[i] - yv[i]);
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  require_rank2(x, "layer_norm");
  const std::size_t n = x.rows(), m = x.cols();
  if (gamma.numel() != m || beta.numel() != m) throw ShapeError("layer_norm: affine parameters do not match width");
  const auto xv = x.data(), gv = gamma.data(), bv = beta.data();
  std::vector<T> r(n * m), xhat(n * m), inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    T mu = T(0);
    for (std::size_t j = 0; j < m; ++j) mu += xv[i * m + j];
    mu /= static_cast<T>(m);
    T var = T(0);
    for (std::size_t j = 0; j < m; ++j) var += (xv[i * m + j] - mu) * (xv[i * m + j] - mu);
    var /= static_cast<T>(m);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      xhat[i * m + j] = (xv[i * m + j] - mu) * inv_std[i];
      r[i * m + j] = xhat[i * m + j] * gv[j] + bv[j];
    }
  }
  return Tensor<T>::make_result(
      "layer_norm", {n, m}, std::move(r), {x, gamma, beta},
      [n, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node<T>& out) {
        const auto& gv2 = parent_data(out, 1);
        if (T* g = parent_grad(out, 1)) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) g[j] += out.grad[i * m + j] * xhat[i * m + j];
          }
        }
        if (T* g = parent_grad(out, 2)) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) g[j] += out.grad[i * m + j];
          }
        }
        if (T* g = parent_grad(out, 0)) {
          for (std::size_t i = 0; i < n; ++i) {
            T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
            for (std::size_t j = 0; j < m; ++j) {
              const T d = out.grad[i * m + j] * gv2[j];
              mean_dxhat += d;
              mean_dxhat_xhat += d * xhat[i * m + j];
            }
            mean_dxhat /= static_cast<T>(m);
            mean_dxhat_xhat /= static_cast<T>(m);
            for (std::size_t j = 0; j < m; ++j) {
              const T d = out.grad[i * m + j] * gv2[j];
              g[i * m + j] += inv_std[i] * (d - mean_dxhat - xhat[i * m + j] * mean_dxhat_xhat);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x, T eps) {
  require_rank2(x, "l2_normalize_rows");
  const std::size_t n = x.rows(), m = x.cols();
  const auto xv = x.data();
  std::vector<T> r(n * m), norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    T s = T(0);
    for (std::size_t j = 0; j < m; ++j) s += xv[i * m + j] * xv[i * m + j];
    norms[i] = std::max(std::sqrt(s), eps);
    for (std::size_t j = 0; j < m; ++j) r[i * m + j] = xv[i * m + j] / norms[i];
  }
  return Tensor<T>::make_result("l2_normalize_rows", {n, m}, std::move(r), {x},
                                [n, m, eps, norms = std::move(norms)](const Node<T>& out) {
                                  T* g = parent_grad(out, 0);
                                  if (!g) return;
                                  for (std::size_t i = 0; i < n; ++i) {
                                    const T* y = out.data.data() + i * m;
                                    const T* dy = out.grad.data() + i * m;
                                    if (norms[i] <= eps) {
                                      for (std::size_t j = 0; j < m; ++j) g[i * m + j] += dy[j] / norms[i];
                                      continue;
                                    }
                                    T dot = T(0);
                                    for (std::size_t j = 0; j < m; ++j) dot += dy[j] * y[j];
                                    for (std::size_t j = 0; j < m; ++j) g[i * m + j] += (dy[j] - y[j] * dot) / norms[i];
                                  }
                                });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> targets,
                                std::span<const T> weights) {
  require_rank2(logits, "softmax_cross_entropy");
  const std::size_t n = logits.rows(), v = logits.cols();
  if (targets.size() != n || weights.size() != n) throw ShapeError("softmax_cross_entropy: targets/weights length mismatch");
  T total_w = T(0);
  for (T w : weights) total_w += w;
  if (!(total_w > T(0))) throw ShapeError("softmax_cross_entropy: all weights are zero");
  const auto x = logits.data();
  std::vector<T> probs(n * v, T(0));
  T loss = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] == T(0)) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) throw ShapeError("softmax_cross_entropy: target out of range");
    const T* row = x.data() + i * v;
    const T mx = *std::max_element(row, row + v);
    T z = T(0);
    for (std::size_t j = 0; j < v; ++j) {
      probs[i * v + j] = std::exp(row[j] - mx);
      z += probs[i * v + j];
    }
    for (std::size_t j = 0; j < v; ++j) probs[i * v + j] /= z;
    loss += weights[i] * (std::log(z) + mx - row[targets[i]]);
  }
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  std::vector<T> wv(weights.begin(), weights.end());
  return Tensor<T>::make_result(
      "softmax_cross_entropy", {1}, {loss / total_w}, {logits},
      [n, v, total_w, tv = std::move(tv), wv = std::move(wv), probs = std::move(probs)](const Node<T>& out) {
        T* g = parent_grad(out, 0);
        if (!g) return;
        const T scale0 = out.grad[0] / total_w;
        for (std::size_t i = 0; i < n; ++i) {
          if (wv[i] == T(0)) continue;
          const T s = scale0 * wv[i];
          for (std::size_t j = 0; j < v; ++j) g[i * v + j] += s * probs[i * v + j];
          g[i * v + static_cast<std::size_t>(tv[i])] -= s;
        }
      });
}

template <typename T>
Tensor<T> log_softmax_gather(const Tensor<T>& logits, std::span<const std::int32_t> targets) {
  require_rank2(logits, "log_softmax_gather");
  const std::size_t n = logits.rows(), v = logits.cols();
  if (targets.size() != n) throw ShapeError("log_softmax_gather: targets length mismatch");
  const auto x = logits.data();
  std::vector<T> probs(n * v), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) throw ShapeError("log_softmax_gather: target out of range");
    const T* row = x.data() + i * v;
    const T mx = *std::max_element(row, row + v);
    T z = T(0);
    for (std::size_t j = 0; j < v; ++j) {
      probs[i * v + j] = std::exp(row[j] - mx);
      z += probs[i * v + j];
    }
    for (std::size_t j = 0; j < v; ++j) probs[i * v + j] /= z;
    r[i] = row[targets[i]] - mx - std::log(z);
  }
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  return Tensor<T>::make_result("log_softmax_gather", {n}, std::move(r), {logits},
                                [n, v, tv = std::move(tv), probs = std::move(probs)](const Node<T>& out) {
                                  T* g = parent_grad(out, 0);
                                  if (!g) return;
                                  for (std::size_t i = 0; i < n; ++i) {
                                    const T s = out.grad[i];
                                    for (std::size_t j = 0; j < v; ++j) g[i * v + j] -= s * probs[i * v + j];
                                    g[i * v + static_cast<std::size_t>(tv[i])] += s;
                                  }
                                });
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t kernel,
                 std::size_t stride, std::size_t pad_left, std::size_t pad_right) {
  require_rank2(x, "conv1d");
  require_rank2(weight, "conv1d");
  if (kernel == 0 || stride == 0) throw ShapeError("conv1d: kernel and stride must be positive");
  const std::size_t t_in = x.rows(), c_in = x.cols(), c_out = weight.rows();
  if (weight.cols() != kernel * c_in) throw ShapeError("conv1d: weight shape " + to_string(weight.shape()) + " does not match kernel*Cin");
  if (t_in + pad_left + pad_right < kernel) throw ShapeError("conv1d: input shorter than kernel");
  const std::size_t t_out = (t_in + pad_left + pad_right - kernel) / stride + 1;
  const std::size_t width = kernel * c_in;

  // im2col: row t holds taps j=0..k-1 of input frame t*stride + j - pad_left.
  std::vector<T> cols(t_out * width, T(0));
  const auto xv = x.data();
  for (std::size_t t = 0; t < t_out; ++t) {
    for (std::size_t j = 0; j < kernel; ++j) {
      const auto src = static_cast<std::ptrdiff_t>(t * stride + j) - static_cast<std::ptrdiff_t>(pad_left);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_in)) continue;
      std::copy_n(xv.begin() + src * static_cast<std::ptrdiff_t>(c_in), c_in,
                  cols.begin() + static_cast<std::ptrdiff_t>(t * width + j * c_in));
    }
  }
  std::vector<T> r(t_out * c_out);
  as_matrix(r.data(), t_out, c_out).noalias() =
      as_matrix(cols, t_out, width) * as_matrix(weight.node()->data, c_out, width).transpose();
  if (bias.defined()) {
    if (bias.numel() != c_out) throw ShapeError("conv1d: bias length does not match Cout");
    const auto bv = bias.data();
    for (std::size_t t = 0; t < t_out; ++t) {
      for (std::size_t o = 0; o < c_out; ++o) r[t * c_out + o] += bv[o];
    }
  }
  return Tensor<T>::make_result(
      "conv1d", {t_out, c_out}, std::move(r), {x, weight, bias},
      [=, cols = std::move(cols)](const Node<T>& out) {
        const auto dy = as_matrix(out.grad, t_out, c_out);
        if (T* g = parent_grad(out, 1)) as_matrix(g, c_out, width).noalias() += dy.transpose() * as_matrix(cols, t_out, width);
        if (T* g = parent_grad(out, 2)) {
          for (std::size_t t = 0; t < t_out; ++t) {
            for (std::size_t o = 0; o < c_out; ++o) g[o] += out.grad[t * c_out + o];
          }
        }
        if (T* g = parent_grad(out, 0)) {
          detail::Mat<T> dcols = dy * as_matrix(parent_data(out, 1), c_out, width);
          for (std::size_t t = 0; t < t_out; ++t) {
            for (std::size_t j = 0; j < kernel; ++j) {
              const auto src = static_cast<std::ptrdiff_t>(t * stride + j) - static_cast<std::ptrdiff_t>(pad_left);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_in)) continue;
              T* dst = g + static_cast<std::size_t>(src) * c_in;
              const T* s = dcols.data() + t * width + j * c_in;
              for (std::size_t c = 0; c < c_in; ++c) dst[c] += s[c];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> stop_gradient(const Tensor<T>& a) {
  return a.detach();
}

template <typename T>
Tensor<T> straight_through(const Tensor<T>& z_e, const Tensor<T>& z_q) {
  require_same_shape(z_e, z_q, "straight_through");
  return Tensor<T>::make_result("straight_through", z_e.shape(), std::vector<T>(z_q.data().begin(), z_q.data().end()),
                                {z_e}, [](const Node<T>& out) {
                                  if (T* g = parent_grad(out, 0)) {
                                    for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
                                  }
                                });
}

#define VEVO_INSTANTIATE_OPS(T)                                                                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                                               \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                          \
  template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                                              \
  template Tensor<T> mul_row(const Tensor<T>&, const Tensor<T>&);                                              \
  template Tensor<T> relu(const Tensor<T>&);                                                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                                                   \
  template Tensor<T> tanh(const Tensor<T>&);                                                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                                \
  template Tensor<T> log_sigmoid(const Tensor<T>&);                                                            \
  template Tensor<T> exp(const Tensor<T>&);                                                                    \
  template Tensor<T> square(const Tensor<T>&);                                                                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                               \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                         \
  template Tensor<T> transpose(const Tensor<T>&);                                                              \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                                   \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                                   \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                                               \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                               \
  template Tensor<T> repeat_rows(const Tensor<T>&, std::size_t);                                               \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const std::int32_t>);                               \
  template Tensor<T> sum(const Tensor<T>&);                                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                                   \
  template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);                      \
  template Tensor<T> l2_normalize_rows(const Tensor<T>&, T);                                                   \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const std::int32_t>, std::span<const T>); \
  template Tensor<T> log_softmax_gather(const Tensor<T>&, std::span<const std::int32_t>);                      \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t,    \
                            std::size_t, std::size_t);                                                         \
  template Tensor<T> stop_gradient(const Tensor<T>&);                                                          \
  template Tensor<T> straight_through(const Tensor<T>&, const Tensor<T>&);

VEVO_INSTANTIATE_OPS(float)
VEVO_INSTANTIATE_OPS(double)

}  // namespace vevo::nn
