#include <cmath>
#include <limits>

#include "nn/op_support.hpp"
#include "vevo/nn/ops.hpp"

namespace vevo::nn {

using detail::as_matrix;
using detail::Node;
using detail::parent_data;
using detail::parent_grad;

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads, bool causal) {
  detail::require_rank2(q, "attention");
  detail::require_rank2(k, "attention");
  detail::require_rank2(v, "attention");
  const std::size_t tq = q.rows(), tk = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != tk) throw ShapeError("attention: q/k/v shapes disagree");
  if (heads == 0 || d % heads != 0) throw ShapeError("attention: width not divisible by head count");
  if (causal && tk < tq) throw ShapeError("attention: causal attention needs at least as many keys as queries");
  const std::size_t dh = d / heads;
  const auto ei = [](std::size_t x) { return static_cast<Eigen::Index>(x); };
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t offset = tk - tq;  // query i sees keys j <= i + offset when causal

  const auto qm = as_matrix(q.node()->data, tq, d);
  const auto km = as_matrix(k.node()->data, tk, d);
  const auto vm = as_matrix(v.node()->data, tk, d);
  std::vector<T> result(tq * d);
  auto om = as_matrix(result.data(), tq, d);
  std::vector<T> probs(heads * tq * tk);

  for (std::size_t h = 0; h < heads; ++h) {
    auto p = as_matrix(probs.data() + h * tq * tk, tq, tk);
    p.noalias() = (qm.middleCols(ei(h * dh), ei(dh)) * km.middleCols(ei(h * dh), ei(dh)).transpose()) * inv_sqrt;
    for (std::size_t i = 0; i < tq; ++i) {
      const std::size_t visible = causal ? i + offset + 1 : tk;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, p(ei(i), ei(j)));
      T z = T(0);
      for (std::size_t j = 0; j < tk; ++j) {
        const T e = j < visible ? std::exp(p(ei(i), ei(j)) - mx) : T(0);
        p(ei(i), ei(j)) = e;
        z += e;
      }
      p.row(ei(i)) /= z;
    }
    om.middleCols(ei(h * dh), ei(dh)).noalias() = p * vm.middleCols(ei(h * dh), ei(dh));
  }

  return Tensor<T>::make_result(
      "attention", {tq, d}, std::move(result), {q, k, v},
      [=, probs = std::move(probs)](const Node<T>& out) {
        const auto dout = as_matrix(out.grad, tq, d);
        const auto qd = as_matrix(parent_data(out, 0), tq, d);
        const auto kd = as_matrix(parent_data(out, 1), tk, d);
        const auto vd = as_matrix(parent_data(out, 2), tk, d);
        T* gq = parent_grad(out, 0);
        T* gk = parent_grad(out, 1);
        T* gv = parent_grad(out, 2);
        detail::Mat<T> dp(ei(tq), ei(tk));
        for (std::size_t h = 0; h < heads; ++h) {
          const detail::ConstMap<T> p(probs.data() + h * tq * tk, ei(tq), ei(tk));
          const auto dout_h = dout.middleCols(ei(h * dh), ei(dh));
          if (gv) as_matrix(gv, tk, d).middleCols(ei(h * dh), ei(dh)).noalias() += p.transpose() * dout_h;
          if (!gq && !gk) continue;
          dp.noalias() = dout_h * vd.middleCols(ei(h * dh), ei(dh)).transpose();
          // Softmax Jacobian: ds = p * (dp - rowsum(dp * p)).
          for (Eigen::Index i = 0; i < ei(tq); ++i) {
            const T dot = (dp.row(i).array() * p.row(i).array()).sum();
            dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
          }
          dp *= inv_sqrt;
          if (gq) as_matrix(gq, tq, d).middleCols(ei(h * dh), ei(dh)).noalias() += dp * kd.middleCols(ei(h * dh), ei(dh));
          if (gk) as_matrix(gk, tk, d).middleCols(ei(h * dh), ei(dh)).noalias() += dp.transpose() * qd.middleCols(ei(h * dh), ei(dh));
        }
      });
}

template Tensor<float> attention(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, std::size_t, bool);
template Tensor<double> attention(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, std::size_t,
                                  bool);

}  // namespace vevo::nn
