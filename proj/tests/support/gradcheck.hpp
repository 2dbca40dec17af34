#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vevo/nn/layers.hpp"

namespace vevo::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // name of the tensor with the largest error
  std::size_t checked = 0;
};

/// Central finite differences over every entry of every listed tensor,
/// compared tensor by tensor: ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||).
/// Tensors whose gradients are both below `floor` in norm count as exact.
inline GradCheckResult gradcheck(const nn::ParameterList<double>& params,
                                 const std::function<nn::Tensor<double>()>& loss_fn, double eps = 1e-6,
                                 double floor = 1e-10) {
  for (const auto& p : params) p.tensor.node()->grad.clear();
  loss_fn().backward();
  GradCheckResult out;
  for (const auto& p : params) {
    auto t = p.tensor;
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) {
      const auto g = t.grad();
      analytic.assign(g.begin(), g.end());
    }
    auto data = t.mutable_data();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + eps;
      const double up = loss_fn().item();
      data[i] = orig - eps;
      const double down = loss_fn().item();
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      ++out.checked;
    }
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    const double rel = denom < floor ? 0.0 : std::sqrt(diff2) / denom;
    if (rel >= out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = p.name;
    }
  }
  return out;
}

/// Leaf tensor of Gaussian entries, for checks on raw op inputs.
inline nn::Tensor<double> random_leaf(nn::Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<double> v(nn::numel_of(shape));
  for (auto& x : v) x = normal(rng);
  return nn::Tensor<double>::from_vector(std::move(v), std::move(shape), true);
}

/// Fixed random projection turning a tensor into a scalar, so every output
/// entry contributes a distinct weight to the checked gradient.
inline nn::Tensor<double> project_to_scalar(const nn::Tensor<double>& y, std::uint64_t seed = 17) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(y.numel());
  for (auto& x : w) x = normal(rng);
  return nn::sum(nn::mul(y, nn::Tensor<double>::from_vector(std::move(w), y.shape())));
}

}  // namespace vevo::testing
