#include "vevo/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "vevo/common/error.hpp"

namespace vevo::nn {

double LrSchedule::lr_at(std::int64_t step) const {
  if (step <= 0) return 0.0;
  if (warmup_steps > 0 && step <= warmup_steps) {
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (total_steps <= warmup_steps) return peak_lr;
  const double remaining = static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup_steps);
  return peak_lr * std::clamp(remaining, 0.0, 1.0);
}

template <typename T>
void adamw_update(std::span<T> param, std::span<const T> grad, std::span<T> first_moment,
                  std::span<T> second_moment, std::int64_t step, double lr, double weight_decay,
                  const AdamWConfig& cfg) {
  if (grad.size() != param.size() || first_moment.size() != param.size() || second_moment.size() != param.size()) {
    throw ShapeError("adamw_update: parameter, gradient and moment sizes differ");
  }
  if (step < 1) throw ParameterError("adamw_update: step must be >= 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = cfg.beta1 * first_moment[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * second_moment[i] + (1.0 - cfg.beta2) * g * g;
    first_moment[i] = static_cast<T>(m);
    second_moment[i] = static_cast<T>(v);
    const double update = (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
    param[i] = static_cast<T>(param[i] - lr * update - lr * weight_decay * param[i]);
  }
}

template <typename T>
AdamW<T>::AdamW(ParameterList<T> params, LrSchedule schedule, AdamWConfig cfg)
    : params_(std::move(params)), schedule_(schedule), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), T(0));
    v_.emplace_back(p.tensor.numel(), T(0));
  }
}

template <typename T>
void AdamW<T>::step() {
  ++step_;
  const double lr = schedule_.lr_at(step_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& t = params_[i].tensor;
    if (!t.has_grad()) continue;
    adamw_update<T>(t.mutable_data(), t.grad(), m_[i], v_[i], step_, lr,
                    params_[i].decay ? cfg_.weight_decay : 0.0, cfg_);
  }
  zero_grad();
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
double grad_norm(const ParameterList<T>& params) {
  double s = 0.0;
  for (const auto& p : params) {
    for (T g : p.tensor.grad()) s += static_cast<double>(g) * g;
  }
  return std::sqrt(s);
}

template <typename T>
double clip_grad_norm(const ParameterList<T>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const auto f = static_cast<T>(max_norm / norm);
    for (auto p : params) {
      if (!p.tensor.has_grad()) continue;
      for (auto& g : p.tensor.mutable_grad()) g *= f;
    }
  }
  return norm;
}

template class AdamW<float>;
template class AdamW<double>;
template void adamw_update(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                           std::int64_t, double, double, const AdamWConfig&);
template void adamw_update(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                           std::int64_t, double, double, const AdamWConfig&);
template double clip_grad_norm(const ParameterList<float>&, double);
template double clip_grad_norm(const ParameterList<double>&, double);
template double grad_norm(const ParameterList<float>&);
template double grad_norm(const ParameterList<double>&);

}  // namespace vevo::nn
