#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vevo/nn/layers.hpp"

namespace vevo::nn {

/// Linear warm-up to `peak_lr` over `warmup_steps`, then linear decay to zero
/// at `total_steps`. Steps are counted from 1: the first update uses
/// lr_at(1) = peak_lr / warmup_steps.
struct LrSchedule {
  double peak_lr = 1e-3;
  std::int64_t warmup_steps = 0;
  std::int64_t total_steps = 1;

  [[nodiscard]] double lr_at(std::int64_t step) const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// One AdamW update of a single parameter. `step` is the 1-based update count
/// used for bias correction. Decay is decoupled: p -= lr * wd * p.
template <typename T>
void adamw_update(std::span<T> param, std::span<const T> grad, std::span<T> first_moment,
                  std::span<T> second_moment, std::int64_t step, double lr, double weight_decay,
                  const AdamWConfig& cfg);

template <typename T>
class AdamW {
 public:
  AdamW(ParameterList<T> params, LrSchedule schedule, AdamWConfig cfg = {});

  /// Applies one update from the accumulated gradients, then clears them.
  void step();
  void zero_grad();
  [[nodiscard]] std::int64_t steps_taken() const { return step_; }
  [[nodiscard]] double current_lr() const { return schedule_.lr_at(step_ > 0 ? step_ : 1); }
  [[nodiscard]] const ParameterList<T>& parameters() const { return params_; }

 private:
  ParameterList<T> params_;
  LrSchedule schedule_;
  AdamWConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(const ParameterList<T>& params, double max_norm);

template <typename T>
double grad_norm(const ParameterList<T>& params);

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace vevo::nn
