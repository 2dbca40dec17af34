#pragma once

#include <cstdint>
#include <vector>

#include "vevo/ar/layout.hpp"
#include "vevo/ar/transformer.hpp"
#include "vevo/nn/optim.hpp"

namespace vevo::ar {

/// Masked next-token cross-entropy for one layout: the target at position j
/// is predicted from the logits at j-1, counted only where loss_mask[j] is set.
/// Returns the mean over those positions; `count` receives their number.
template <typename T>
nn::Tensor<T> layout_loss(const ArTransformer<T>& model, const SequenceLayout& layout, std::size_t* count = nullptr);

/// Token-weighted mean loss over a batch, without updating anything.
double teacher_forced_loss(const ArModel& model, const std::vector<SequenceLayout>& batch);

/// One optimizer step on a batch; returns the token-weighted mean loss.
/// Layouts are processed one sequence at a time, so no padding positions
/// exist to mask. Throws if no position in the batch carries loss.
double train_step(const std::vector<SequenceLayout>& batch, ArModel& model, nn::AdamW<float>& opt,
                  double clip_norm = 1.0);

struct ArTrainConfig {
  std::int64_t steps = 1000;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  std::int64_t warmup_steps = 50;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::int64_t log_every = 50;
  std::uint64_t seed = 0;
};

struct ArTrainReport {
  std::vector<std::pair<std::int64_t, double>> log;
  double final_loss = 0.0;  // teacher-forced loss over the whole data set after training
};

ArTrainReport train_ar(ArModel& model, const std::vector<SequenceLayout>& data, const ArTrainConfig& hyper);

}  // namespace vevo::ar
