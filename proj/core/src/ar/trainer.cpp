#include "vevo/ar/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vevo/common/error.hpp"
#include "vevo/nn/ops.hpp"

namespace vevo::ar {

template <typename T>
nn::Tensor<T> layout_loss(const ArTransformer<T>& model, const SequenceLayout& layout, std::size_t* count) {
  if (layout.loss_mask.size() != layout.ids.size()) throw ShapeError("layout_loss: mask length differs from ids");
  std::size_t lo = 0, hi = 0, n = 0;
  for (std::size_t j = 1; j < layout.ids.size(); ++j) {
    if (!layout.loss_mask[j]) continue;
    if (n == 0) lo = j;
    hi = j;
    ++n;
  }
  if (count) *count = n;
  if (n == 0) throw ParameterError("layout_loss: no position carries loss");
  // Only rows lo-1 .. hi-1 feed a prediction; the rest of the prefix is context.
  const auto h = model.hidden(std::span<const std::int32_t>(layout.ids.data(), hi));
  const auto logits = model.project(nn::slice_rows(h, lo - 1, hi));
  std::vector<std::int32_t> targets(layout.ids.begin() + static_cast<std::ptrdiff_t>(lo),
                                    layout.ids.begin() + static_cast<std::ptrdiff_t>(hi + 1));
  std::vector<T> weights(targets.size());
  for (std::size_t j = lo; j <= hi; ++j) weights[j - lo] = layout.loss_mask[j] ? T(1) : T(0);
  return nn::softmax_cross_entropy(logits, std::span<const std::int32_t>(targets), std::span<const T>(weights));
}

namespace {

nn::Tensor<float> batch_loss(const ArModel& model, const std::vector<SequenceLayout>& batch, double* value) {
  std::vector<std::pair<nn::Tensor<float>, std::size_t>> parts;
  std::size_t total = 0;
  for (const auto& l : batch) {
    std::size_t c = 0;
    for (std::size_t j = 1; j < l.loss_mask.size(); ++j) c += l.loss_mask[j] ? 1 : 0;
    if (c == 0) continue;
    parts.emplace_back(layout_loss(model, l, &c), c);
    total += c;
  }
  if (total == 0) throw ParameterError("train_step: every loss mask in the batch is empty");
  nn::Tensor<float> loss;
  for (auto& [t, c] : parts) {
    auto w = nn::scale(t, static_cast<float>(c) / static_cast<float>(total));
    loss = loss.defined() ? nn::add(loss, w) : w;
  }
  if (value) *value = loss.item();
  return loss;
}

}  // namespace

double teacher_forced_loss(const ArModel& model, const std::vector<SequenceLayout>& batch) {
  double v = 0.0;
  batch_loss(model, batch, &v);
  return v;
}

double train_step(const std::vector<SequenceLayout>& batch, ArModel& model, nn::AdamW<float>& opt, double clip_norm) {
  double v = 0.0;
  auto loss = batch_loss(model, batch, &v);
  if (!std::isfinite(v)) throw NumericError("train_step: non-finite loss");
  loss.backward();
  if (clip_norm > 0.0) nn::clip_grad_norm(opt.parameters(), clip_norm);
  opt.step();
  return v;
}

ArTrainReport train_ar(ArModel& model, const std::vector<SequenceLayout>& data, const ArTrainConfig& hyper) {
  if (data.empty()) throw ParameterError("train_ar: empty data set");
  if (hyper.steps <= 0 || hyper.batch_size == 0) throw ParameterError("train_ar: steps and batch must be > 0");
  nn::AdamW<float> opt(model.parameters(), nn::LrSchedule{hyper.lr, hyper.warmup_steps, hyper.steps},
                       nn::AdamWConfig{.weight_decay = hyper.weight_decay});
  std::mt19937_64 rng(hyper.seed ^ 0xa5u);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  ArTrainReport report;
  std::vector<SequenceLayout> batch;
  for (std::int64_t step = 1; step <= hyper.steps; ++step) {
    batch.clear();
    for (std::size_t b = 0; b < std::min(hyper.batch_size, data.size()); ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(data[order[cursor++]]);
    }
    const double loss = train_step(batch, model, opt, hyper.clip_norm);
    if (step == 1 || step % hyper.log_every == 0 || step == hyper.steps) report.log.emplace_back(step, loss);
  }
  report.final_loss = teacher_forced_loss(model, data);
  return report;
}

template nn::Tensor<float> layout_loss(const ArTransformer<float>&, const SequenceLayout&, std::size_t*);
template nn::Tensor<double> layout_loss(const ArTransformer<double>&, const SequenceLayout&, std::size_t*);

}  // namespace vevo::ar
