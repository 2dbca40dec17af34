#include "vevo/fm/flow_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vevo/common/error.hpp"
#include "vevo/nn/ops.hpp"
#include "vevo/nn/optim.hpp"

namespace vevo::fm {

dsp::FeatureMatrix align_mel(const dsp::FeatureMatrix& mel, std::size_t tokens) {
  if (mel.num_frames == 0 && tokens > 0) throw ShapeError("align_mel: empty mel");
  dsp::FeatureMatrix out(kFramesPerToken * tokens, mel.dim, mel.kind, mel.frame_rate);
  for (std::size_t i = 0; i < out.num_frames; ++i) {
    const auto src = mel.row(std::min(i, mel.num_frames - 1));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

FmItem make_fm_item(const tokenizer::TokenSequence& cs, const dsp::FeatureMatrix& mel, std::size_t ref_tokens) {
  if (ref_tokens >= cs.size()) throw ParameterError("make_fm_item: reference would leave no target tokens");
  const auto aligned = align_mel(mel, cs.size());
  const std::size_t split = kFramesPerToken * ref_tokens;
  FmItem item;
  item.cond.cs = cs;
  item.cond.cs.ids.erase(item.cond.cs.ids.begin(), item.cond.cs.ids.begin() + static_cast<std::ptrdiff_t>(ref_tokens));
  item.cond.ref_cs = cs;
  item.cond.ref_cs.ids.resize(ref_tokens);
  item.cond.ref_mel = dsp::FeatureMatrix(split, aligned.dim, aligned.kind, aligned.frame_rate);
  std::copy_n(aligned.data.begin(), split * aligned.dim, item.cond.ref_mel.data.begin());
  item.mel = dsp::FeatureMatrix(aligned.num_frames - split, aligned.dim, aligned.kind, aligned.frame_rate);
  std::copy(aligned.data.begin() + static_cast<std::ptrdiff_t>(split * aligned.dim), aligned.data.end(),
            item.mel.data.begin());
  return item;
}

FmTrainReport train_fm(FlowModel<float>& model, const std::vector<FmItem>& items, const FmTrainConfig& hyper) {
  if (items.empty()) throw ParameterError("train_fm: no training items");
  if (hyper.steps <= 0 || hyper.batch_size == 0) throw ParameterError("train_fm: steps and batch must be > 0");
  auto params = model.parameters();
  nn::AdamW<float> opt(params, nn::LrSchedule{hyper.lr, hyper.warmup_steps, hyper.steps},
                       nn::AdamWConfig{.weight_decay = hyper.weight_decay});
  std::mt19937_64 rng(hyper.seed ^ 0xf10u);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  FmTrainReport report;
  const float inv = 1.0f / static_cast<float>(hyper.batch_size);
  for (std::int64_t step = 1; step <= hyper.steps; ++step) {
    nn::Tensor<float> total;
    for (std::size_t b = 0; b < hyper.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto& item = items[order[cursor++]];
      auto loss = nn::scale(cfm_loss(item.mel, item.cond, model, rng), inv);
      total = total.defined() ? nn::add(total, loss) : loss;
    }
    const double v = total.item();
    if (!std::isfinite(v)) throw NumericError("train_fm: non-finite loss at step " + std::to_string(step));
    total.backward();
    if (hyper.clip_norm > 0.0) nn::clip_grad_norm(params, hyper.clip_norm);
    opt.step();
    if (step == 1 || step % hyper.log_every == 0 || step == hyper.steps) report.log.emplace_back(step, v);
  }
  return report;
}

double mel_mse(const dsp::FeatureMatrix& a, const dsp::FeatureMatrix& b) {
  if (a.num_frames != b.num_frames || a.dim != b.dim) throw ShapeError("mel_mse: shape mismatch");
  if (a.data.empty()) throw ShapeError("mel_mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

}  // namespace vevo::fm
