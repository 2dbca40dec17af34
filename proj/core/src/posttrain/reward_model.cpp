#include "vevo/posttrain/reward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vevo/common/error.hpp"
#include "vevo/nn/checkpoint.hpp"
#include "vevo/nn/ops.hpp"
#include "vevo/nn/optim.hpp"

namespace vevo::posttrain {

double bradley_terry_loss(double delta) {
  return delta >= 0.0 ? std::log1p(std::exp(-delta)) : -delta + std::log1p(std::exp(delta));
}

namespace {

template <typename T>
nn::Linear<T> zero_head(std::size_t width) {
  nn::Rng rng(0);
  nn::Linear<T> head(width, 1, rng);
  std::fill(head.weight.mutable_data().begin(), head.weight.mutable_data().end(), T(0));
  std::fill(head.bias.mutable_data().begin(), head.bias.mutable_data().end(), T(0));
  return head;
}

}  // namespace

template <typename T>
RewardModel<T>::RewardModel(const ar::ArConfig& cfg, std::uint64_t seed)
    : trunk_(cfg, seed), head_(zero_head<T>(cfg.width)) {}

template <typename T>
RewardModel<T>::RewardModel(const ar::ArTransformer<float>& pretrained)
    : trunk_(pretrained.config(), 0), head_(zero_head<T>(pretrained.config().width)) {
  auto dst = trunk_.parameters();
  nn::copy_parameters(pretrained.parameters(), dst);
}

template <typename T>
nn::Tensor<T> RewardModel<T>::score(const ar::SequenceLayout& layout) const {
  if (layout.ids.empty()) throw ParameterError("RewardModel::score: empty layout");
  const auto h = trunk_.hidden(layout.ids);
  const auto last = nn::slice_rows(h, h.rows() - 1, h.rows());
  return nn::reshape(head_(last), nn::Shape{1});
}

template <typename T>
nn::ParameterList<T> RewardModel<T>::parameters() const {
  auto out = trunk_.parameters();
  head_.collect(out, "rm_head");
  return out;
}

ar::SequenceLayout reward_layout(const std::string& text, const tokenizer::TokenSequence& cs,
                                 const std::optional<tokenizer::TokenSequence>& prosody, ar::Mode mode,
                                 const ar::Vocabulary& vocab) {
  if (mode == ar::Mode::kEpl) {
    if (!prosody) throw ParameterError("reward_layout: EPL scoring needs prosody tokens");
    return ar::build_epl(text, *prosody, cs, vocab);
  }
  return ar::build_ipl(text, cs, vocab);
}

template <typename T>
nn::Tensor<T> reward_model_loss(const PreferencePair& pair, const RewardModel<T>& rm, ar::Mode mode) {
  const auto w = rm.score(reward_layout(pair.text, pair.positive, pair.prosody, mode, rm.vocab()));
  const auto l = rm.score(reward_layout(pair.text, pair.negative, pair.prosody, mode, rm.vocab()));
  return nn::scale(nn::sum(nn::log_sigmoid(nn::sub(w, l))), T(-1));
}

RewardTrainReport train_reward_model(RewardModel<float>& rm, const std::vector<PreferencePair>& pairs,
                                     const RewardTrainConfig& hyper) {
  if (pairs.empty()) throw ParameterError("train_reward_model: no preference pairs");
  if (hyper.epochs <= 0 || hyper.batch_size == 0) throw ParameterError("train_reward_model: epochs and batch must be > 0");
  const auto per_epoch = static_cast<std::int64_t>((pairs.size() + hyper.batch_size - 1) / hyper.batch_size);
  nn::AdamW<float> opt(rm.parameters(), nn::LrSchedule{hyper.lr, hyper.warmup_steps, per_epoch * hyper.epochs},
                       nn::AdamWConfig{.weight_decay = hyper.weight_decay});
  std::mt19937_64 rng(hyper.seed ^ 0x5eedu);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RewardTrainReport report;
  for (std::int64_t e = 0; e < hyper.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), b + hyper.batch_size);
      const float inv = 1.0f / static_cast<float>(end - b);
      nn::Tensor<float> loss;
      for (std::size_t i = b; i < end; ++i) {
        const auto& p = pairs[order[i]];
        const bool epl = p.prosody.has_value() && coin(rng);
        auto li = nn::scale(reward_model_loss(p, rm, epl ? ar::Mode::kEpl : ar::Mode::kIpl), inv);
        loss = loss.defined() ? nn::add(loss, li) : li;
      }
      const double v = loss.item();
      if (!std::isfinite(v)) throw NumericError("train_reward_model: non-finite loss");
      total += v * static_cast<double>(end - b);
      loss.backward();
      if (hyper.clip_norm > 0.0) nn::clip_grad_norm(opt.parameters(), hyper.clip_norm);
      opt.step();
    }
    report.epoch_loss.push_back(total / static_cast<double>(pairs.size()));
  }
  report.train_accuracy = ranking_accuracy(rm, pairs);
  return report;
}

double ranking_accuracy(const RewardModel<float>& rm, const std::vector<PreferencePair>& pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const double w = rm.score_value(reward_layout(p.text, p.positive, p.prosody, ar::Mode::kIpl, rm.vocab()));
    const double l = rm.score_value(reward_layout(p.text, p.negative, p.prosody, ar::Mode::kIpl, rm.vocab()));
    correct += w > l ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

void save_reward_model(const std::filesystem::path& path, const RewardModel<float>& rm) {
  const auto& c = rm.trunk().config();
  std::map<std::string, std::string> hp{
      {"prosody_size", std::to_string(c.prosody_size)}, {"cs_size", std::to_string(c.cs_size)},
      {"width", std::to_string(c.width)},               {"layers", std::to_string(c.layers)},
      {"heads", std::to_string(c.heads)},               {"max_len", std::to_string(c.max_len)},
  };
  nn::save_checkpoint(path, nn::capture("reward", std::move(hp), rm.parameters()));
}

RewardModel<float> load_reward_model(const std::filesystem::path& path) {
  const auto ckpt = nn::load_checkpoint(path);
  if (ckpt.module != "reward") throw FormatError("checkpoint holds '" + ckpt.module + "', not a reward model");
  ar::ArConfig c;
  c.prosody_size = static_cast<std::size_t>(ckpt.hparam_int("prosody_size"));
  c.cs_size = static_cast<std::size_t>(ckpt.hparam_int("cs_size"));
  c.width = static_cast<std::size_t>(ckpt.hparam_int("width"));
  c.layers = static_cast<std::size_t>(ckpt.hparam_int("layers"));
  c.heads = static_cast<std::size_t>(ckpt.hparam_int("heads"));
  c.max_len = static_cast<std::size_t>(ckpt.hparam_int("max_len"));
  RewardModel<float> rm(c, 0);
  nn::restore(ckpt, rm.parameters());
  return rm;
}

template class RewardModel<float>;
template class RewardModel<double>;
template nn::Tensor<float> reward_model_loss(const PreferencePair&, const RewardModel<float>&, ar::Mode);
template nn::Tensor<double> reward_model_loss(const PreferencePair&, const RewardModel<double>&, ar::Mode);

}  // namespace vevo::posttrain
