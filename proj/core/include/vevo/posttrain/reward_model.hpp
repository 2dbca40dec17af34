#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "vevo/ar/layout.hpp"
#include "vevo/ar/transformer.hpp"
#include "vevo/posttrain/preferences.hpp"

namespace vevo::posttrain {

/// -log sigmoid(delta), evaluated stably.
double bradley_terry_loss(double delta);

/// AR trunk plus a zero-initialised scalar head read at the final position.
template <typename T>
class RewardModel {
 public:
  RewardModel() = default;
  RewardModel(const ar::ArConfig& cfg, std::uint64_t seed);
  /// Starts from a pretrained AR model's weights.
  explicit RewardModel(const ar::ArTransformer<float>& pretrained);

  [[nodiscard]] nn::Tensor<T> score(const ar::SequenceLayout& layout) const;  // shape [1]
  [[nodiscard]] double score_value(const ar::SequenceLayout& layout) const { return score(layout).item(); }

  [[nodiscard]] const ar::ArTransformer<T>& trunk() const { return trunk_; }
  [[nodiscard]] const ar::Vocabulary& vocab() const { return trunk_.vocab(); }
  [[nodiscard]] nn::ParameterList<T> parameters() const;

 private:
  ar::ArTransformer<T> trunk_;
  nn::Linear<T> head_;
};

/// [T, Q_cs] (IPL) or [T, Q_p, Q_cs] (EPL) scoring layout for one completion.
ar::SequenceLayout reward_layout(const std::string& text, const tokenizer::TokenSequence& cs,
                                 const std::optional<tokenizer::TokenSequence>& prosody, ar::Mode mode,
                                 const ar::Vocabulary& vocab);

/// -log sigmoid(r(a_w) - r(a_l)) with both completions laid out in `mode`.
template <typename T>
nn::Tensor<T> reward_model_loss(const PreferencePair& pair, const RewardModel<T>& rm, ar::Mode mode);

struct RewardTrainConfig {
  std::int64_t epochs = 1;
  std::size_t batch_size = 8;
  double lr = 5e-4;
  std::int64_t warmup_steps = 20;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};

struct RewardTrainReport {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

/// Each pair is laid out as EPL or IPL by a fair coin (EPL needs prosody).
RewardTrainReport train_reward_model(RewardModel<float>& rm, const std::vector<PreferencePair>& pairs,
                                     const RewardTrainConfig& hyper);

/// Fraction of pairs with r(a_w) > r(a_l), scored in IPL mode.
double ranking_accuracy(const RewardModel<float>& rm, const std::vector<PreferencePair>& pairs);

void save_reward_model(const std::filesystem::path& path, const RewardModel<float>& rm);
RewardModel<float> load_reward_model(const std::filesystem::path& path);

extern template class RewardModel<float>;
extern template class RewardModel<double>;

}  // namespace vevo::posttrain
