#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vevo/ar/vocabulary.hpp"
#include "vevo/nn/layers.hpp"

namespace vevo::ar {

struct ArConfig {
  std::size_t prosody_size = 512;
  std::size_t cs_size = 1024;
  std::size_t width = 256;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t max_len = 1024;

  void validate() const;
  [[nodiscard]] Vocabulary vocabulary() const { return Vocabulary(prosody_size, cs_size); }
};

/// Per-layer key/value rows accumulated during incremental decoding.
template <typename T>
struct KvCache {
  std::vector<std::vector<T>> keys;    // one [length x width] buffer per layer
  std::vector<std::vector<T>> values;
  std::size_t length = 0;
};

/// Decoder-only pre-norm transformer with learned absolute positions.
template <typename T>
class ArTransformer {
 public:
  ArTransformer() = default;
  ArTransformer(ArConfig cfg, std::uint64_t seed);

  [[nodiscard]] const ArConfig& config() const { return cfg_; }
  [[nodiscard]] const Vocabulary& vocab() const { return vocab_; }

  /// Final-norm hidden states, [n x width].
  [[nodiscard]] nn::Tensor<T> hidden(std::span<const std::int32_t> ids) const;
  /// Output projection applied to hidden rows.
  [[nodiscard]] nn::Tensor<T> project(const nn::Tensor<T>& hidden_rows) const { return head_(hidden_rows); }
  [[nodiscard]] nn::Tensor<T> logits(std::span<const std::int32_t> ids) const { return project(hidden(ids)); }

  [[nodiscard]] nn::ParameterList<T> parameters() const;

  /// Graph-free incremental forward: appends `id` at position cache.length and
  /// returns the next-token logits.
  std::vector<T> advance(KvCache<T>& cache, std::int32_t id) const;
  [[nodiscard]] KvCache<T> make_cache() const;

 private:
  ArConfig cfg_;
  Vocabulary vocab_{1, 1};
  nn::Embedding<T> tok_;
  nn::Embedding<T> pos_;
  std::vector<nn::TransformerBlock<T>> blocks_;
  nn::LayerNorm<T> ln_f_;
  nn::Linear<T> head_;
};

using ArModel = ArTransformer<float>;

void save_ar_model(const std::filesystem::path& path, const ArModel& model);
ArModel load_ar_model(const std::filesystem::path& path);

extern template class ArTransformer<float>;
extern template class ArTransformer<double>;

}  // namespace vevo::ar
