#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vevo/nn/layers.hpp"
#include "vevo/nn/tensor.hpp"

namespace vevo::tokenizer {

/// K unit-norm entries of width d_code, stored as a trainable [K x d_code] tensor.
template <typename T>
struct Codebook {
  nn::Tensor<T> entries;

  Codebook() = default;
  explicit Codebook(nn::Tensor<T> e);
  /// Random Gaussian entries projected onto the unit sphere.
  static Codebook random(std::size_t size, std::size_t dim, nn::Rng& rng);

  [[nodiscard]] std::size_t size() const { return entries.rows(); }
  [[nodiscard]] std::size_t dim() const { return entries.cols(); }
  [[nodiscard]] std::span<const T> entry(std::size_t j) const;

  /// Rescales every entry to unit L2 norm in place.
  void renormalize();
};

template <typename T>
struct Quantized {
  std::vector<std::int32_t> ids;
  nn::Tensor<T> z_q;  // gathered codebook rows; carries gradient to the codebook
};

/// Nearest entry by squared L2 distance for each row of `z` ([rows x dim]).
/// Ties resolve to the lowest index.
template <typename T>
std::vector<std::int32_t> nearest_ids(std::span<const T> z, std::size_t rows, const Codebook<T>& cb);

template <typename T>
Quantized<T> quantize(const nn::Tensor<T>& z_e, const Codebook<T>& cb);

}  // namespace vevo::tokenizer
