#include "vevo/tokenizer/codebook.hpp"

#include <cmath>
#include <limits>

#include "vevo/common/error.hpp"
#include "vevo/nn/ops.hpp"

namespace vevo::tokenizer {

template <typename T>
Codebook<T>::Codebook(nn::Tensor<T> e) : entries(std::move(e)) {
  if (!entries.defined() || entries.rank() != 2 || entries.rows() == 0) {
    throw ShapeError("Codebook: entries must be a non-empty [K x d] tensor");
  }
}

template <typename T>
Codebook<T> Codebook<T>::random(std::size_t size, std::size_t dim, nn::Rng& rng) {
  if (size == 0 || dim == 0) throw ParameterError("Codebook: size and dim must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> values(size * dim);
  for (auto& v : values) v = static_cast<T>(normal(rng));
  Codebook cb(nn::Tensor<T>::from_vector(std::move(values), {size, dim}, true));
  cb.renormalize();
  return cb;
}

template <typename T>
std::span<const T> Codebook<T>::entry(std::size_t j) const {
  if (j >= size()) throw ParameterError("Codebook: entry index out of range");
  return entries.data().subspan(j * dim(), dim());
}

template <typename T>
void Codebook<T>::renormalize() {
  auto data = entries.mutable_data();
  const std::size_t d = dim();
  for (std::size_t j = 0; j < size(); ++j) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += static_cast<double>(data[j * d + c]) * data[j * d + c];
    const double norm = std::sqrt(s);
    if (norm < 1e-12) {
      // A collapsed entry becomes the first basis vector rather than NaN.
      for (std::size_t c = 0; c < d; ++c) data[j * d + c] = c == 0 ? T(1) : T(0);
      continue;
    }
    for (std::size_t c = 0; c < d; ++c) data[j * d + c] = static_cast<T>(data[j * d + c] / norm);
  }
}

template <typename T>
std::vector<std::int32_t> nearest_ids(std::span<const T> z, std::size_t rows, const Codebook<T>& cb) {
  const std::size_t d = cb.dim(), k = cb.size();
  if (z.size() != rows * d) throw ShapeError("quantize: latent width does not match the codebook");
  const auto e = cb.entries.data();
  std::vector<std::int32_t> ids(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const T* zi = z.data() + i * d;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const T* ej = e.data() + j * d;
      double dist = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = static_cast<double>(zi[c]) - static_cast<double>(ej[c]);
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_j = j;
      }
    }
    ids[i] = static_cast<std::int32_t>(best_j);
  }
  return ids;
}

template <typename T>
Quantized<T> quantize(const nn::Tensor<T>& z_e, const Codebook<T>& cb) {
  if (!z_e.defined() || z_e.rank() != 2 || z_e.cols() != cb.dim()) {
    throw ShapeError("quantize: expected [n x " + std::to_string(cb.dim()) + "] latents");
  }
  Quantized<T> q;
  q.ids = nearest_ids<T>(z_e.data(), z_e.rows(), cb);
  q.z_q = nn::embedding(cb.entries, std::span<const std::int32_t>(q.ids));
  return q;
}

template struct Codebook<float>;
template struct Codebook<double>;
template std::vector<std::int32_t> nearest_ids(std::span<const float>, std::size_t, const Codebook<float>&);
template std::vector<std::int32_t> nearest_ids(std::span<const double>, std::size_t, const Codebook<double>&);
template Quantized<float> quantize(const nn::Tensor<float>&, const Codebook<float>&);
template Quantized<double> quantize(const nn::Tensor<double>&, const Codebook<double>&);

}  // namespace vevo::tokenizer
