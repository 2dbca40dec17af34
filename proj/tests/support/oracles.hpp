#pragma once

// Independent reference implementations. These are written for clarity, in
// long double where it matters, and share no code with the library.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace vevo::testing {

/// Exhaustive nearest neighbour by squared L2 distance, lowest index on ties.
template <typename T>
std::int32_t brute_force_nearest(std::span<const T> z, std::span<const T> entries, std::size_t dim) {
  const std::size_t k = entries.size() / dim;
  long double best = 0.0L;
  std::int32_t best_j = -1;
  for (std::size_t j = 0; j < k; ++j) {
    long double d = 0.0L;
    for (std::size_t c = 0; c < dim; ++c) {
      const long double diff = static_cast<long double>(z[c]) - static_cast<long double>(entries[j * dim + c]);
      d += diff * diff;
    }
    if (best_j < 0 || d < best) {
      best = d;
      best_j = static_cast<std::int32_t>(j);
    }
  }
  return best_j;
}

/// Two-pass z-scores with the population standard deviation; a constant
/// group maps to zeros.
inline std::vector<long double> reference_zscores(std::span<const double> r) {
  const long double n = static_cast<long double>(r.size());
  long double mean = 0.0L;
  for (double x : r) mean += x;
  mean /= n;
  long double var = 0.0L;
  for (double x : r) var += (x - mean) * (x - mean);
  var /= n;
  const long double sd = std::sqrt(var);
  std::vector<long double> z(r.size(), 0.0L);
  if (sd < 1e-8L) return z;
  for (std::size_t i = 0; i < r.size(); ++i) z[i] = (r[i] - mean) / sd;
  return z;
}

inline std::vector<double> reference_advantages(std::span<const double> r_int, std::span<const double> r_pro) {
  const auto a = reference_zscores(r_int), b = reference_zscores(r_pro);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<double>(a[i] + b[i]);
  return out;
}

/// -log(1 / (1 + e^-d)) straight from the definition, in long double.
inline long double reference_bt_loss(long double delta) { return std::log1p(std::exp(-delta)); }

/// Pitch class of a frequency in half-semitone bins, C = 0, A4 = 440 Hz.
inline int expected_chroma_bin(double hz, int bins = 24) {
  const double semis_from_c = 12.0 * std::log2(hz / 440.0) + 9.0;
  const long steps = std::lround(semis_from_c * bins / 12.0);
  return static_cast<int>(((steps % bins) + bins) % bins);
}

/// Centred STFT frame count written out from the padding geometry: pad n_fft/2
/// each side, then count hops whose window fits.
inline std::size_t reference_frames(std::size_t samples, std::size_t n_fft, std::size_t hop) {
  const std::size_t padded = samples + 2 * (n_fft / 2);
  return (padded - n_fft) / hop + 1;
}

inline double reference_mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double reference_pop_std(std::span<const double> x) {
  const double m = reference_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace vevo::testing
