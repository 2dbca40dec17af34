#include <algorithm>
#include <cmath>
#include <numbers>

#include "vevo/common/error.hpp"
#include "vevo/dsp/waveform.hpp"

namespace vevo::dsp {
namespace {

constexpr int kZeroCrossings = 24;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Blackman window on [-1, 1].
double blackman(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  const double a = std::numbers::pi * (u + 1.0);
  return 0.42 - 0.5 * std::cos(a) + 0.08 * std::cos(2.0 * a);
}

}  // namespace

std::vector<float> resample(std::span<const float> x, double in_rate, double out_rate) {
  if (in_rate <= 0.0 || out_rate <= 0.0) throw ParameterError("resample: rates must be positive");
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(x.size()) * out_rate / in_rate));
  std::vector<float> y(out_len, 0.0f);
  if (x.empty()) return y;
  const double step = in_rate / out_rate;  // input samples per output sample
  const double cutoff = std::min(1.0, out_rate / in_rate) * 0.97;
  const double half_width = kZeroCrossings / cutoff;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  for (std::size_t m = 0; m < out_len; ++m) {
    const double t = static_cast<double>(m) * step;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double d = t - static_cast<double>(k);
      acc += x[static_cast<std::size_t>(k)] * cutoff * sinc(cutoff * d) * blackman(d / half_width);
    }
    y[m] = static_cast<float>(acc);
  }
  return y;
}

Waveform resample(const Waveform& w, int out_rate) {
  if (w.sample_rate == out_rate) return w;
  return {resample(w.samples, w.sample_rate, out_rate), out_rate};
}

}  // namespace vevo::dsp
