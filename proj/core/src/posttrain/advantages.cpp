#include "vevo/posttrain/advantages.hpp"

#include <cmath>

#include "vevo/common/error.hpp"

namespace vevo::posttrain {

std::vector<double> normalize_rewards(std::span<const double> r) {
  if (r.size() < 2) throw ParameterError("normalize_rewards: a group needs at least two completions");
  double mean = 0.0;
  for (double x : r) mean += x;
  mean /= static_cast<double>(r.size());
  double var = 0.0;
  for (double x : r) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(r.size()));
  std::vector<double> out(r.size(), 0.0);
  if (sd < kDegenerateStd) return out;
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = (r[i] - mean) / sd;
  return out;
}

std::vector<double> group_advantages(std::span<const double> r_int, std::span<const double> r_pro) {
  if (r_int.size() != r_pro.size()) throw ShapeError("group_advantages: reward vectors differ in length");
  auto a = normalize_rewards(r_int);
  const auto b = normalize_rewards(r_pro);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

}  // namespace vevo::posttrain
