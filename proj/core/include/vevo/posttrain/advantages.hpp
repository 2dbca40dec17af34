#pragma once

#include <span>
#include <vector>

namespace vevo::posttrain {

/// Below this population std a reward component is treated as constant.
inline constexpr double kDegenerateStd = 1e-8;

/// (r - mean) / std with the population std; all zeros when std < kDegenerateStd.
std::vector<double> normalize_rewards(std::span<const double> r);

/// Sum of the normalized intelligibility and prosody rewards per completion.
std::vector<double> group_advantages(std::span<const double> r_int, std::span<const double> r_pro);

}  // namespace vevo::posttrain
