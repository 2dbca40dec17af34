#pragma once

#include <cstdint>
#include <string>

namespace vevo {

/// Exact frame/token rate in Hz, always stored in lowest terms with den > 0.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1);

  [[nodiscard]] double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Rational&, const Rational&) = default;
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
};

}  // namespace vevo
