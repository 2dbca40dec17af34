#include "vevo/common/rational.hpp"

#include <numeric>

#include "vevo/common/error.hpp"

namespace vevo {

Rational::Rational(std::int64_t n, std::int64_t d) {
  if (d == 0) throw ParameterError("Rational: zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
  num = g == 0 ? 0 : n / g;
  den = g == 0 ? 1 : d / g;
}

std::string Rational::str() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

Rational operator*(const Rational& a, const Rational& b) { return {a.num * b.num, a.den * b.den}; }

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num == 0) throw ParameterError("Rational: division by zero");
  return {a.num * b.den, a.den * b.num};
}

}  // namespace vevo
