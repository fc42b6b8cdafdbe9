#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>

namespace stisnn {

// Non-negative exact ratio, always stored in lowest terms.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  constexpr Rational() = default;
  constexpr Rational(std::uint64_t n, std::uint64_t d) : num(n), den(d) {
    const std::uint64_t g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  constexpr double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend constexpr bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend constexpr bool operator<(const Rational& a, const Rational& b) {
    return static_cast<unsigned __int128>(a.num) * b.den <
           static_cast<unsigned __int128>(b.num) * a.den;
  }
  friend std::ostream& operator<<(std::ostream& os, const Rational& r) {
    return os << r.num << '/' << r.den;
  }
};

}  // namespace stisnn
