#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <ostream>
#include <string>

#include "pripro/errors.hpp"

namespace pripro {

// Exact fraction over 64-bit integers, always stored in lowest terms with a
// positive denominator. Intermediate products use 128-bit arithmetic; a
// result that does not fit back into 64 bits raises ErrorCode::InvalidArgument.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t value) : num_(value) {}  // NOLINT(implicit)
  Rational(std::int64_t num, std::int64_t den) { assign(num, den); }

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }

  double to_double() const noexcept {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  bool is_zero() const noexcept { return num_ == 0; }
  bool is_negative() const noexcept { return num_ < 0; }

  // Nearest fraction with the given denominator, e.g. hours read from JSON
  // rounded to whole seconds with from_double(h, 3600).
  static Rational from_double(double value, std::int64_t den) {
    return Rational(std::llround(value * static_cast<double>(den)), den);
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return make(wide(a.num_) * b.den_ + wide(b.num_) * a.den_,
                wide(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return make(wide(a.num_) * b.den_ - wide(b.num_) * a.den_,
                wide(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return make(wide(a.num_) * b.num_, wide(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw Error(ErrorCode::InvalidArgument, "rational division by zero");
    return make(wide(a.num_) * b.den_, wide(a.den_) * b.num_);
  }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }

  friend bool operator==(const Rational& a, const Rational& b) noexcept {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) noexcept {
    return wide(a.num_) * b.den_ <=> wide(b.num_) * a.den_;
  }

  std::string to_string() const {
    return den_ == 1 ? std::to_string(num_)
                     : std::to_string(num_) + "/" + std::to_string(den_);
  }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) {
    return os << r.to_string();
  }

 private:
  using wide_t = __int128;
  static wide_t wide(std::int64_t v) noexcept { return static_cast<wide_t>(v); }

  static wide_t gcd(wide_t a, wide_t b) noexcept {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      wide_t t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Rational make(wide_t num, wide_t den) {
    if (den == 0) throw Error(ErrorCode::InvalidArgument, "rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    wide_t g = gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    constexpr wide_t lo = INT64_MIN;
    constexpr wide_t hi = INT64_MAX;
    if (num < lo || num > hi || den > hi) {
      throw Error(ErrorCode::InvalidArgument, "rational overflow");
    }
    Rational r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
  }

  void assign(std::int64_t num, std::int64_t den) { *this = make(num, den); }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace pripro
