#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace momentlab {

/// Exact non-negative rational with 64-bit reduced numerator and denominator.
class Rational {
 public:
  Rational() = default;
  Rational(std::uint64_t num, std::uint64_t den = 1) { assign(num, den); }

  std::uint64_t num() const { return num_; }
  std::uint64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Rational operator*(const Rational& a, const Rational& b) {
    // cross-reduce first to keep intermediates small
    const std::uint64_t g1 = std::gcd(a.num_, b.den_);
    const std::uint64_t g2 = std::gcd(b.num_, a.den_);
    return from_wide(static_cast<unsigned __int128>(a.num_ / (g1 ? g1 : 1)) * (b.num_ / (g2 ? g2 : 1)),
                     static_cast<unsigned __int128>(a.den_ / (g2 ? g2 : 1)) * (b.den_ / (g1 ? g1 : 1)));
  }

  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return a * Rational(b.den_, b.num_);
  }

  friend bool operator==(const Rational&, const Rational&) = default;

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.num_ << '/' << r.den_; }

 private:
  static Rational from_wide(unsigned __int128 num, unsigned __int128 den) {
    constexpr auto kMax = static_cast<unsigned __int128>(UINT64_MAX);
    if (num > kMax || den > kMax) throw std::overflow_error("rational overflow");
    return Rational(static_cast<std::uint64_t>(num), static_cast<std::uint64_t>(den));
  }

  void assign(std::uint64_t num, std::uint64_t den) {
    if (den == 0) throw std::domain_error("rational with zero denominator");
    const std::uint64_t g = std::gcd(num, den);
    num_ = num / g;
    den_ = den / g;
  }

  std::uint64_t num_ = 0;
  std::uint64_t den_ = 1;
};

}  // namespace momentlab
