#pragma once

// Low-degree real polynomials with certified real-root isolation and
// sublevel-set extraction. Used by the quadrature panel rule, the
// H-functional minimizer and the frequency-cell membership tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "momentlab/interval.hpp"

namespace momentlab {

inline constexpr int kMaxPolyDegree = 8;

/// p(t) = sum_k c_k (t - origin)^k, stored in a fixed-capacity buffer.
class Polynomial {
 public:
  Polynomial() = default;

  explicit Polynomial(std::span<const double> coeffs, double origin = 0.0) : origin_(origin) {
    if (coeffs.size() > static_cast<std::size_t>(kMaxPolyDegree) + 1) {
      throw std::invalid_argument("polynomial degree exceeds supported maximum");
    }
    std::copy(coeffs.begin(), coeffs.end(), c_.begin());
    n_ = static_cast<int>(coeffs.size()) - 1;
    trim();
  }

  Polynomial(std::initializer_list<double> coeffs, double origin = 0.0)
      : Polynomial(std::span<const double>(coeffs.begin(), coeffs.size()), origin) {}

  /// Degree after trimming trailing zeros; -1 for the zero polynomial.
  int degree() const { return n_; }
  double origin() const { return origin_; }
  double coeff(int k) const { return (k >= 0 && k <= n_) ? c_[k] : 0.0; }
  bool is_zero() const { return n_ < 0; }

  double operator()(double t) const {
    const double u = t - origin_;
    double acc = 0.0;
    for (int k = n_; k >= 0; --k) acc = acc * u + c_[k];
    return acc;
  }

  Polynomial derivative() const {
    Polynomial out;
    out.origin_ = origin_;
    out.n_ = std::max(n_ - 1, -1);
    for (int k = 1; k <= n_; ++k) out.c_[k - 1] = k * c_[k];
    out.trim();
    return out;
  }

  Polynomial derivative(int order) const {
    Polynomial out = *this;
    for (int i = 0; i < order; ++i) out = out.derivative();
    return out;
  }

  /// Same polynomial re-expanded around a new origin (exact Taylor shift).
  Polynomial shifted(double new_origin) const {
    Polynomial out = *this;
    out.origin_ = new_origin;
    const double delta = new_origin - origin_;
    if (delta == 0.0) return out;
    for (int i = 0; i < n_; ++i) {
      for (int k = n_ - 1; k >= i; --k) out.c_[k] += delta * out.c_[k + 1];
    }
    return out;
  }

  /// Upper bound of |p(t) - p(center)| for |t - center| <= radius.
  double variation_bound(double center, double radius) const {
    const Polynomial q = shifted(center);
    double acc = 0.0;
    double rk = 1.0;
    for (int k = 1; k <= q.n_; ++k) {
      rk *= radius;
      acc += std::abs(q.c_[k]) * rk;
    }
    return acc;
  }

  Polynomial operator+(double s) const {
    Polynomial out = *this;
    if (out.n_ < 0) out.n_ = 0;
    out.c_[0] += s;
    out.trim();
    return out;
  }
  Polynomial operator-(double s) const { return *this + (-s); }

  Polynomial operator*(double s) const {
    Polynomial out = *this;
    for (int k = 0; k <= out.n_; ++k) out.c_[k] *= s;
    out.trim();
    return out;
  }

 private:
  void trim() {
    while (n_ >= 0 && c_[n_] == 0.0) --n_;
  }

  std::array<double, kMaxPolyDegree + 1> c_{};
  int n_ = -1;
  double origin_ = 0.0;
};

namespace detail {

inline double bisect_root(const Polynomial& p, double lo, double hi, double flo, double tol) {
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = p(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Real roots of p in [a, b], ascending. Each root is located by sign-change
/// bisection on a monotone piece delimited by the roots of p'. Tangential
/// roots are reported only when p vanishes exactly at a critical point.
inline std::vector<double> real_roots(const Polynomial& p, double a, double b, double tol = 1e-12) {
  std::vector<double> roots;
  if (p.degree() <= 0 || b < a) return roots;
  const double center = 0.5 * (a + b);
  const double radius = 0.5 * (b - a);
  if (std::abs(p(center)) > p.variation_bound(center, radius) * (1.0 + 1e-12)) return roots;

  if (p.degree() == 1) {
    const double t = p.origin() - p.coeff(0) / p.coeff(1);
    if (t >= a && t <= b) roots.push_back(t);
    return roots;
  }

  std::vector<double> knots{a};
  for (double c : real_roots(p.derivative(), a, b, tol)) {
    if (c > knots.back()) knots.push_back(c);
  }
  if (b > knots.back()) knots.push_back(b);

  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double x0 = knots[i], x1 = knots[i + 1];
    const double f0 = p(x0), f1 = p(x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if (f1 != 0.0 && (f0 < 0.0) != (f1 < 0.0)) {
      roots.push_back(detail::bisect_root(p, x0, x1, f0, tol));
    }
  }
  if (p(knots.back()) == 0.0) roots.push_back(knots.back());

  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(), [tol](double x, double y) { return y - x <= tol; }),
              roots.end());
  return roots;
}

/// {t in [a, b] : |p(t)| <= bound} as a normalized union of closed intervals.
inline IntervalSet sublevel_set(const Polynomial& p, double bound, double a, double b, double tol = 1e-12) {
  IntervalSet out;
  if (bound < 0.0 || b < a) return out;
  std::vector<double> knots{a, b};
  for (double r : real_roots(p - bound, a, b, tol)) knots.push_back(r);
  for (double r : real_roots(p + bound, a, b, tol)) knots.push_back(r);
  for (double r : real_roots(p.derivative(), a, b, tol)) knots.push_back(r);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (std::abs(p(knots[i])) <= bound) out.push_back({knots[i], knots[i]});
    if (i + 1 < knots.size()) {
      const double mid = 0.5 * (knots[i] + knots[i + 1]);
      if (std::abs(p(mid)) <= bound) out.push_back({knots[i], knots[i + 1]});
    }
  }
  return normalize(std::move(out));
}

}  // namespace momentlab
