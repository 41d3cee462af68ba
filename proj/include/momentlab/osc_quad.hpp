#pragma once

// Oscillatory integrals  ∫_I e(-P(t)) dt,  e(x) = exp(2πix),  for polynomial
// phases P(t) = <gamma(t), xi>, together with the H-functional
//   H_I(xi) = inf_{t in I} sum_k |P^(k)(t) / k!|^(1/k)
// and the bound min(|I|, 1/H_I(xi)) it controls.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "momentlab/curve_geometry.hpp"
#include "momentlab/interval.hpp"
#include "momentlab/parallel.hpp"
#include "momentlab/polynomial.hpp"

namespace momentlab {

/// The phase t -> <gamma(t), xi>, optionally re-expanded about a point s as
/// t -> <gamma(t) - gamma(s), xi>.
class PhasePolynomial {
 public:
  explicit PhasePolynomial(const Vector& xi) : dim_(static_cast<int>(xi.size())) {
    if (xi.size() < 1 || xi.size() > kMaxPolyDegree) throw std::invalid_argument("frequency dimension out of range");
    std::array<double, kMaxPolyDegree + 1> c{};
    for (int k = 0; k < dim_; ++k) c[k + 1] = xi[k];
    poly_ = Polynomial(std::span<const double>(c.data(), dim_ + 1));
  }

  int dimension() const { return dim_; }
  const Polynomial& polynomial() const { return poly_; }
  double operator()(double t) const { return poly_(t); }

  /// P^(k)(t) = <gamma^(k)(t), xi>.
  double derivative(double t, int k) const { return poly_.derivative(k)(t); }

  /// t -> P(t) - P(s), stored in powers of (t - s).
  PhasePolynomial relative_to(double s) const {
    PhasePolynomial out = *this;
    out.poly_ = poly_.shifted(s) - poly_(s);
    return out;
  }

  bool is_constant() const { return poly_.degree() <= 0; }

 private:
  Polynomial poly_;
  int dim_;
};

struct IntegralValue {
  std::complex<double> value;
  double err = 0.0;
};

namespace detail {

template <int N>
struct GaussLegendre {
  std::array<double, N> x{};
  std::array<double, N> w{};

  GaussLegendre() {
    for (int i = 0; i < (N + 1) / 2; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= N; ++k) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = N * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[i] = -z;
      x[N - 1 - i] = z;
      w[i] = w[N - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

template <int N>
const GaussLegendre<N>& gauss_rule() {
  static const GaussLegendre<N> rule;
  return rule;
}

/// e(-x), with x reduced mod 1 before scaling by 2π.
inline std::complex<double> unit_phase(double cycles) {
  const double frac = cycles - std::nearbyint(cycles);
  const double angle = -2.0 * std::numbers::pi * frac;
  return {std::cos(angle), std::sin(angle)};
}

template <int N>
std::complex<double> gauss_panel(const Polynomial& phase, double a, double b) {
  const auto& rule = gauss_rule<N>();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  std::complex<double> acc = 0.0;
  for (int i = 0; i < N; ++i) acc += rule.w[i] * unit_phase(phase(mid + half * rule.x[i]));
  return acc * half;
}

/// Solves phase(t) = target on [lo, hi] where phase is monotone.
inline double invert_monotone(const Polynomial& phase, const Polynomial& slope, double target, double lo, double hi) {
  double flo = phase(lo) - target;
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double f = phase(t) - target;
    if (f == 0.0) return t;
    if ((f < 0.0) == (flo < 0.0)) {
      lo = t;
      flo = f;
    } else {
      hi = t;
    }
    const double df = slope(t);
    double next = (df != 0.0) ? t - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 4e-16 * std::max(1.0, std::abs(t)) || hi - lo <= 4e-16) return next;
    t = next;
  }
  return t;
}

/// Panels of [lo, hi] on which the phase is monotone and varies by at most
/// one cycle. Monotone pieces come from the isolated roots of P'.
inline std::vector<double> phase_panels(const Polynomial& phase, double lo, double hi) {
  const Polynomial slope = phase.derivative();
  std::vector<double> knots{lo};
  for (double c : real_roots(slope, lo, hi)) {
    if (c > knots.back() && c < hi) knots.push_back(c);
  }
  knots.push_back(hi);

  std::vector<double> edges{lo};
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double u = knots[i], v = knots[i + 1];
    const double pu = phase(u), pv = phase(v);
    const double cycles = std::abs(pv - pu);
    const auto n = static_cast<long>(std::max(1.0, std::ceil(cycles)));
    double prev = u;
    for (long k = 1; k < n; ++k) {
      const double target = pu + (pv - pu) * static_cast<double>(k) / static_cast<double>(n);
      const double t = invert_monotone(phase, slope, target, prev, v);
      if (t > prev && t < v) {
        edges.push_back(t);
        prev = t;
      }
    }
    edges.push_back(v);
  }
  return edges;
}

}  // namespace detail

/// ∫_I e(-P(t)) dt with Gauss-Legendre 16/32 per panel; err is the summed
/// node-doubling discrepancy. Panels whose discrepancy exceeds tol * length
/// are bisected until the discrepancy reaches the rounding floor.
inline IntegralValue osc_integral(const PhasePolynomial& phase, Interval I, double tol) {
  if (!(tol > 0.0)) throw std::domain_error("quadrature tolerance must be positive");
  if (!(I.lo >= 0.0 && I.hi <= 1.0 && I.lo <= I.hi)) throw std::domain_error("integration interval must lie in [0, 1]");
  const double len = I.length();
  const Polynomial& p = phase.polynomial();
  if (len == 0.0) return {{0.0, 0.0}, 0.0};
  if (p.degree() <= 0) return {len * detail::unit_phase(p.coeff(0)), 0.0};

  const std::vector<double> edges = detail::phase_panels(p, I.lo, I.hi);
  ComplexSum value;
  CompensatedSum<double> err;

  struct Panel {
    double a, b;
    int depth;
  };
  std::vector<Panel> stack;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    stack.push_back({edges[i], edges[i + 1], 0});
    while (!stack.empty()) {
      const Panel panel = stack.back();
      stack.pop_back();
      const auto q16 = detail::gauss_panel<16>(p, panel.a, panel.b);
      const auto q32 = detail::gauss_panel<32>(p, panel.a, panel.b);
      const double diff = std::abs(q32 - q16);
      const double scale = 1.0 + std::abs(p(panel.a)) + std::abs(p(panel.b));
      const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;
      const double width = panel.b - panel.a;
      if (diff <= std::max(tol, floor) * width || panel.depth >= 20) {
        value.add(q32);
        err.add(diff);
      } else {
        const double mid = 0.5 * (panel.a + panel.b);
        stack.push_back({mid, panel.b, panel.depth + 1});
        stack.push_back({panel.a, mid, panel.depth + 1});
      }
    }
  }
  return {value.value(), err.value()};
}

inline IntegralValue osc_integral(const Vector& xi, Interval I, double tol) {
  return osc_integral(PhasePolynomial(xi), I, tol);
}

/// inf over t in I of sum_k |P^(k)(t)/k!|^(1/k), located by branch and bound
/// with Taylor-remainder lower bounds; the returned value is attained and
/// exceeds the infimum by at most a relative 1e-7.
inline double h_functional(const Vector& xi, Interval I) {
  const PhasePolynomial phase(xi);
  const int d = phase.dimension();
  std::vector<Polynomial> terms;
  double factorial = 1.0;
  for (int k = 1; k <= d; ++k) {
    factorial *= k;
    terms.push_back(phase.polynomial().derivative(k) * (1.0 / factorial));
  }
  auto value_at = [&](double t) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += std::pow(std::abs(terms[k](t)), 1.0 / (k + 1));
    return s;
  };
  auto lower_bound = [&](double a, double b) {
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
      const double m = std::abs(terms[k](c)) - terms[k].variation_bound(c, r);
      if (m > 0.0) s += std::pow(m, 1.0 / (k + 1));
    }
    return s;
  };

  double best = std::min(value_at(I.lo), value_at(I.hi));
  for (const auto& g : terms) {
    for (double r : real_roots(g, I.lo, I.hi)) best = std::min(best, value_at(r));
  }
  constexpr double kRelTol = 1e-7;
  std::vector<Interval> stack{I};
  while (!stack.empty()) {
    const Interval iv = stack.back();
    stack.pop_back();
    if (lower_bound(iv.lo, iv.hi) >= best * (1.0 - kRelTol)) continue;
    const double mid = 0.5 * (iv.lo + iv.hi);
    best = std::min(best, value_at(mid));
    if (iv.length() < 1e-13) continue;
    stack.push_back({mid, iv.hi});
    stack.push_back({iv.lo, mid});
  }
  return best;
}

/// min(|I|, 1/H_I(xi)), with 1/0 read as +infinity.
inline double vdc_bound(const Vector& xi, Interval I) {
  const double h = h_functional(xi, I);
  return h > 0.0 ? std::min(I.length(), 1.0 / h) : I.length();
}

}  // namespace momentlab
