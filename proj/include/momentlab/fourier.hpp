#pragma once

// Fourier transforms of the pushed-forward level measures
//   nu_j^(xi) = beta_j * sum_{a in E_j} ∫_{[a/M_j, (a+1)/M_j]} e(-<gamma(t), xi>) dt,
// martingale increments and frequency-domain sampling.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "momentlab/cascade.hpp"
#include "momentlab/curve_geometry.hpp"
#include "momentlab/osc_quad.hpp"
#include "momentlab/parallel.hpp"
#include "momentlab/rng.hpp"

namespace momentlab {

inline constexpr double kDefaultTol = 1e-10;

/// Transform of beta * 1_{E} for a single level (measure-free, so resampled
/// levels can be evaluated too).
inline IntegralValue nu_hat(const CascadeLevel& level, const PhasePolynomial& phase, double tol = kDefaultTol) {
  const double M = static_cast<double>(level.M);
  const double per = tol / static_cast<double>(std::max<std::size_t>(level.offsets.size(), 1));
  ComplexSum value;
  CompensatedSum<double> err;
  for (std::uint64_t a : level.offsets) {
    const Interval I{static_cast<double>(a) / M, static_cast<double>(a + 1) / M};
    const IntegralValue piece = osc_integral(phase, I, per);
    value.add(piece.value);
    err.add(piece.err);
  }
  const double beta = level.beta.to_double();
  return {beta * value.value(), beta * err.value()};
}

inline IntegralValue nu_hat(const CascadeLevel& level, const Vector& xi, double tol = kDefaultTol) {
  return nu_hat(level, PhasePolynomial(xi), tol);
}

inline IntegralValue nu_hat(const CantorMeasure& measure, int j, const Vector& xi, double tol = kDefaultTol) {
  return nu_hat(measure.level(j), xi, tol);
}

/// X_a = beta_{j+1} * ∫ over the children of a. `children` is level j+1.
inline std::complex<double> x_increment(const CascadeLevel& parent, const CascadeLevel& children, std::uint64_t a,
                                        const PhasePolynomial& phase, double tol = kDefaultTol) {
  if (!parent.has_offset(a)) {
    throw std::invalid_argument("offset " + std::to_string(a) + " is not an interval of level " + std::to_string(parent.j));
  }
  const std::uint64_t m = children.M / parent.M;
  const double M = static_cast<double>(children.M);
  const double per = tol / static_cast<double>(std::max<std::size_t>(children.offsets.size(), 1));
  auto it = std::lower_bound(children.offsets.begin(), children.offsets.end(), a * m);
  ComplexSum sum;
  for (; it != children.offsets.end() && *it < (a + 1) * m; ++it) {
    sum.add(osc_integral(phase, {static_cast<double>(*it) / M, static_cast<double>(*it + 1) / M}, per).value);
  }
  return children.beta.to_double() * sum.value();
}

inline std::complex<double> x_increment(const CantorMeasure& measure, int j, std::uint64_t a, const Vector& xi,
                                        double tol = kDefaultTol) {
  if (j < 0 || j >= measure.top_level()) throw std::out_of_range("increment level " + std::to_string(j) + " out of range");
  return x_increment(measure.level(j), measure.level(j + 1), a, PhasePolynomial(xi), tol);
}

inline std::complex<double> martingale_difference(const CantorMeasure& measure, int j, const Vector& xi,
                                                  double tol = kDefaultTol) {
  if (j < 0 || j >= measure.top_level()) throw std::out_of_range("increment level " + std::to_string(j) + " out of range");
  const PhasePolynomial phase(xi);
  return nu_hat(measure.level(j + 1), phase, tol).value - nu_hat(measure.level(j), phase, tol).value;
}

/// sum over the intervals of `parent` of |X_a|^2, with children from `children`.
inline double sq_sum_increments(const CascadeLevel& parent, const CascadeLevel& children, const PhasePolynomial& phase,
                                double tol = kDefaultTol) {
  CompensatedSum<double> acc;
  for (std::uint64_t a : parent.offsets) acc.add(std::norm(x_increment(parent, children, a, phase, tol)));
  return acc.value();
}

inline double sq_sum_increments(const CantorMeasure& measure, int j, const Vector& xi, double tol = kDefaultTol) {
  if (j < 0 || j >= measure.top_level()) throw std::out_of_range("increment level " + std::to_string(j) + " out of range");
  return sq_sum_increments(measure.level(j), measure.level(j + 1), PhasePolynomial(xi), tol);
}

// ---- frequency sampling ----

inline double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

/// Volume of {r0 <= |xi| <= r1} in R^d.
inline double shell_volume(int d, double r0, double r1) {
  return unit_ball_volume(d) * (std::pow(r1, d) - std::pow(r0, d));
}

/// Uniform point of the shell r0 <= |xi| <= r1.
inline Vector sample_shell(int d, double r0, double r1, KeyedStream& stream) {
  Vector x(d);
  double norm = 0.0;
  do {
    for (int i = 0; i < d; ++i) x[i] = stream.normal();
    norm = x.norm();
  } while (norm == 0.0);
  const double lo = std::pow(r0, d), hi = std::pow(r1, d);
  const double r = std::pow(lo + stream.uniform() * (hi - lo), 1.0 / d);
  return x * (r / norm);
}

/// The i-th sample of the annulus R <= |xi| <= 2R for a given seed.
inline Vector annulus_point(int d, double R, std::uint64_t seed, std::uint64_t i) {
  KeyedStream stream(seed, {key_of(R), i});
  return sample_shell(d, R, 2.0 * R, stream);
}

/// |nu_j^| at n annulus samples, in sample order.
inline std::vector<double> annulus_moduli(const CascadeLevel& level, int d, double r0, double r1, int n_samples,
                                          std::uint64_t seed, double tol = kDefaultTol) {
  std::vector<double> out(static_cast<std::size_t>(std::max(n_samples, 0)));
  parallel_for(out.size(), [&](std::size_t i) {
    KeyedStream stream(seed, {key_of(r0), key_of(r1), i});
    out[i] = std::abs(nu_hat(level, sample_shell(d, r0, r1, stream), tol).value);
  });
  return out;
}

/// max |nu_j^(xi)| over n samples uniform in R <= |xi| <= 2R. A lower bound
/// for the true supremum over the annulus.
inline double annulus_sup(const CascadeLevel& level, int d, double R, int n_samples, std::uint64_t seed,
                          double tol = kDefaultTol) {
  if (!(R >= 1.0)) throw std::domain_error("annulus radius must be at least 1");
  std::vector<double> vals(static_cast<std::size_t>(std::max(n_samples, 0)));
  parallel_for(vals.size(), [&](std::size_t i) {
    vals[i] = std::abs(nu_hat(level, annulus_point(d, R, seed, i), tol).value);
  });
  return vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
}

inline double annulus_sup(const CantorMeasure& measure, int j, double R, int n_samples, std::uint64_t seed,
                          double tol = kDefaultTol) {
  return annulus_sup(measure.level(j), measure.d(), R, n_samples, seed, tol);
}

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Volume-weighted mean of modulus^p over one stratum.
inline Estimate stratum_estimate(const std::vector<double>& moduli, double p, double volume) {
  const auto n = static_cast<double>(moduli.size());
  if (moduli.empty()) return {};
  CompensatedSum<double> s1, s2;
  for (double x : moduli) {
    const double y = std::pow(x, p);
    s1.add(y);
    s2.add(y * y);
  }
  const double mean = s1.value() / n;
  const double var = moduli.size() > 1 ? std::max(0.0, (s2.value() - n * mean * mean) / (n - 1.0)) : 0.0;
  return {volume * mean, volume * std::sqrt(var / n)};
}

/// Dyadic strata of the ball |xi| <= R: the unit ball, then [2^k, 2^(k+1)]
/// with the last shell truncated at R.
inline std::vector<std::pair<double, double>> dyadic_strata(double R) {
  std::vector<std::pair<double, double>> out{{0.0, 1.0}};
  for (double r = 1.0; r < R; r *= 2.0) out.emplace_back(r, std::min(2.0 * r, R));
  return out;
}

/// Stratified Monte Carlo estimate of ∫_{|xi| <= R} g(xi) dxi where the
/// callable returns g at a point; equal samples per stratum.
template <class Integrand>
Estimate ball_integral(int d, double R, int n_samples, std::uint64_t seed, Integrand&& g) {
  if (!(R >= 1.0)) throw std::domain_error("ball radius must be at least 1");
  CompensatedSum<double> total, var;
  for (const auto& [r0, r1] : dyadic_strata(R)) {
    std::vector<double> vals(static_cast<std::size_t>(std::max(n_samples, 1)));
    parallel_for(vals.size(), [&](std::size_t i) {
      KeyedStream stream(seed, {key_of(r0), key_of(r1), i});
      vals[i] = g(sample_shell(d, r0, r1, stream));
    });
    const Estimate e = stratum_estimate(vals, 1.0, shell_volume(d, r0, r1));
    total.add(e.value);
    var.add(e.std_error * e.std_error);
  }
  return {total.value(), std::sqrt(var.value())};
}

inline Estimate lp_ball_integral(const CascadeLevel& level, int d, double p, double R, int n_samples,
                                 std::uint64_t seed, double tol = kDefaultTol) {
  if (!(p >= 1.0)) throw std::domain_error("exponent p must be at least 1");
  return ball_integral(d, R, n_samples, seed,
                       [&](const Vector& xi) { return std::pow(std::abs(nu_hat(level, xi, tol).value), p); });
}

inline Estimate lp_ball_integral(const CantorMeasure& measure, int j, double p, double R, int n_samples,
                                 std::uint64_t seed, double tol = kDefaultTol) {
  return lp_ball_integral(measure.level(j), measure.d(), p, R, n_samples, seed, tol);
}

}  // namespace momentlab
