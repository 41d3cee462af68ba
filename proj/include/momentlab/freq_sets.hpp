#pragma once

// Frequency cells
//   Omega_j(s1)      : some t in E_j has |P^(k)(t)| <= (M_j 2^s1)^k for all k
//   Omega_j(s1, s2)  : Omega_j(s1) and some t' in E_j has
//                      |P^(k)(t')| <= M_j 2^s1 2^(s2(k-1)) for k >= 2
//   Omega_3,j(s1,s2) : d = 3, a single t for k = 1, 2, 3
// with the disjoint Omega-tilde pieces, theoretical volume bounds and a
// Monte Carlo union-of-parallelotopes volume estimator.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "momentlab/cascade.hpp"
#include "momentlab/curve_geometry.hpp"
#include "momentlab/fourier.hpp"
#include "momentlab/interval.hpp"
#include "momentlab/osc_quad.hpp"
#include "momentlab/parallel.hpp"
#include "momentlab/polynomial.hpp"
#include "momentlab/rng.hpp"

namespace momentlab {

enum class CellVariant { general, d3 };

inline std::string to_string(CellVariant v) { return v == CellVariant::general ? "general" : "d3"; }

inline CellVariant parse_variant(const std::string& s) {
  if (s == "general") return CellVariant::general;
  if (s == "d3") return CellVariant::d3;
  throw std::invalid_argument("unknown cell variant '" + s + "' (expected general or d3)");
}

struct CellIndex {
  int j = 0;
  int s1 = 0;
  int s2 = 0;
  CellVariant variant = CellVariant::general;
};

// points within this relative distance of a constraint boundary count as inside
inline constexpr double kBoundarySlack = 1e-9;

/// {t in [0,1] : |<gamma^(k)(t), xi>| <= bound}.
inline IntervalSet constraint_interval_set(const PhasePolynomial& phase, int k, double bound) {
  if (k < 1 || k > phase.dimension()) throw std::out_of_range("derivative order out of range");
  return sublevel_set(phase.polynomial().derivative(k), bound, 0.0, 1.0);
}

inline IntervalSet constraint_interval_set(const Vector& xi, int k, double bound) {
  return constraint_interval_set(PhasePolynomial(xi), k, bound);
}

/// Whether a normalized interval set meets the closed intervals of a level.
inline bool meets_level(const IntervalSet& set, const CascadeLevel& level) {
  const double M = static_cast<double>(level.M);
  for (const auto& iv : set) {
    const double first = std::max(0.0, std::floor(iv.lo * M) - 1.0);
    auto it = std::lower_bound(level.offsets.begin(), level.offsets.end(), static_cast<std::uint64_t>(first));
    for (; it != level.offsets.end(); ++it) {
      const double l = static_cast<double>(*it) / M;
      const double r = static_cast<double>(*it + 1) / M;
      if (l > iv.hi) break;
      if (r >= iv.lo) return true;
    }
  }
  return false;
}

namespace detail {

inline double cell_scale(const CascadeLevel& level, int s1) { return static_cast<double>(level.M) * std::ldexp(1.0, s1); }

inline void check_cell(const CascadeLevel& level, int s1, int s2) {
  if (s1 < 0 || s2 < 0) throw std::invalid_argument("cell indices must be non-negative");
  if (std::ldexp(1.0, s2) > cell_scale(level, s1)) throw std::invalid_argument("s2 exceeds its range 2^s2 <= M_j 2^s1");
}

// Intersection over k in [k0, d] of the sublevel sets with the given bounds.
inline IntervalSet witness_set(const PhasePolynomial& phase, int k0, const std::function<double(int)>& bound) {
  IntervalSet set{{0.0, 1.0}};
  for (int k = phase.dimension(); k >= k0 && !set.empty(); --k) {
    set = intersect(set, constraint_interval_set(phase, k, bound(k) * (1.0 + kBoundarySlack)));
  }
  return set;
}

}  // namespace detail

inline bool in_omega_s1(const CascadeLevel& level, int s1, const PhasePolynomial& phase) {
  if (s1 < 0) throw std::invalid_argument("cell indices must be non-negative");
  const double B = detail::cell_scale(level, s1);
  return meets_level(detail::witness_set(phase, 1, [B](int k) { return std::pow(B, k); }), level);
}

inline bool in_omega_s1s2(const CascadeLevel& level, int s1, int s2, const PhasePolynomial& phase, CellVariant variant) {
  detail::check_cell(level, s1, s2);
  if (variant == CellVariant::d3 && phase.dimension() != 3) throw std::invalid_argument("d3 cell variant requires d = 3");
  if (!in_omega_s1(level, s1, phase)) return false;
  const double B = detail::cell_scale(level, s1);
  const double step = std::ldexp(1.0, s2);
  auto bound = [B, step](int k) { return B * std::pow(step, k - 1); };
  const int k0 = variant == CellVariant::d3 ? 1 : 2;
  return meets_level(detail::witness_set(phase, k0, bound), level);
}

/// Omega-tilde cell membership (the four set-difference cases).
inline bool in_omega_tilde(const CascadeLevel& level, int s1, int s2, const PhasePolynomial& phase, CellVariant variant) {
  if (!in_omega_s1s2(level, s1, s2, phase, variant)) return false;
  if (s2 > 0 && in_omega_s1s2(level, s1, s2 - 1, phase, variant)) return false;
  if (s1 > 0 && in_omega_s1(level, s1 - 1, phase)) return false;
  return true;
}

inline bool in_omega_s1(const CantorMeasure& measure, int j, int s1, const Vector& xi) {
  return in_omega_s1(measure.level(j), s1, PhasePolynomial(xi));
}
inline bool in_omega_s1s2(const CantorMeasure& measure, int j, int s1, int s2, const Vector& xi, CellVariant variant) {
  return in_omega_s1s2(measure.level(j), s1, s2, PhasePolynomial(xi), variant);
}
inline bool in_omega_tilde(const CantorMeasure& measure, int j, int s1, int s2, const Vector& xi, CellVariant variant) {
  return in_omega_tilde(measure.level(j), s1, s2, PhasePolynomial(xi), variant);
}

/// log2(|xi_3| / (M_j 2^(s1+s2))), the d = 3 diagnostic; -inf when xi_3 = 0.
inline double s3_diagnostic(double Mj, int s1, int s2, const Vector& xi) {
  if (xi.size() < 3) throw std::invalid_argument("s3 needs a third frequency coordinate");
  return std::log2(std::abs(xi[2]) / (Mj * std::ldexp(1.0, s1 + s2)));
}

// ---- theoretical bounds ----

/// Right-hand side of the |Omega_j(s1,s2)| (general, d >= 4) or
/// |Omega_3,j(s1,s2)| (d3) bound, for M_j = Mj. On the seam
/// 2^(s2(d-1)) = 2^s1 M_j the two general regimes coincide.
inline double omega_volume_bound(double Mj, int s1, int s2, double alpha, int d, double eps, CellVariant variant) {
  if (s1 < 0 || s2 < 0) throw std::invalid_argument("cell indices must be non-negative");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha out of (0,1]");
  const double B = Mj * std::ldexp(1.0, s1);
  if (std::ldexp(1.0, s2) > B) throw std::invalid_argument("s2 exceeds its range 2^s2 <= M_j 2^s1");
  const double me = std::pow(Mj, eps);
  if (variant == CellVariant::d3) {
    if (d != 3) throw std::invalid_argument("d3 volume bound requires d = 3");
    return me * std::pow(B, 3) * std::exp2(s1 * (1.0 - alpha) + s2 * (3.0 + alpha));
  }
  if (d < 4) throw std::invalid_argument("general volume bound requires d >= 4");
  const double dd = d;
  if (std::ldexp(1.0, s2 * (d - 1)) <= B) {
    return me * std::pow(B, dd) * std::exp2(s2 * (dd * (dd - 1.0) / 2.0 + alpha * dd)) *
           std::exp2(s1 * dd * (1.0 - alpha) / (dd - 1.0));
  }
  return me * std::pow(B, dd) * std::exp2(s2 * dd * (dd - 1.0) / 2.0) * std::pow(Mj, alpha) * std::exp2(s1) *
         std::pow(Mj * std::exp2(s1 - s2), alpha / (dd - 2.0)) * std::exp2(s1 * (1.0 - alpha) / (dd - 1.0));
}

/// M_j^(-alpha+eps) 2^(-s1(2-alpha)) 2^(-s2 alpha).
inline double c_bound(double Mj, int s1, int s2, double alpha, double eps) {
  return std::pow(Mj, -alpha + eps) * std::exp2(-s1 * (2.0 - alpha)) * std::exp2(-s2 * alpha);
}

// ---- parallelotopes and the union estimator ----

/// {x : |<n_k, x - center>| <= w_k for all k}, normals n_k the rows of B.
struct Parallelotope {
  Matrix normals;
  Vector center;
  Vector half_widths;
  Matrix inverse;  // normals^{-1}

  Parallelotope(Matrix n, Vector c, Vector w) : normals(std::move(n)), center(std::move(c)), half_widths(std::move(w)) {
    const Eigen::FullPivLU<Matrix> lu(normals);
    if (!lu.isInvertible()) throw std::invalid_argument("parallelotope normals are linearly dependent");
    inverse = lu.inverse();
  }

  int dimension() const { return static_cast<int>(center.size()); }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < half_widths.size(); ++i) v *= 2.0 * half_widths[i];
    return v / std::abs(normals.determinant());
  }

  bool contains(const Vector& x) const {
    const Vector y = normals * (x - center);
    for (int i = 0; i < y.size(); ++i) {
      if (std::abs(y[i]) > half_widths[i]) return false;
    }
    return true;
  }

  /// Image of u in [-1, 1]^d.
  Vector from_cube(const Vector& u) const { return center + inverse * half_widths.cwiseProduct(u); }
};

struct UnionEstimate {
  double estimate = 0.0;      // |union ∩ {pass}|
  double std_error = 0.0;
  double union_volume = 0.0;  // |union|
  double union_std_error = 0.0;
  double pass_fraction = 0.0;
  std::size_t anchors = 0;
  std::size_t samples = 0;
};

namespace detail {

struct AnchorSampler {
  const std::vector<Parallelotope>& anchors;
  std::vector<double> cumulative;
  double total = 0.0;

  explicit AnchorSampler(const std::vector<Parallelotope>& a) : anchors(a) {
    for (const auto& p : anchors) {
      total += p.volume();
      cumulative.push_back(total);
    }
  }

  // Volume-weighted anchor, then a uniform point inside it.
  Vector draw(KeyedStream& stream) const {
    const double u = stream.uniform() * total;
    auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    idx = std::min(idx, anchors.size() - 1);
    const int d = anchors[idx].dimension();
    Vector cube(d);
    for (int i = 0; i < d; ++i) cube[i] = stream.uniform(-1.0, 1.0);
    return anchors[idx].from_cube(cube);
  }

  std::size_t multiplicity(const Vector& x) const {
    std::size_t c = 0;
    for (const auto& p : anchors) c += p.contains(x) ? 1 : 0;
    return c;
  }
};

}  // namespace detail

/// Coverage-weighted estimate of |(union of anchors) ∩ {pass}|: anchors drawn
/// with probability proportional to volume, samples weighted by 1/(number of
/// anchors containing them).
inline UnionEstimate estimate_union_volume(const std::vector<Parallelotope>& anchors,
                                           const std::function<bool(const Vector&)>& pass, std::size_t n_samples,
                                           std::uint64_t seed) {
  if (anchors.empty()) throw std::invalid_argument("no anchors for union volume");
  if (n_samples == 0) throw std::invalid_argument("union volume needs at least one sample");
  const detail::AnchorSampler sampler(anchors);
  std::vector<double> inv(n_samples), hit(n_samples);
  parallel_for(n_samples, [&](std::size_t i) {
    KeyedStream stream(seed, {0x756e696fULL, i});
    const Vector x = sampler.draw(stream);
    const double w = 1.0 / static_cast<double>(std::max<std::size_t>(sampler.multiplicity(x), 1));
    inv[i] = w;
    hit[i] = pass(x) ? w : 0.0;
  });
  auto mean_se = [n = static_cast<double>(n_samples)](const std::vector<double>& v) {
    CompensatedSum<double> s1, s2;
    for (double x : v) {
      s1.add(x);
      s2.add(x * x);
    }
    const double mean = s1.value() / n;
    const double var = n > 1 ? std::max(0.0, (s2.value() - n * mean * mean) / (n - 1.0)) : 0.0;
    return std::pair{mean, std::sqrt(var / n)};
  };
  const auto [mu, se_u] = mean_se(inv);
  const auto [mp, se_p] = mean_se(hit);
  UnionEstimate out;
  out.union_volume = sampler.total * mu;
  out.union_std_error = sampler.total * se_u;
  out.estimate = sampler.total * mp;
  out.std_error = sampler.total * se_p;
  out.pass_fraction = mu > 0.0 ? mp / mu : 0.0;
  out.anchors = anchors.size();
  out.samples = n_samples;
  return out;
}

/// Origin-centred anchor parallelotopes covering Omega_j(s1,s2) (general)
/// or Omega_3,j(s1,s2) (d3). Anchors sit at the left endpoints of equal
/// subintervals of each level-j interval, of length L <= min(1/M_j, 2^-s2);
/// the widths come from the exact Taylor expansion of P^(k) across L, so
/// every witness t within L of an anchor certifies coverage.
inline std::vector<Parallelotope> omega_anchors(const CascadeLevel& level, int d, int s1, int s2, CellVariant variant) {
  detail::check_cell(level, s1, s2);
  if (variant == CellVariant::d3 && d != 3) throw std::invalid_argument("d3 cell variant requires d = 3");
  if (level.offsets.empty()) throw std::invalid_argument("level has no intervals");
  const MomentCurve curve(d);
  const double M = static_cast<double>(level.M);
  const double B = detail::cell_scale(level, s1);
  const double step = std::ldexp(1.0, s2);
  const double h = std::min(1.0 / M, 1.0 / step);
  const auto pieces = static_cast<std::uint64_t>(std::ceil((1.0 / M) / h - 1e-12));
  const double L = (1.0 / M) / static_cast<double>(pieces);
  const double x = step * L;
  const double slack = 1.0 + 4.0 * kBoundarySlack;

  // c_k = sum_{n=0}^{d-k} x^n / n!
  Vector width(d);
  for (int k = 1; k <= d; ++k) {
    double c = 0.0, term = 1.0;
    for (int n = 0; n <= d - k; ++n) {
      if (n > 0) term *= x / n;
      c += term;
    }
    width[k - 1] = c * B * std::pow(step, k - 1) * slack;
  }
  const double hull_lo = static_cast<double>(level.offsets.front()) / M;
  const double hull_hi = static_cast<double>(level.offsets.back() + 1) / M;

  std::vector<Parallelotope> anchors;
  for (std::uint64_t a : level.offsets) {
    for (std::uint64_t p = 0; p < pieces; ++p) {
      const double t = static_cast<double>(a) / M + static_cast<double>(p) * L;
      Matrix normals(d, d);
      for (int k = 1; k <= d; ++k) normals.row(k - 1) = derivative(curve, t, k).transpose();
      Vector w = width;
      if (variant == CellVariant::general) {
        // the k = 1 witness may sit anywhere in E_j
        const double D = std::max(t - hull_lo, hull_hi - t);
        double w1 = B, dn = 1.0;
        for (int n = 1; n <= d - 1; ++n) {
          dn *= D / n;
          w1 += width[n] * dn;
        }
        w[0] = w1 * slack;
      }
      anchors.emplace_back(std::move(normals), Vector::Zero(d), std::move(w));
    }
  }
  return anchors;
}

inline UnionEstimate estimate_omega_volume(const CantorMeasure& measure, int j, int s1, int s2, CellVariant variant,
                                           std::size_t n_samples, std::uint64_t seed) {
  const CascadeLevel& level = measure.level(j);
  const auto anchors = omega_anchors(level, measure.d(), s1, s2, variant);
  return estimate_union_volume(
      anchors, [&](const Vector& xi) { return in_omega_s1s2(level, s1, s2, PhasePolynomial(xi), variant); }, n_samples,
      seed);
}

/// Up to `count` members of the Omega-tilde cell, drawn uniformly from the
/// anchor union (acceptance 1/multiplicity) and kept if they pass.
inline std::vector<Vector> sample_tilde_members(const CascadeLevel& level, int d, int s1, int s2, CellVariant variant,
                                                std::size_t count, std::size_t max_draws, std::uint64_t seed) {
  const auto anchors = omega_anchors(level, d, s1, s2, variant);
  const detail::AnchorSampler sampler(anchors);
  std::vector<Vector> out;
  for (std::size_t i = 0; i < max_draws && out.size() < count; ++i) {
    KeyedStream stream(seed, {0x74696c64ULL, i});
    const Vector x = sampler.draw(stream);
    const double accept = 1.0 / static_cast<double>(std::max<std::size_t>(sampler.multiplicity(x), 1));
    if (stream.uniform() >= accept) continue;
    if (in_omega_tilde(level, s1, s2, PhasePolynomial(x), variant)) out.push_back(x);
  }
  return out;
}

}  // namespace momentlab
