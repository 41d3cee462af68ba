#pragma once

// Experiment drivers: thresholds, decay fits, L^p scans, Knapp scaling,
// frequency-cell volume scans and Hoeffding concentration checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "momentlab/cascade.hpp"
#include "momentlab/curve_geometry.hpp"
#include "momentlab/fourier.hpp"
#include "momentlab/freq_sets.hpp"
#include "momentlab/osc_quad.hpp"
#include "momentlab/parallel.hpp"
#include "momentlab/rng.hpp"

namespace momentlab {

/// Critical exponent: (d^2 + d + 2 alpha) / (2 alpha) for d >= 3, 4/alpha for d = 2.
inline double p_alpha(int d, double alpha) {
  if (d < 2) throw std::invalid_argument("p_alpha needs d >= 2");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha out of (0,1]");
  if (d == 2) return 4.0 / alpha;
  return (d * d + d + 2.0 * alpha) / (2.0 * alpha);
}

/// q' d(d+1) / (2 alpha); q = infinity gives q' = 1 and q = 1 gives infinity.
inline double restriction_boundary(int d, double alpha, double q) {
  if (d < 2) throw std::invalid_argument("restriction boundary needs d >= 2");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha out of (0,1]");
  if (!(q >= 1.0)) throw std::invalid_argument("q must be at least 1");
  const double qp = std::isinf(q) ? 1.0 : (q == 1.0 ? std::numeric_limits<double>::infinity() : q / (q - 1.0));
  return qp * d * (d + 1) / (2.0 * alpha);
}

/// Ordered numeric record; keys are unique.
class ScanRow {
 public:
  ScanRow& set(const std::string& key, double value) {
    for (auto& [k, v] : fields_) {
      if (k == key) {
        v = value;
        return *this;
      }
    }
    fields_.emplace_back(key, value);
    return *this;
  }

  double get(const std::string& key) const {
    for (const auto& [k, v] : fields_) {
      if (k == key) return v;
    }
    throw std::out_of_range("no column '" + key + "'");
  }

  bool has(const std::string& key) const {
    return std::any_of(fields_.begin(), fields_.end(), [&](const auto& f) { return f.first == key; });
  }

  const std::vector<std::pair<std::string, double>>& fields() const { return fields_; }

 private:
  std::vector<std::pair<std::string, double>> fields_;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("line fit needs at least 2 points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

struct DecayFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  std::vector<std::pair<double, double>> annuli;  // (R, sup)
};

/// Geometric grid of `count` radii from r_min to r_max inclusive.
inline std::vector<double> geometric_radii(double r_min, double r_max, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(count == 1 ? r_min : r_min * std::pow(r_max / r_min, static_cast<double>(i) / (count - 1)));
  }
  return out;
}

inline DecayFit decay_fit(const CascadeLevel& level, int d, double r_min, double r_max, int annuli_count,
                          int samples_per_annulus, std::uint64_t seed, double tol = kDefaultTol) {
  if (!(r_min >= 1.0 && r_max > r_min)) throw std::invalid_argument("decay fit needs 1 <= R_min < R_max");
  if (annuli_count < 2) throw std::invalid_argument("decay fit needs at least 2 annuli");
  DecayFit fit;
  std::vector<double> lx, ly;
  for (double R : geometric_radii(r_min, r_max, annuli_count)) {
    const double sup = annulus_sup(level, d, R, samples_per_annulus, seed, tol);
    fit.annuli.emplace_back(R, sup);
    lx.push_back(std::log(R));
    ly.push_back(std::log(sup));
  }
  const LineFit line = fit_line(lx, ly);
  fit.exponent = line.slope;
  fit.intercept = line.intercept;
  fit.residual = line.residual;
  return fit;
}

inline DecayFit decay_fit(const CantorMeasure& measure, int j, double r_min, double r_max, int annuli_count,
                          int samples_per_annulus, std::uint64_t seed, double tol = kDefaultTol) {
  return decay_fit(measure.level(j), measure.d(), r_min, r_max, annuli_count, samples_per_annulus, seed, tol);
}

/// Per (p, annulus [R, 2R]) contributions to ∫|nu_j^|^p, with the log-log
/// slope of contribution against R fitted per p. The same samples serve
/// every p.
inline std::vector<ScanRow> lp_convergence_scan(const CantorMeasure& measure, int j, const std::vector<double>& p_list,
                                                const std::vector<double>& r_list, int samples, std::uint64_t seed,
                                                double tol = kDefaultTol) {
  if (p_list.empty() || r_list.empty()) throw std::invalid_argument("lp scan needs nonempty p and R lists");
  const int d = measure.d();
  std::vector<std::vector<double>> moduli;
  for (double R : r_list) {
    if (!(R >= 1.0)) throw std::domain_error("annulus radius must be at least 1");
    moduli.push_back(annulus_moduli(measure.level(j), d, R, 2.0 * R, samples, seed, tol));
  }
  std::vector<ScanRow> rows;
  for (double p : p_list) {
    if (!(p >= 1.0)) throw std::domain_error("exponent p must be at least 1");
    std::vector<Estimate> est;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < r_list.size(); ++i) {
      est.push_back(stratum_estimate(moduli[i], p, shell_volume(d, r_list[i], 2.0 * r_list[i])));
      if (est.back().value > 0.0) {
        lx.push_back(std::log(r_list[i]));
        ly.push_back(std::log(est.back().value));
      }
    }
    const double slope = lx.size() >= 2 ? fit_line(lx, ly).slope : std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < r_list.size(); ++i) {
      ScanRow row;
      row.set("p", p).set("R", r_list[i]).set("contribution", est[i].value).set("std_error", est[i].std_error);
      row.set("samples", samples).set("slope", slope);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Parameter interval {t : |gamma(t) - gamma(t0)| < r} ∩ [0, 1]; the
/// distance is monotone in |t - t0| so each end is found by bisection.
inline Interval curve_ball_interval(const MomentCurve& curve, double t0, double r) {
  const Vector x0 = evaluate(curve, t0);
  auto dist = [&](double t) { return (evaluate(curve, t) - x0).norm(); };
  auto edge = [&](double lo, double hi) {
    // dist(lo) < r; returns the crossing towards hi, or hi when none
    if (dist(hi) < r) return hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (dist(mid) < r ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  return {edge(t0, 0.0), edge(t0, 1.0)};
}

/// Transform of 1_{[lo, hi]} times the top-level density, with phase taken
/// relative to gamma(t_ref).
inline std::complex<double> restricted_transform(const CascadeLevel& level, const PhasePolynomial& phase, Interval range,
                                                 double tol) {
  const double M = static_cast<double>(level.M);
  const auto first = static_cast<std::uint64_t>(std::max(0.0, std::floor(range.lo * M)));
  auto it = std::lower_bound(level.offsets.begin(), level.offsets.end(), first);
  ComplexSum sum;
  for (; it != level.offsets.end(); ++it) {
    const double l = std::max(static_cast<double>(*it) / M, range.lo);
    const double r = std::min(static_cast<double>(*it + 1) / M, range.hi);
    if (static_cast<double>(*it) / M > range.hi) break;
    if (r > l) sum.add(osc_integral(phase, {l, r}, tol).value);
  }
  return level.beta.to_double() * sum.value();
}

/// Knapp example at each level k: the cap f_k = 1_{B(gamma(t*), r_k)},
/// r_k = 1/M_k, t* the left end of the leftmost level-k interval; its
/// extension is integrated over dual_scale times the dual box of the
/// isotropic box at (t*, r_k). Phases are taken relative to gamma(t*).
inline std::vector<ScanRow> knapp_experiment(const CantorMeasure& measure, double p, double q,
                                             const std::vector<int>& level_list, double dual_scale, int samples,
                                             std::uint64_t seed, double tol = kDefaultTol) {
  if (!(dual_scale > 0.0 && dual_scale <= 1.0)) throw std::invalid_argument("dual_scale must lie in (0, 1]");
  if (!(p >= 1.0) || !(q >= 1.0)) throw std::invalid_argument("knapp exponents must be at least 1");
  if (level_list.empty() || samples < 1) throw std::invalid_argument("knapp needs levels and samples");
  const int d = measure.d();
  const MomentCurve curve(d);
  const CascadeLevel& top = measure.level(measure.top_level());
  std::vector<ScanRow> rows;
  std::vector<double> lx, ly;
  for (int k : level_list) {
    const CascadeLevel& lk = measure.level(k);
    if (lk.offsets.empty()) throw std::invalid_argument("level " + std::to_string(k) + " is empty");
    const double r = 1.0 / static_cast<double>(lk.M);
    const double t_star = static_cast<double>(lk.offsets.front()) / static_cast<double>(lk.M);
    const Interval range = curve_ball_interval(curve, t_star, r);
    const double mass = interval_mass(top, range.lo, range.hi);
    const AnisotropicBox dual = dual_box(isotropic_box(curve, t_star, r));
    double volume = 1.0;
    for (int i = 0; i < d; ++i) volume *= 2.0 * dual_scale * dual.half_lengths[i];

    std::vector<double> power(static_cast<std::size_t>(samples));
    std::vector<int> coherent(static_cast<std::size_t>(samples));
    parallel_for(power.size(), [&](std::size_t i) {
      KeyedStream stream(seed, {static_cast<std::uint64_t>(k), i});
      Vector local(d);
      for (int c = 0; c < d; ++c) local[c] = stream.uniform(-1.0, 1.0) * dual_scale * dual.half_lengths[c];
      const Vector xi = dual.axes * local;
      const PhasePolynomial phase = PhasePolynomial(xi).relative_to(t_star);
      const std::complex<double> g = restricted_transform(top, phase, range, tol);
      power[i] = std::pow(std::abs(g), p);
      coherent[i] = g.real() >= 0.5 * mass ? 1 : 0;
    });
    const Estimate est = stratum_estimate(power, 1.0, volume);
    double frac = 0.0;
    for (int c : coherent) frac += c;
    frac /= samples;

    ScanRow row;
    row.set("k", k).set("r", r).set("t_star", t_star).set("ball_mass", mass).set("normalizer", std::pow(mass, 1.0 / q));
    row.set("integral", est.value).set("std_error", est.std_error).set("coherence", frac).set("samples", samples);
    rows.push_back(std::move(row));
    if (est.value > 0.0) {
      lx.push_back(std::log(r));
      ly.push_back(std::log(est.value));
    }
  }
  const double slope = lx.size() >= 2 ? fit_line(lx, ly).slope : std::numeric_limits<double>::quiet_NaN();
  for (auto& row : rows) row.set("slope", slope).set("expected_slope", measure.alpha_eff() * p - d * (d + 1) / 2.0);
  return rows;
}

inline constexpr double kConcentrationLambdas[] = {0.5, 1.0, 2.0};

/// Resamples level j+1 `trials` times and compares the tails of
/// Re/Im(nu_{j+1}^ - nu_j^) at lambda * sqrt(4C), C the largest realized
/// sum |X|^2, against Hoeffding's 2 exp(-2 lambda^2).
inline ScanRow concentration_check(const CantorMeasure& measure, int j, const Vector& xi, int trials,
                                   std::uint64_t seed, double tol = kDefaultTol) {
  if (trials < 100) throw std::invalid_argument("concentration check needs at least 100 trials");
  if (j < 0 || j >= measure.top_level()) throw std::out_of_range("concentration level out of range");
  const PhasePolynomial phase(xi);
  const CascadeLevel& parent = measure.level(j);
  const std::complex<double> base = nu_hat(parent, phase, tol).value;
  std::vector<std::complex<double>> diff(static_cast<std::size_t>(trials));
  std::vector<double> sq(static_cast<std::size_t>(trials));
  parallel_for(diff.size(), [&](std::size_t i) {
    const CascadeLevel child = resample_children(measure, j, mix64(seed ^ mix64(i + 1)));
    diff[i] = nu_hat(child, phase, tol).value - base;
    sq[i] = sq_sum_increments(parent, child, phase, tol);
  });
  const double C = *std::max_element(sq.begin(), sq.end());
  ComplexSum mean;
  for (const auto& z : diff) mean.add(z);

  ScanRow row;
  row.set("xi_norm", xi.norm()).set("trials", trials).set("sq_sum_max", C);
  row.set("mean_re", mean.value().real() / trials).set("mean_im", mean.value().imag() / trials);
  for (double lambda : kConcentrationLambdas) {
    const double threshold = lambda * std::sqrt(4.0 * C);
    double re = 0.0, im = 0.0;
    for (const auto& z : diff) {
      re += std::abs(z.real()) > threshold ? 1.0 : 0.0;
      im += std::abs(z.imag()) > threshold ? 1.0 : 0.0;
    }
    const std::string tag = std::to_string(static_cast<int>(std::lround(lambda * 100)));
    row.set("tail_re_" + tag, re / trials).set("tail_im_" + tag, im / trials);
    row.set("reference_" + tag, 2.0 * std::exp(-2.0 * lambda * lambda));
  }
  return row;
}

/// Per cell (s1, s2): volume estimate of Omega_j(s1, s2) against its bound,
/// and the increments of sampled Omega-tilde_j members one level down
/// against c_bound(M_{j-1}).
inline std::vector<ScanRow> omega_scan(const CantorMeasure& measure, int j, int s1_max, int s2_max, CellVariant variant,
                                       std::size_t samples, double eps, std::uint64_t seed, std::size_t members = 20,
                                       double tol = kDefaultTol) {
  if (j < 1 || j > measure.top_level()) throw std::out_of_range("omega scan level must be in [1, top]");
  if (s1_max < 0 || s2_max < 0) throw std::invalid_argument("cell grid must be non-negative");
  const CascadeLevel& level = measure.level(j);
  const CascadeLevel& below = measure.level(j - 1);
  const double Mj = static_cast<double>(level.M);
  const double alpha = measure.alpha_eff();
  std::vector<ScanRow> rows;
  for (int s1 = 0; s1 <= s1_max; ++s1) {
    for (int s2 = 0; s2 <= s2_max; ++s2) {
      if (std::ldexp(1.0, s2) > Mj * std::ldexp(1.0, s1)) continue;
      const std::uint64_t cell_seed = mix64(seed ^ mix64((static_cast<std::uint64_t>(s1) << 32) | s2));
      const UnionEstimate est = estimate_omega_volume(measure, j, s1, s2, variant, samples, cell_seed);
      const double bound = omega_volume_bound(Mj, s1, s2, alpha, measure.d(), eps, variant);
      const auto found = sample_tilde_members(level, measure.d(), s1, s2, variant, members, 200 * members + 2000,
                                              mix64(cell_seed + 1));
      std::vector<double> sq(found.size());
      parallel_for(found.size(), [&](std::size_t i) { sq[i] = sq_sum_increments(below, level, PhasePolynomial(found[i]), tol); });
      const double sq_max = sq.empty() ? 0.0 : *std::max_element(sq.begin(), sq.end());
      const double cb = c_bound(static_cast<double>(below.M), s1, s2, alpha, eps);

      ScanRow row;
      row.set("s1", s1).set("s2", s2).set("estimate", est.estimate).set("std_error", est.std_error);
      row.set("union_volume", est.union_volume).set("pass_fraction", est.pass_fraction).set("bound", bound);
      row.set("ratio", est.estimate > 0.0 ? est.estimate / bound : 0.0).set("empty", est.estimate > 0.0 ? 0.0 : 1.0);
      row.set("members", static_cast<double>(found.size())).set("sq_sum_max", sq_max).set("c_bound", cb);
      row.set("sq_ratio", found.empty() ? 0.0 : sq_max / cb);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace momentlab
