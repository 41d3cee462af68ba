#pragma once

// Random Cantor cascade on [0,1]: at each level every surviving interval of
// length M_j^{-1} keeps the children (S + n) mod m, where n is uniform in
// {0, ..., m-1} and drawn independently per interval. Densities beta_j are
// chosen so every level carries mass exactly 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "momentlab/parallel.hpp"
#include "momentlab/rational.hpp"
#include "momentlab/rng.hpp"

namespace momentlab {

struct CascadeParams {
  int d = 2;
  int m = 4;
  double alpha = 0.5;
  int levels = 1;
  std::uint64_t seed = 0;
  std::optional<std::vector<int>> digit_set;
};

inline constexpr std::uint64_t kMaxResolution = std::uint64_t{1} << 62;

/// |S|: the explicit digit set size, else round(m^alpha) clamped to [1, m].
inline int digit_count(const CascadeParams& p) {
  if (p.digit_set) return static_cast<int>(p.digit_set->size());
  const long n = std::lround(std::pow(static_cast<double>(p.m), p.alpha));
  return static_cast<int>(std::clamp<long>(n, 1, p.m));
}

/// Dimension realized by the digit set: log|S| / log m.
inline double alpha_eff(const CascadeParams& p) {
  return std::log(static_cast<double>(digit_count(p))) / std::log(static_cast<double>(p.m));
}

/// Sorted base digit set in {0, ..., m-1}; evenly spaced unless overridden.
inline std::vector<int> base_digits(const CascadeParams& p) {
  std::vector<int> s;
  if (p.digit_set) {
    s = *p.digit_set;
  } else {
    const int n = digit_count(p);
    for (int i = 0; i < n; ++i) {
      s.push_back(static_cast<int>(std::lround(static_cast<double>(i) * p.m / n)) % p.m);
    }
  }
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw std::invalid_argument("digit set has repeated digits");
  for (int x : s) {
    if (x < 0 || x >= p.m) throw std::invalid_argument("digit " + std::to_string(x) + " outside [0, m)");
  }
  return s;
}

inline void validate(const CascadeParams& p) {
  if (p.d < 2 || p.d > 6) throw std::invalid_argument("d out of [2,6]");
  if (p.m < 2) throw std::invalid_argument("m must be at least 2");
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw std::invalid_argument("alpha out of (0,1]");
  if (p.levels < 1) throw std::invalid_argument("levels must be at least 1");
  if (p.digit_set && (p.digit_set->empty() || static_cast<int>(p.digit_set->size()) > p.m)) {
    throw std::invalid_argument("digit set size must be in [1, m]");
  }
  double resolution = 1.0;
  for (int j = 0; j < p.levels; ++j) resolution *= p.m;
  if (resolution > static_cast<double>(kMaxResolution)) throw std::invalid_argument("m^levels exceeds 2^62");
  base_digits(p);
}

struct CascadeLevel {
  int j = 0;
  std::uint64_t M = 1;
  Rational beta{1};
  std::vector<std::uint64_t> offsets;  // a means [a/M, (a+1)/M) is part of E_j

  double interval_length() const { return 1.0 / static_cast<double>(M); }

  bool has_offset(std::uint64_t a) const { return std::binary_search(offsets.begin(), offsets.end(), a); }
};

/// Exact mass beta_j * |intervals| / M_j.
inline Rational level_mass(const CascadeLevel& level) {
  return level.beta * Rational(level.offsets.size(), level.M);
}

namespace detail {

inline void check_refinement(const CascadeLevel& parent, const CascadeLevel& child, int m, std::size_t branching) {
  if (child.j != parent.j + 1 || child.M != parent.M * static_cast<std::uint64_t>(m)) {
    throw std::invalid_argument("level " + std::to_string(child.j) + " has wrong index or resolution");
  }
  if (child.offsets.size() != parent.offsets.size() * branching) {
    throw std::invalid_argument("level " + std::to_string(child.j) + " has wrong interval count");
  }
  for (std::size_t i = 0; i < child.offsets.size(); ++i) {
    if (i > 0 && child.offsets[i] <= child.offsets[i - 1]) {
      throw std::invalid_argument("level " + std::to_string(child.j) + " offsets not strictly increasing");
    }
    if (child.offsets[i] / m != parent.offsets[i / branching]) {
      throw std::invalid_argument("level " + std::to_string(child.j) + " breaks nesting");
    }
  }
}

}  // namespace detail

/// Draws the children of every interval of `parent`. The translation for the
/// interval at offset a comes from the stream keyed by (seed, parent.j, a).
inline CascadeLevel refine_level(const CascadeLevel& parent, int m, std::span<const int> digits, std::uint64_t seed) {
  const std::size_t branching = digits.size();
  CascadeLevel child;
  child.j = parent.j + 1;
  child.M = parent.M * static_cast<std::uint64_t>(m);
  child.beta = parent.beta * Rational(static_cast<std::uint64_t>(m), branching);
  child.offsets.resize(parent.offsets.size() * branching);
  parallel_for(parent.offsets.size(), [&](std::size_t i) {
    const std::uint64_t a = parent.offsets[i];
    KeyedStream stream(seed, {static_cast<std::uint64_t>(parent.j), a});
    const auto shift = static_cast<int>(stream.below(static_cast<std::uint64_t>(m)));
    int kids[64];
    std::vector<int> spill;
    int* out = kids;
    if (branching > 64) {
      spill.resize(branching);
      out = spill.data();
    }
    for (std::size_t s = 0; s < branching; ++s) out[s] = (digits[s] + shift) % m;
    std::sort(out, out + branching);
    for (std::size_t s = 0; s < branching; ++s) {
      child.offsets[i * branching + s] = a * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(out[s]);
    }
  });
  return child;
}

/// Immutable level hierarchy E_0 ⊇ E_1 ⊇ ... ⊇ E_n.
class CantorMeasure {
 public:
  CantorMeasure(CascadeParams params, std::vector<CascadeLevel> levels)
      : params_(std::move(params)), digits_(base_digits(params_)), levels_(std::move(levels)) {
    validate(params_);
    if (static_cast<int>(levels_.size()) != params_.levels + 1) throw std::invalid_argument("wrong number of levels");
    const auto& base = levels_.front();
    if (base.j != 0 || base.M != 1 || base.offsets != std::vector<std::uint64_t>{0} || !(base.beta == Rational(1))) {
      throw std::invalid_argument("level 0 must be the unit interval with density 1");
    }
    for (int j = 0; j < params_.levels; ++j) {
      detail::check_refinement(levels_[j], levels_[j + 1], params_.m, digits_.size());
      const Rational expected = levels_[j].beta * Rational(static_cast<std::uint64_t>(params_.m), digits_.size());
      if (!(levels_[j + 1].beta == expected)) throw std::invalid_argument("level density mismatch");
    }
  }

  const CascadeParams& params() const { return params_; }
  const std::vector<int>& digits() const { return digits_; }
  const std::vector<CascadeLevel>& levels() const { return levels_; }
  int top_level() const { return params_.levels; }
  int m() const { return params_.m; }
  int d() const { return params_.d; }
  double alpha_eff() const { return momentlab::alpha_eff(params_); }

  const CascadeLevel& level(int j) const {
    if (j < 0 || j > top_level()) throw std::out_of_range("level " + std::to_string(j) + " out of range");
    return levels_[j];
  }

  friend bool operator==(const CantorMeasure& a, const CantorMeasure& b) {
    if (a.digits_ != b.digits_ || a.levels_.size() != b.levels_.size()) return false;
    for (std::size_t j = 0; j < a.levels_.size(); ++j) {
      if (a.levels_[j].offsets != b.levels_[j].offsets || !(a.levels_[j].beta == b.levels_[j].beta)) return false;
    }
    return true;
  }

 private:
  CascadeParams params_;
  std::vector<int> digits_;
  std::vector<CascadeLevel> levels_;
};

inline CantorMeasure build_cascade(const CascadeParams& params) {
  validate(params);
  const std::vector<int> digits = base_digits(params);
  std::vector<CascadeLevel> levels;
  levels.reserve(params.levels + 1);
  levels.push_back(CascadeLevel{0, 1, Rational(1), {0}});
  for (int j = 0; j < params.levels; ++j) levels.push_back(refine_level(levels.back(), params.m, digits, params.seed));
  return CantorMeasure(params, std::move(levels));
}

/// Redraws level j+1 given level j from an independent stream.
inline CascadeLevel resample_children(const CantorMeasure& measure, int j, std::uint64_t seed2) {
  if (j < 0 || j >= measure.top_level()) throw std::out_of_range("resample level " + std::to_string(j) + " out of range");
  return refine_level(measure.level(j), measure.m(), measure.digits(), seed2);
}

/// beta_j * |E_j ∩ [lo, hi]|, from the sorted offsets by binary search.
inline double interval_mass(const CascadeLevel& level, double lo, double hi) {
  lo = std::max(lo, 0.0);
  hi = std::min(hi, 1.0);
  if (!(hi > lo)) return 0.0;
  const double M = static_cast<double>(level.M);
  const auto first = static_cast<std::uint64_t>(std::floor(lo * M));
  const auto last = std::min(static_cast<std::uint64_t>(std::ceil(hi * M)), level.M) - 1;
  const auto b = std::lower_bound(level.offsets.begin(), level.offsets.end(), first);
  const auto e = std::upper_bound(b, level.offsets.end(), last);
  const auto count = static_cast<std::size_t>(e - b);
  if (count == 0) return 0.0;
  auto overlap = [&](std::uint64_t a) {
    const double l = static_cast<double>(a) / M;
    const double r = static_cast<double>(a + 1) / M;
    return std::max(0.0, std::min(r, hi) - std::max(l, lo));
  };
  double length = overlap(*b);
  if (count > 1) length += overlap(*(e - 1)) + static_cast<double>(count - 2) / M;
  return level.beta.to_double() * length;
}

/// mu_j(B(t, r)) = beta_j * |E_j ∩ (t - r, t + r)|.
inline double ball_mass(const CascadeLevel& level, double t, double r) {
  if (!(r > 0.0)) return 0.0;
  return interval_mass(level, t - r, t + r);
}

/// Closures of maximal runs of adjacent intervals, in increasing order.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> interval_runs(const CascadeLevel& level) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> runs;  // [first offset, last offset + 1]
  for (std::uint64_t a : level.offsets) {
    if (!runs.empty() && runs.back().second == a) {
      runs.back().second = a + 1;
    } else {
      runs.emplace_back(a, a + 1);
    }
  }
  return runs;
}

/// Minimal number of closed intervals of length 2*eps covering the closure
/// of E_j (greedy left-to-right sweep, optimal in one dimension).
inline std::size_t covering_number(const CascadeLevel& level, double eps) {
  if (!(eps > 0.0)) throw std::domain_error("covering radius must be positive");
  const double M = static_cast<double>(level.M);
  const double width = 2.0 * eps;
  std::size_t count = 0;
  double covered = -std::numeric_limits<double>::infinity();
  for (const auto& [first, end] : interval_runs(level)) {
    const double l = static_cast<double>(first) / M;
    const double r = static_cast<double>(end) / M;
    if (r <= covered) continue;
    const double start = std::max(l, covered);
    auto balls = static_cast<std::size_t>(std::ceil((r - start) / width));
    if (balls > 1 && start + static_cast<double>(balls - 1) * width >= r) --balls;
    balls = std::max<std::size_t>(balls, 1);
    count += balls;
    covered = start + static_cast<double>(balls) * width;
  }
  return count;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Text form: header `d m alpha levels seed` (plus `digits:s0,s1,...` when an
/// explicit digit set was given), then `j M_j beta_num beta_den k offsets...`
/// for every level.
inline std::string serialize(const CantorMeasure& measure) {
  const auto& p = measure.params();
  std::string out = std::to_string(p.d) + ' ' + std::to_string(p.m) + ' ' + format_double(p.alpha) + ' ' +
                    std::to_string(p.levels) + ' ' + std::to_string(p.seed);
  if (p.digit_set) {
    out += " digits:";
    for (std::size_t i = 0; i < p.digit_set->size(); ++i) out += (i ? "," : "") + std::to_string((*p.digit_set)[i]);
  }
  out += '\n';
  for (const auto& level : measure.levels()) {
    out += std::to_string(level.j) + ' ' + std::to_string(level.M) + ' ' + std::to_string(level.beta.num()) + ' ' +
           std::to_string(level.beta.den()) + ' ' + std::to_string(level.offsets.size());
    for (std::uint64_t a : level.offsets) out += ' ' + std::to_string(a);
    out += '\n';
  }
  return out;
}

inline CantorMeasure deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) throw std::invalid_argument("empty cascade text");
  std::istringstream hs(header);
  CascadeParams p;
  std::string alpha_text;
  if (!(hs >> p.d >> p.m >> alpha_text >> p.levels >> p.seed)) throw std::invalid_argument("malformed cascade header");
  p.alpha = std::stod(alpha_text);
  std::string extra;
  if (hs >> extra) {
    if (extra.rfind("digits:", 0) != 0) throw std::invalid_argument("unexpected header token '" + extra + "'");
    std::vector<int> digits;
    std::istringstream ds(extra.substr(7));
    std::string tok;
    while (std::getline(ds, tok, ',')) digits.push_back(std::stoi(tok));
    p.digit_set = std::move(digits);
  }
  validate(p);
  std::vector<CascadeLevel> levels;
  for (int j = 0; j <= p.levels; ++j) {
    CascadeLevel level;
    std::uint64_t num = 0, den = 0, count = 0;
    if (!(in >> level.j >> level.M >> num >> den >> count)) {
      throw std::invalid_argument("malformed level line " + std::to_string(j));
    }
    level.beta = Rational(num, den);
    if (level.beta.num() != num || level.beta.den() != den) throw std::invalid_argument("density not in lowest terms");
    level.offsets.resize(count);
    for (auto& a : level.offsets) {
      if (!(in >> a)) throw std::invalid_argument("truncated offsets at level " + std::to_string(j));
      if (a >= level.M) throw std::invalid_argument("offset out of range at level " + std::to_string(j));
    }
    levels.push_back(std::move(level));
  }
  return CantorMeasure(std::move(p), std::move(levels));
}

}  // namespace momentlab
