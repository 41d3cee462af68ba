// Acceptance run: one PASS/FAIL line per criterion. Optional arguments pick
// a subset, e.g. `acceptance 3 11`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "momentlab/momentlab.hpp"
#include "support/oracles.hpp"

using namespace momentlab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

CantorMeasure cascade(int d, int levels, std::uint64_t seed) {
  CascadeParams p;
  p.d = d;
  p.m = 4;
  p.alpha = 0.5;
  p.levels = levels;
  p.seed = seed;
  return build_cascade(p);
}

Vector random_xi(KeyedStream& rng, int d, double scale) {
  Vector xi(d);
  for (int i = 0; i < d; ++i) xi[i] = rng.uniform(-scale, scale);
  return xi;
}

// 1. quadrature vs a 2^22-node corrected trapezoid
Verdict quadrature_oracle() {
  KeyedStream rng(101, {});
  double worst = 0.0;
  int fails = 0;
  for (int i = 0; i < 1000; ++i) {
    const int d = 2 + static_cast<int>(rng.below(3));
    const Vector xi = random_xi(rng, d, 1e4);
    double a = rng.uniform(), b = rng.uniform();
    if (a > b) std::swap(a, b);
    const auto ref = oracle::trapezoid_em(xi, a, b, std::int64_t{1} << 22);
    const auto got = osc_integral(xi, {a, b}, 1e-12).value;
    const double rel = std::abs(got - ref) / std::abs(ref);
    worst = std::max(worst, rel);
    if (!(rel <= 1e-6)) ++fails;
  }
  return {fails == 0, fmt("worst relative error %.3g, %d failures of 1000", worst, fails)};
}

// 2. |osc_integral| <= 30 vdc_bound
Verdict vdc_domination() {
  KeyedStream rng(102, {});
  double worst = 0.0;
  for (int d : {2, 3}) {
    for (int i = 0; i < 10000; ++i) {
      const Vector xi = random_xi(rng, d, std::pow(10.0, rng.uniform(0, 4)));
      double a = rng.uniform(), b = rng.uniform();
      if (a > b) std::swap(a, b);
      const double v = std::abs(osc_integral(xi, {a, b}, 1e-10).value);
      const double bound = vdc_bound(xi, {a, b});
      if (bound > 0) worst = std::max(worst, v / bound);
    }
  }
  return {worst <= 30.0, fmt("max |integral| / vdc_bound = %.4g", worst)};
}

// 3. exact cascade structure
Verdict cascade_exactness() {
  const CantorMeasure mu = cascade(2, 10, 103);
  bool ok = true;
  std::string why;
  for (int j = 0; j <= 10; ++j) {
    const auto& l = mu.level(j);
    if (level_mass(l) != Rational(1)) ok = false, why += fmt(" mass@%d", j);
    if (covering_number(l, 1.0 / static_cast<double>(l.M)) != (std::uint64_t{1} << j)) ok = false, why += fmt(" N@%d", j);
    if (j == 0) continue;
    const auto& parent = mu.level(j - 1);
    std::map<std::uint64_t, int> kids;
    for (std::uint64_t a : l.offsets) {
      if (!parent.has_offset(a / 4)) ok = false, why += fmt(" nest@%d", j);
      ++kids[a / 4];
    }
    for (const auto& [p, n] : kids) {
      if (n != 2) ok = false, why += fmt(" branch@%d", j);
    }
    if (kids.size() != parent.offsets.size()) ok = false, why += fmt(" orphan@%d", j);
  }
  const auto& top = mu.level(10);
  const double ratio = std::log(static_cast<double>(covering_number(top, 1.0 / static_cast<double>(top.M)))) /
                       std::log(static_cast<double>(top.M));
  if (std::abs(ratio - 0.5) > 0.05) ok = false;
  return {ok, fmt("log N / log M_10 = %.6f", ratio) + why};
}

// 4. empirical mean of the resampled next level against the current level
Verdict martingale() {
  const CantorMeasure mu = cascade(2, 6, 104);
  KeyedStream rng(104, {});
  const int trials = 4000;
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    Vector xi = random_xi(rng, 2, 1.0);
    xi *= rng.uniform(0, 1e3) / xi.norm();
    const PhasePolynomial phase(xi);
    const std::complex<double> base = nu_hat(mu.level(5), phase).value;
    std::vector<std::complex<double>> v(trials);
    parallel_for(v.size(), [&](std::size_t t) {
      v[t] = nu_hat(resample_children(mu, 5, mix64(0x6d617274 + 1000 * i + t)), phase).value;
    });
    std::complex<double> mean = 0.0;
    for (const auto& z : v) mean += z;
    mean /= static_cast<double>(trials);
    double vre = 0.0, vim = 0.0;
    for (const auto& z : v) {
      vre += std::pow(z.real() - mean.real(), 2);
      vim += std::pow(z.imag() - mean.imag(), 2);
    }
    const double se_re = std::sqrt(vre / (trials - 1) / trials), se_im = std::sqrt(vim / (trials - 1) / trials);
    const double zre = se_re > 0 ? std::abs(mean.real() - base.real()) / se_re : 0.0;
    const double zim = se_im > 0 ? std::abs(mean.imag() - base.imag()) / se_im : 0.0;
    worst = std::max({worst, zre, zim});
  }
  return {worst <= 4.0, fmt("max |mean - nu_j^| / se = %.3f", worst)};
}

// 5. level 0 (Lebesgue arc), d = 2
Verdict stationary_phase() {
  const CantorMeasure mu = cascade(2, 1, 105);
  const DecayFit f = decay_fit(mu, 0, 16, 16384, 11, 512, 105);
  return {std::abs(f.exponent + 0.5) <= 0.1, fmt("exponent %.4f", f.exponent)};
}

// 6. cascade decay at j = 10
Verdict cascade_decay() {
  const CantorMeasure mu = cascade(2, 10, 106);
  const DecayFit f = decay_fit(mu, 10, 16, 16384, 11, 512, 106);
  return {f.exponent >= -0.35 && f.exponent <= -0.15, fmt("exponent %.4f", f.exponent)};
}

// 7. per-annulus L^p contributions either side of p_alpha = 8
Verdict lp_threshold() {
  const CantorMeasure mu = cascade(2, 10, 107);
  std::vector<double> radii;
  for (int k = 8; k <= 14; ++k) radii.push_back(std::ldexp(1.0, k));
  const auto rows = lp_convergence_scan(mu, 10, {4, 12}, radii, 512, 107);
  double s4 = NAN, s12 = NAN;
  for (const auto& r : rows) (r.get("p") == 4 ? s4 : s12) = r.get("slope");
  return {s12 <= -0.3 && s4 >= 0.3, fmt("slope p=4: %.3f, p=12: %.3f", s4, s12)};
}

// 8. Knapp scaling and phase coherence
Verdict knapp() {
  const CantorMeasure mu = cascade(2, 8, 108);
  const auto rows = knapp_experiment(mu, 10, 2, {3, 4, 5, 6, 7, 8}, 0.01, 64, 108);
  double coherence = 1.0;
  for (const auto& r : rows) coherence = std::min(coherence, r.get("coherence"));
  const double slope = rows.front().get("slope"), expected = rows.front().get("expected_slope");
  return {std::abs(slope - expected) <= 0.3 && coherence == 1.0,
          fmt("slope %.4f (expected %.1f), min coherence %.3f", slope, expected, coherence)};
}

std::vector<ScanRow> omega_rows() {
  static const std::vector<ScanRow> rows = [] {
    const CantorMeasure mu = cascade(3, 2, 109);
    return omega_scan(mu, 2, 3, 4, CellVariant::d3, 20000, 0.1, 109, 20);
  }();
  return rows;
}

// 9. Omega volumes, plus the union estimator on known boxes
Verdict omega_volume() {
  double worst = 0.0;
  int cells = 0, empty = 0;
  for (const auto& r : omega_rows()) {
    ++cells;
    empty += r.get("empty") != 0.0;
    worst = std::max(worst, r.get("ratio"));
  }
  const Parallelotope a(Matrix::Identity(2, 2), (Vector(2) << 1, 0.5).finished(), (Vector(2) << 1, 0.5).finished());
  const Parallelotope b(Matrix::Identity(2, 2), (Vector(2) << 2, 0.5).finished(), (Vector(2) << 1, 0.5).finished());
  const UnionEstimate e = estimate_union_volume({a, b}, [](const Vector& x) { return x[0] < 1.5; }, 100000, 109);
  const bool synthetic = std::abs(e.union_volume - 3.0) <= 3 * e.union_std_error && std::abs(e.estimate - 1.5) <= 3 * e.std_error;
  return {cells == 20 && worst <= 100.0 && synthetic,
          fmt("%d cells (%d empty), max ratio %.4g; synthetic union %.4f +- %.4f, subset %.4f +- %.4f", cells, empty,
              worst, e.union_volume, e.union_std_error, e.estimate, e.std_error)};
}

// 10. increment square sums on sampled Omega-tilde members
Verdict increment_bound() {
  double worst = 0.0;
  int nonempty = 0, short_cells = 0;
  for (const auto& r : omega_rows()) {
    if (r.get("members") == 0) continue;
    ++nonempty;
    short_cells += r.get("members") < 20;
    worst = std::max(worst, r.get("sq_ratio"));
  }
  return {worst <= 100.0, fmt("%d cells with members (%d with fewer than 20), max sq_sum / c_bound = %.4g", nonempty,
                              short_cells, worst)};
}

// 11. exact thresholds
Verdict thresholds() {
  bool ok = p_alpha(3, 1) == 7 && p_alpha(2, 1) == 4 && restriction_boundary(2, 1, INFINITY) == 3;
  for (int d = 3; d <= 6; ++d) ok = ok && p_alpha(d, 1) == (d * d + d + 2) / 2.0;
  return {ok, ""};
}

// 12. every subcommand twice, byte for byte
Verdict determinism() {
  const std::string base = "d = 2\nm = 4\nalpha = 0.5\nlevels = 6\nseed = 112\n";
  const fs::path root = fs::temp_directory_path() / "momentlab_acceptance_12";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> configs = {
      {"build", base},
      {"transform", base + "[transform]\ncount = 8\n"},
      {"decay", base + "[decay]\nr_max = 256\nannuli = 3\nsamples = 16\n"},
      {"lp", base + "[lp]\nr_max = 1024\nsamples = 16\n"},
      {"knapp", base + "[knapp]\nlevels = 2, 3, 4\nsamples = 8\n"},
      {"omega", "d = 3\nm = 4\nalpha = 0.5\nlevels = 3\nseed = 112\n[omega]\ns1_max = 1\ns2_max = 1\nsamples = 500\nmembers = 3\n"},
      {"concentrate", base + "[concentrate]\ntrials = 100\ncount = 2\n"},
      {"report", "[report]\ninputs = " + (root / "decay_0" / "decay.csv").string() + "\n"},
  };
  std::string bad;
  for (const auto& [sub, text] : configs) {
    std::string payload[2];
    for (int rep = 0; rep < 2; ++rep) {
      const auto parsed = cli::parse_config("subcommand = " + sub + "\n" + text);
      if (!parsed.config) {
        bad += " " + sub + "(config: " + parsed.errors.front() + ")";
        break;
      }
      const fs::path dir = root / (sub + "_" + std::to_string(rep));
      std::ostringstream err;
      if (cli::run(*parsed.config, dir, err) != 0) {
        bad += " " + sub + "(" + err.str() + ")";
        break;
      }
      std::set<fs::path> files;
      for (const auto& f : fs::directory_iterator(dir)) {
        if (f.path().filename() != "manifest.json") files.insert(f.path());
      }
      for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        payload[rep] += f.filename().string() + "\n" + std::string(std::istreambuf_iterator<char>(in), {});
      }
    }
    if (payload[0].empty() || payload[0] != payload[1]) bad += " " + sub;
  }
  fs::remove_all(root);
  return {bad.empty(), bad.empty() ? "all 8 subcommands identical" : "differing:" + bad};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, quadrature_oracle}, {2, vdc_domination},  {3, cascade_exactness}, {4, martingale},
      {5, stationary_phase},  {6, cascade_decay},   {7, lp_threshold},      {8, knapp},
      {9, omega_volume},      {10, increment_bound}, {11, thresholds},      {12, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  %s  [%.1fs]\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
