#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace momentlab::cli {

namespace {

enum class Kind { integer, unsigned_integer, real, text, integer_list, real_list, vector_list };

struct KeySpec {
  std::string section;
  std::string key;
  Kind kind;
  std::optional<std::string> fallback;  // nullopt: required (or optional without default, see `optional`)
  bool optional = false;
};

// keys without a fallback are either required (cascade/run core) or
// optional-with-no-default (flagged)
const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> s = {
      {"run", "subcommand", Kind::text, std::nullopt},
      {"run", "out", Kind::text, std::nullopt, true},
      {"run", "threads", Kind::integer, "0"},
      {"cascade", "d", Kind::integer, std::nullopt},
      {"cascade", "m", Kind::integer, std::nullopt},
      {"cascade", "alpha", Kind::real, std::nullopt},
      {"cascade", "levels", Kind::integer, std::nullopt},
      {"cascade", "seed", Kind::unsigned_integer, std::nullopt},
      {"cascade", "digits", Kind::integer_list, std::nullopt, true},
      {"transform", "level", Kind::integer, std::nullopt, true},
      {"transform", "xi", Kind::vector_list, std::nullopt, true},
      {"transform", "count", Kind::integer, "16"},
      {"transform", "radius", Kind::real, "100"},
      {"transform", "tol", Kind::real, "1e-10"},
      {"decay", "level", Kind::integer, std::nullopt, true},
      {"decay", "r_min", Kind::real, "16"},
      {"decay", "r_max", Kind::real, "16384"},
      {"decay", "annuli", Kind::integer, "11"},
      {"decay", "samples", Kind::integer, "512"},
      {"decay", "tol", Kind::real, "1e-10"},
      {"lp", "level", Kind::integer, std::nullopt, true},
      {"lp", "p", Kind::real_list, "4,8,12"},
      {"lp", "r_min", Kind::real, "256"},
      {"lp", "r_max", Kind::real, "16384"},
      {"lp", "samples", Kind::integer, "512"},
      {"lp", "tol", Kind::real, "1e-10"},
      {"knapp", "p", Kind::real, "10"},
      {"knapp", "q", Kind::real, "2"},
      {"knapp", "levels", Kind::integer_list, std::nullopt, true},
      {"knapp", "dual_scale", Kind::real, "0.01"},
      {"knapp", "samples", Kind::integer, "64"},
      {"knapp", "tol", Kind::real, "1e-10"},
      {"omega", "level", Kind::integer, "2"},
      {"omega", "s1_max", Kind::integer, "3"},
      {"omega", "s2_max", Kind::integer, "4"},
      {"omega", "variant", Kind::text, std::nullopt, true},
      {"omega", "samples", Kind::integer, "20000"},
      {"omega", "eps", Kind::real, "0.1"},
      {"omega", "members", Kind::integer, "20"},
      {"omega", "tol", Kind::real, "1e-10"},
      {"concentrate", "level", Kind::integer, std::nullopt, true},
      {"concentrate", "trials", Kind::integer, "1000"},
      {"concentrate", "xi", Kind::vector_list, std::nullopt, true},
      {"concentrate", "count", Kind::integer, "4"},
      {"concentrate", "radius", Kind::real, "100"},
      {"concentrate", "tol", Kind::real, "1e-10"},
      {"report", "inputs", Kind::text, std::nullopt, true},
  };
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream in(s);
  while (std::getline(in, tok, sep)) out.push_back(trim(tok));
  return out;
}

double parse_real(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

long long parse_integer(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

std::uint64_t parse_unsigned(const std::string& s) {
  if (s.empty() || s[0] == '-') throw std::invalid_argument("negative");
  std::size_t used = 0;
  const unsigned long long v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

void check_kind(Kind kind, const std::string& value) {
  switch (kind) {
    case Kind::integer: parse_integer(value); break;
    case Kind::unsigned_integer: parse_unsigned(value); break;
    case Kind::real: parse_real(value); break;
    case Kind::text:
      if (value.empty()) throw std::invalid_argument("empty");
      break;
    case Kind::integer_list:
      for (const auto& t : split(value, ',')) parse_integer(t);
      break;
    case Kind::real_list:
      for (const auto& t : split(value, ',')) parse_real(t);
      break;
    case Kind::vector_list:
      for (const auto& v : split(value, ';')) {
        for (const auto& t : split(v, ',')) parse_real(t);
      }
      break;
  }
}

std::string kind_name(Kind kind) {
  switch (kind) {
    case Kind::integer: return "an integer";
    case Kind::unsigned_integer: return "a non-negative integer";
    case Kind::real: return "a number";
    case Kind::text: return "a nonempty string";
    case Kind::integer_list: return "a comma-separated integer list";
    case Kind::real_list: return "a comma-separated number list";
    case Kind::vector_list: return "vectors separated by ';'";
  }
  return "?";
}

const std::set<std::string> kRootSections = {"run", "cascade"};

}  // namespace

const std::vector<std::string>& valid_subcommands() {
  static const std::vector<std::string> s = {"build", "transform", "decay", "lp", "knapp", "omega", "concentrate", "report"};
  return s;
}

long long RunConfig::integer(const std::string& key) const { return parse_integer(values.at(key)); }
double RunConfig::real(const std::string& key) const { return parse_real(values.at(key)); }

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& t : split(values.at(key), ',')) out.push_back(parse_real(t));
  return out;
}

std::vector<int> RunConfig::integers(const std::string& key) const {
  std::vector<int> out;
  for (const auto& t : split(values.at(key), ',')) out.push_back(static_cast<int>(parse_integer(t)));
  return out;
}

std::vector<Vector> RunConfig::vectors(const std::string& key) const {
  std::vector<Vector> out;
  for (const auto& v : split(values.at(key), ';')) {
    const auto parts = split(v, ',');
    Vector x(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) x[static_cast<Eigen::Index>(i)] = parse_real(parts[i]);
    out.push_back(std::move(x));
  }
  return out;
}

namespace {

// Range checks that need the whole config; appends to errors.
void validate_ranges(const RunConfig& c, std::vector<std::string>& errors) {
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  const auto& sub = c.subcommand;
  need(c.integer("run.threads") >= 0, "threads must be non-negative");
  if (sub == "report") {
    need(c.values.count("report.inputs") > 0, "missing required key 'report.inputs'");
    return;
  }
  const auto& cp = c.cascade;
  const std::size_t before = errors.size();
  need(cp.d >= 2 && cp.d <= 6, "d out of [2,6]");
  need(cp.m >= 2, "m must be at least 2");
  need(cp.alpha > 0.0 && cp.alpha <= 1.0, "alpha out of (0,1]");
  need(cp.levels >= 1, "levels must be at least 1");
  if (errors.size() != before) return;
  try {
    validate(cp);
  } catch (const std::exception& e) {
    errors.push_back(e.what());
    return;
  }
  const int top = c.cascade.levels;
  const int d = c.cascade.d;
  auto level_ok = [&](const std::string& key, int lo, int hi) {
    if (!c.values.count(key)) return;
    const auto v = c.integer(key);
    need(v >= lo && v <= hi, key + " out of [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
  };
  auto positive = [&](const std::string& key) { need(c.real(key) > 0.0, key + " must be positive"); };
  auto vectors_ok = [&](const std::string& key) {
    if (!c.values.count(key)) return;
    for (const auto& v : c.vectors(key)) need(v.size() == d, key + " vectors must have d components");
  };
  level_ok("transform.level", 0, top);
  positive("transform.tol");
  need(c.integer("transform.count") >= 1, "transform.count must be at least 1");
  need(c.real("transform.radius") >= 0.0, "transform.radius must be non-negative");
  vectors_ok("transform.xi");

  level_ok("decay.level", 0, top);
  need(c.real("decay.r_min") >= 1.0 && c.real("decay.r_max") > c.real("decay.r_min"), "decay needs 1 <= r_min < r_max");
  need(c.integer("decay.annuli") >= 2, "decay.annuli must be at least 2");
  need(c.integer("decay.samples") >= 1, "decay.samples must be at least 1");
  positive("decay.tol");

  level_ok("lp.level", 0, top);
  for (double p : c.reals("lp.p")) need(p >= 1.0, "lp.p entries must be at least 1");
  need(c.real("lp.r_min") >= 1.0 && c.real("lp.r_max") >= c.real("lp.r_min"), "lp needs 1 <= r_min <= r_max");
  need(c.integer("lp.samples") >= 1, "lp.samples must be at least 1");
  positive("lp.tol");

  need(c.real("knapp.p") >= 1.0 && c.real("knapp.q") >= 1.0, "knapp.p and knapp.q must be at least 1");
  need(c.real("knapp.dual_scale") > 0.0 && c.real("knapp.dual_scale") <= 1.0, "knapp.dual_scale out of (0,1]");
  need(c.integer("knapp.samples") >= 1, "knapp.samples must be at least 1");
  if (c.values.count("knapp.levels")) {
    for (int k : c.integers("knapp.levels")) need(k >= 1 && k <= top, "knapp.levels entries out of [1,levels]");
  }
  positive("knapp.tol");

  level_ok("omega.level", 1, top);
  need(c.integer("omega.s1_max") >= 0 && c.integer("omega.s2_max") >= 0, "omega grid bounds must be non-negative");
  need(c.integer("omega.samples") >= 1, "omega.samples must be at least 1");
  need(c.real("omega.eps") >= 0.0, "omega.eps must be non-negative");
  need(c.integer("omega.members") >= 0, "omega.members must be non-negative");
  positive("omega.tol");
  if (c.values.count("omega.variant")) {
    const auto& v = c.text("omega.variant");
    if (v != "general" && v != "d3") {
      errors.push_back("omega.variant must be general or d3");
    } else {
      need(v == "d3" ? d == 3 : d >= 4, "omega.variant " + v + (v == "d3" ? " requires d = 3" : " requires d >= 4"));
    }
  }

  level_ok("concentrate.level", 0, top - 1);
  need(c.integer("concentrate.trials") >= 100, "concentrate.trials must be at least 100");
  need(c.integer("concentrate.count") >= 1, "concentrate.count must be at least 1");
  need(c.real("concentrate.radius") >= 0.0, "concentrate.radius must be non-negative");
  vectors_ok("concentrate.xi");
  positive("concentrate.tol");
}

}  // namespace

ParseResult parse_config(std::string_view text) {
  ParseResult result;
  auto& errors = result.errors;
  std::map<std::string, std::string> raw;
  std::map<std::string, std::size_t> first_line;
  std::set<std::string> sections;
  for (const auto& s : schema()) sections.insert(s.section);

  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') {
        errors.push_back(where + "malformed section header '" + t + "'");
        continue;
      }
      section = trim(t.substr(1, t.size() - 2));
      if (!sections.count(section)) errors.push_back(where + "unknown section '" + section + "'");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    std::string full;
    if (section.empty()) {
      for (const auto& s : schema()) {
        if (kRootSections.count(s.section) && s.key == key) full = s.section + "." + key;
      }
      if (full.empty()) {
        errors.push_back(where + "unknown key '" + key + "'");
        continue;
      }
    } else {
      full = section + "." + key;
      const bool known = std::any_of(schema().begin(), schema().end(),
                                     [&](const KeySpec& s) { return s.section == section && s.key == key; });
      if (!known) {
        errors.push_back(where + "unknown key '" + key + "' in [" + section + "]");
        continue;
      }
    }
    if (raw.count(full)) {
      errors.push_back(where + "duplicate key '" + key + "' (first set on line " + std::to_string(first_line[full]) + ")");
      continue;
    }
    raw[full] = value;
    first_line[full] = lineno;
  }

  RunConfig c;
  const bool report = raw.count("run.subcommand") && raw["run.subcommand"] == "report";
  for (const auto& s : schema()) {
    const std::string full = s.section + "." + s.key;
    auto it = raw.find(full);
    if (it == raw.end()) {
      if (s.fallback) {
        c.values[full] = *s.fallback;
      } else if (!s.optional && !(report && s.section == "cascade")) {
        errors.push_back("missing required key '" + s.key + "'");
      }
      continue;
    }
    try {
      check_kind(s.kind, it->second);
      c.values[full] = it->second;
    } catch (const std::exception&) {
      errors.push_back("key '" + s.key + "' must be " + kind_name(s.kind) + ", got '" + it->second + "'");
    }
  }

  if (c.values.count("run.subcommand")) {
    c.subcommand = c.values["run.subcommand"];
    const auto& subs = valid_subcommands();
    if (std::find(subs.begin(), subs.end(), c.subcommand) == subs.end()) {
      std::string list;
      for (const auto& s : subs) list += (list.empty() ? "" : ", ") + s;
      errors.push_back("unknown subcommand '" + c.subcommand + "' (valid: " + list + ")");
    }
  }
  if (!errors.empty()) return result;

  if (c.values.count("run.out")) c.out_dir = c.values["run.out"];
  c.threads = static_cast<unsigned>(std::max<long long>(0, c.integer("run.threads")));
  if (c.subcommand != "report") {
    c.cascade.d = static_cast<int>(c.integer("cascade.d"));
    c.cascade.m = static_cast<int>(c.integer("cascade.m"));
    c.cascade.alpha = c.real("cascade.alpha");
    c.cascade.levels = static_cast<int>(c.integer("cascade.levels"));
    c.cascade.seed = parse_unsigned(c.values["cascade.seed"]);
    if (c.values.count("cascade.digits")) c.cascade.digit_set = c.integers("cascade.digits");
  }
  validate_ranges(c, errors);
  if (errors.empty()) result.config = std::move(c);
  return result;
}

void override_seed(RunConfig& config, std::uint64_t seed) {
  config.cascade.seed = seed;
  config.values["cascade.seed"] = std::to_string(seed);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string to_csv(const std::vector<ScanRow>& rows) {
  if (rows.empty()) return {};
  std::string out;
  const auto& head = rows.front().fields();
  for (std::size_t i = 0; i < head.size(); ++i) out += (i ? "," : "") + head[i].first;
  out += '\n';
  for (const auto& row : rows) {
    const auto& f = row.fields();
    if (f.size() != head.size()) throw std::logic_error("CSV rows have different columns");
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i].first != head[i].first) throw std::logic_error("CSV rows have different columns");
      out += (i ? "," : "") + format_double(f[i].second);
    }
    out += '\n';
  }
  return out;
}

namespace {

int level_or(const RunConfig& c, const std::string& key, int fallback) {
  return c.values.count(key) ? static_cast<int>(c.integer(key)) : fallback;
}

// Explicit vectors, or `count` deterministic draws of norm <= radius.
std::vector<Vector> frequencies(const RunConfig& c, const std::string& section) {
  if (c.values.count(section + ".xi")) return c.vectors(section + ".xi");
  std::vector<Vector> out;
  const auto count = static_cast<std::uint64_t>(c.integer(section + ".count"));
  const double radius = c.real(section + ".radius");
  for (std::uint64_t i = 0; i < count; ++i) {
    KeyedStream stream(c.cascade.seed, {0x66726571ULL, i});
    out.push_back(sample_shell(c.cascade.d, 0.0, std::max(radius, 0.0), stream));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outputs report(const RunConfig& c) {
  std::vector<ScanRow> rows;
  std::vector<std::string> names;
  for (const auto& path : split(c.text("report.inputs"), ',')) {
    std::istringstream in(read_file(path));
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error(path + " is empty");
    const auto cols = split(header, ',');
    std::vector<std::vector<double>> data(cols.size());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split(line, ',');
      if (cells.size() != cols.size()) throw std::runtime_error(path + ": ragged row");
      for (std::size_t i = 0; i < cells.size(); ++i) data[i].push_back(parse_real(cells[i]));
    }
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto& v = data[i];
      ScanRow row;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      CompensatedSum<double> sum;
      std::size_t n = 0;
      for (double x : v) {
        if (std::isnan(x)) continue;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        sum.add(x);
        ++n;
      }
      row.set("count", static_cast<double>(n)).set("min", n ? lo : NAN).set("max", n ? hi : NAN);
      row.set("mean", n ? sum.value() / static_cast<double>(n) : NAN);
      rows.push_back(std::move(row));
      names.push_back(std::filesystem::path(path).filename().string() + "," + cols[i]);
    }
  }
  std::string out = "file,column,count,min,max,mean\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += names[r];
    for (const auto& [k, v] : rows[r].fields()) out += "," + format_double(v);
    out += '\n';
  }
  return {{"report.csv", out}};
}

}  // namespace

Outputs compute(const RunConfig& c) {
  const auto& sub = c.subcommand;
  if (sub == "report") return report(c);

  const CantorMeasure measure = build_cascade(c.cascade);
  const int top = measure.top_level();
  const int d = measure.d();
  const std::string seed_text = std::to_string(c.cascade.seed);

  if (sub == "build") return {{"cascade.txt", serialize(measure)}};

  if (sub == "transform") {
    const int j = level_or(c, "transform.level", top);
    const double tol = c.real("transform.tol");
    const auto xs = frequencies(c, "transform");
    std::vector<IntegralValue> vals(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { vals[i] = nu_hat(measure, j, xs[i], tol); });
    std::vector<ScanRow> rows;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ScanRow row;
      row.set("level", j);
      for (int k = 0; k < d; ++k) row.set("xi_" + std::to_string(k + 1), xs[i][k]);
      row.set("re", vals[i].value.real()).set("im", vals[i].value.imag()).set("abs", std::abs(vals[i].value));
      row.set("err", vals[i].err);
      rows.push_back(std::move(row));
    }
    return {{"transform.csv", to_csv(rows)}};
  }

  if (sub == "decay") {
    const int j = level_or(c, "decay.level", top);
    const auto samples = static_cast<int>(c.integer("decay.samples"));
    const DecayFit fit = decay_fit(measure, j, c.real("decay.r_min"), c.real("decay.r_max"),
                                   static_cast<int>(c.integer("decay.annuli")), samples, c.cascade.seed,
                                   c.real("decay.tol"));
    std::string csv = "R,sup_abs,samples,seed\n";
    for (const auto& [R, sup] : fit.annuli) {
      csv += format_double(R) + "," + format_double(sup) + "," + std::to_string(samples) + "," + seed_text + "\n";
    }
    std::string summary = "exponent=" + format_double(fit.exponent) + " intercept=" + format_double(fit.intercept) +
                          " residual=" + format_double(fit.residual) + " level=" + std::to_string(j) +
                          " alpha_eff=" + format_double(measure.alpha_eff()) + "\n";
    return {{"decay.csv", csv}, {"decay_fit.txt", summary}};
  }

  if (sub == "lp") {
    const int j = level_or(c, "lp.level", top);
    std::vector<double> radii;
    for (double r = c.real("lp.r_min"); r <= c.real("lp.r_max") * (1.0 + 1e-12); r *= 2.0) radii.push_back(r);
    const auto rows = lp_convergence_scan(measure, j, c.reals("lp.p"), radii, static_cast<int>(c.integer("lp.samples")),
                                          c.cascade.seed, c.real("lp.tol"));
    return {{"lp.csv", to_csv(rows)}};
  }

  if (sub == "knapp") {
    std::vector<int> levels;
    if (c.values.count("knapp.levels")) {
      levels = c.integers("knapp.levels");
    } else {
      for (int k = 1; k <= std::max(1, top - 2); ++k) levels.push_back(k);
    }
    const auto rows = knapp_experiment(measure, c.real("knapp.p"), c.real("knapp.q"), levels, c.real("knapp.dual_scale"),
                                       static_cast<int>(c.integer("knapp.samples")), c.cascade.seed, c.real("knapp.tol"));
    return {{"knapp.csv", to_csv(rows)}};
  }

  if (sub == "omega") {
    const CellVariant variant = c.values.count("omega.variant") ? parse_variant(c.text("omega.variant"))
                                                                : (d == 3 ? CellVariant::d3 : CellVariant::general);
    if (variant == CellVariant::general && d < 4) throw std::invalid_argument("general cell variant requires d >= 4");
    const auto rows = omega_scan(measure, static_cast<int>(c.integer("omega.level")),
                                 static_cast<int>(c.integer("omega.s1_max")), static_cast<int>(c.integer("omega.s2_max")),
                                 variant, static_cast<std::size_t>(c.integer("omega.samples")), c.real("omega.eps"),
                                 c.cascade.seed, static_cast<std::size_t>(c.integer("omega.members")), c.real("omega.tol"));
    return {{"omega.csv", to_csv(rows)}};
  }

  if (sub == "concentrate") {
    const int j = level_or(c, "concentrate.level", top - 1);
    std::vector<ScanRow> rows;
    std::uint64_t i = 0;
    for (const auto& xi : frequencies(c, "concentrate")) {
      rows.push_back(concentration_check(measure, j, xi, static_cast<int>(c.integer("concentrate.trials")),
                                         mix64(c.cascade.seed + i++), c.real("concentrate.tol")));
    }
    return {{"concentration.csv", to_csv(rows)}};
  }

  throw std::invalid_argument("unknown subcommand '" + sub + "'");
}

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& payload) {
  const auto tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << payload;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

int run(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  try {
    if (config.threads) set_thread_count(config.threads);
    const Outputs outputs = compute(config);
    std::filesystem::create_directories(out_dir);
    nlohmann::ordered_json manifest;
    manifest["subcommand"] = config.subcommand;
    nlohmann::ordered_json echo = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config.values) echo[k] = v;
    manifest["config"] = echo;
    manifest["version"] = kVersion;
    nlohmann::ordered_json digests = nlohmann::ordered_json::object();
    for (const auto& [name, payload] : outputs) {
      write_atomic(out_dir / name, payload);
      digests[name] = "sha256:" + sha256_hex(payload);
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    manifest["duration_seconds"] = elapsed.count();
    manifest["outputs"] = digests;
    write_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    err << "momentlab " << config.subcommand << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace momentlab::cli
