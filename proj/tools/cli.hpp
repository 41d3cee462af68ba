#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "momentlab/momentlab.hpp"

namespace momentlab::cli {

const std::vector<std::string>& valid_subcommands();

struct RunConfig {
  std::string subcommand;
  CascadeParams cascade;
  std::string out_dir;  // empty when not given
  unsigned threads = 0;
  // every accepted key as "section.key" -> value text, defaults included
  std::map<std::string, std::string> values;

  const std::string& text(const std::string& key) const { return values.at(key); }
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<int> integers(const std::string& key) const;
  std::vector<Vector> vectors(const std::string& key) const;
};

struct ParseResult {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;
};

/// Flat `key = value` text with optional `[section]` headers and `#` comments.
/// Collects every error rather than stopping at the first.
ParseResult parse_config(std::string_view text);

/// Applies a seed override and re-validates.
void override_seed(RunConfig& config, std::uint64_t seed);

/// Output files in emission order, name -> payload.
using Outputs = std::vector<std::pair<std::string, std::string>>;

/// Runs the subcommand in memory; throws on failure.
Outputs compute(const RunConfig& config);

/// compute + atomic file writes + manifest.json. Returns the exit status and
/// prints a one-line diagnostic on failure.
int run(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& err);

std::string sha256_hex(std::string_view data);
std::string to_csv(const std::vector<ScanRow>& rows);

}  // namespace momentlab::cli
