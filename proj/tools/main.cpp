#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cli.hpp"

int main(int argc, char** argv) {
  using namespace momentlab::cli;
  CLI::App app{"momentlab: random Cantor measures on the moment curve"};
  std::string subcommand, config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  app.add_option("subcommand", subcommand, "build|transform|decay|lp|knapp|omega|concentrate|report")->required();
  app.add_option("--config", config_path, "config file")->required();
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "cascade seed override");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (0 = all cores)");
  CLI11_PARSE(app, argc, argv);

  const auto& subs = valid_subcommands();
  if (std::find(subs.begin(), subs.end(), subcommand) == subs.end()) {
    std::string list;
    for (const auto& s : subs) list += (list.empty() ? "" : ", ") + s;
    std::cerr << "momentlab: unknown subcommand '" << subcommand << "' (valid: " << list << ")\n";
    return 2;
  }

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "momentlab: cannot read config " << config_path << "\n";
    return 2;
  }
  std::stringstream text;
  text << in.rdbuf();
  ParseResult parsed = parse_config(text.str());
  if (!parsed.config) {
    for (const auto& e : parsed.errors) std::cerr << config_path << ": " << e << "\n";
    return 2;
  }
  RunConfig config = std::move(*parsed.config);
  if (config.subcommand != subcommand) {
    std::cerr << "momentlab: command line asks for '" << subcommand << "' but the config says '" << config.subcommand
              << "'\n";
    return 2;
  }
  if (*seed_opt) override_seed(config, seed);
  if (*threads_opt) config.threads = threads;
  if (out_dir.empty()) out_dir = config.out_dir.empty() ? "momentlab-out" : config.out_dir;
  return run(config, out_dir, std::cerr);
}
