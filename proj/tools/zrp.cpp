#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zrp/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCap = 3;
constexpr int kExitNumerical = 4;

struct CliFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<long> paths;
  std::optional<std::string> engine;
};

int run(const std::string& experiment, const CliFlags& flags) {
  nlohmann::json raw;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) {
      std::cerr << "error: cannot read config " << flags.config_path << "\n";
      return kExitConfig;
    }
    try {
      in >> raw;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: config parse failure: " << e.what() << "\n";
      return kExitConfig;
    }
  } else {
    raw = nlohmann::json::object();
  }
  raw["experiment"] = experiment;
  if (!raw.contains("schema_version")) raw["schema_version"] = zrp::kSchemaVersion;
  if (flags.seed) raw["seed"] = *flags.seed;
  if (flags.out) raw["out"] = *flags.out;
  if (flags.paths) raw["paths"] = *flags.paths;
  if (flags.engine) raw["engine"] = *flags.engine;

  try {
    zrp::ExperimentConfig config = zrp::parse_config(raw);
    nlohmann::json summary = zrp::run_experiment(config);
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const zrp::InvalidArgument& e) {
    std::cerr << "error: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const zrp::HorizonError& e) {
    std::cerr << "error: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const zrp::CapExceeded& e) {
    std::cerr << "error: resource cap: " << e.what() << "\n";
    return kExitCap;
  } catch (const zrp::SaturationError& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const zrp::NumericalError& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const zrp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-Range process simulation and exact analysis"};
  app.require_subcommand(1);

  CliFlags flags;
  std::string chosen;
  const std::vector<std::string> experiments = {
      "mix-curve",  "cutoff-scan", "gap-table", "coalescence", "path-bound",
      "dissolution", "emptying",   "sandwich",  "torus"};
  for (const std::string& name : experiments) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", flags.config_path, "JSON config file");
    sub->add_option("--seed", flags.seed, "64-bit RNG seed");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--paths", flags.paths, "Monte Carlo path count");
    sub->add_option("--engine", flags.engine,
                    "simulation engine: c1, c2 or gillespie");
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  return run(chosen, flags);
}
