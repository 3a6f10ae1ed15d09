#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "experiment.hpp"
#include "tsirelson/errors.hpp"

namespace app = tsirelson::app;

int main(int argc, char** argv) {
  CLI::App cli{"Spectral measures of Wiener functionals and causal filter diagnostics"};
  cli.require_subcommand(1);

  auto* run = cli.add_subcommand("run", "Run one experiment described by a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::optional<double> tolerance_scale;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out, "Output directory (overrides config 'out')");
  run->add_option("--workers", workers, "Worker threads (overrides config and WORKER_COUNT)")
      ->check(CLI::PositiveNumber);
  run->add_option("--tolerance-scale", tolerance_scale, "Multiply the sigma and dt-slack tolerances")
      ->check(CLI::PositiveNumber);

  auto* list = cli.add_subcommand("list-builtins", "Print named functionals, drifts and signals");
  bool as_json = false;
  list->add_flag("--json", as_json, "Print the catalog as JSON");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*list) {
      const auto catalog = app::builtin_catalog();
      if (as_json) {
        std::cout << catalog.dump(2) << '\n';
      } else {
        for (const auto& entry : catalog) {
          std::cout << entry["kind"].get<std::string>() << '\t' << entry["name"].get<std::string>()
                    << '\t' << entry["summary"].get<std::string>() << '\t' << entry["defaults"].dump()
                    << '\n';
        }
      }
      return app::kExitOk;
    }

    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config " << config_path << '\n';
      return app::kExitError;
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return app::kExitError;
    }
    app::ExperimentConfig config = app::parse_config(doc);
    if (seed) config.seed = *seed;
    if (out) config.out = *out;
    if (workers) config.workers = *workers;
    if (tolerance_scale) {
      config.tolerance.sigmas *= *tolerance_scale;
      config.tolerance.slack *= *tolerance_scale;
    }
    const int status = app::run(config, std::cerr);
    std::cerr << (status == app::kExitOk ? "PASS" : "FAIL") << ": " << app::to_string(config.command)
              << " -> " << config.out << '\n';
    return status;
  } catch (const tsirelson::ConfigError& e) {
    std::cerr << "config error at " << (e.field().empty() ? "/" : e.field()) << ": " << e.what() << '\n';
    return app::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return app::kExitError;
  }
}
