#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsirelson/conditional.hpp"
#include "tsirelson/filter.hpp"

namespace tsirelson::app {

enum class Command {
  ChaosSpectrum,
  FilterSpectrum,
  Invertibility,
  EstimateH,
  InnovationCheck,
  Figure2Surface,
};

const char* to_string(Command c) noexcept;

struct ProjectionConfig {
  std::string method = "auto";  ///< auto, exact, fixed-point, regression
  std::size_t fit_paths = 0;    ///< regression ensemble size; 0 = max(2000, n_paths / 5)
  std::optional<std::uint64_t> fit_seed;
  FeatureSpec features{};
};

/// One experiment. Every field has a JSON key of the same name; see docs/config.md.
struct ExperimentConfig {
  Command command = Command::ChaosSpectrum;
  std::size_t n_steps = 1024;
  std::size_t n_paths = 10000;
  std::uint64_t seed = 42;
  std::size_t workers = 0;  ///< 0 = WORKER_COUNT or 1

  nlohmann::json chaos;   ///< chaos-spectrum: builtin spec or inline expansion
  bool normalize = true;  ///< chaos-spectrum: report the law of f / |f|
  std::size_t mc_paths = 0;  ///< chaos-spectrum: Monte Carlo second-moment check when > 0

  nlohmann::json drift;   ///< filter commands
  nlohmann::json signal;  ///< estimate-h
  nlohmann::json xi;      ///< innovation-check: "matched" or a drift spec

  std::vector<std::pair<double, double>> intervals;
  double t = 1.0;
  std::size_t surface_points = 50;

  ProjectionConfig projection{};
  Tolerance tolerance{};
  std::size_t normalization_paths = 4000;
  std::string expect = "any";  ///< invertibility: any, equality, strict
  std::string out = ".";
};

/// Parses and validates; malformed input raises ConfigError with a
/// JSON-pointer path to the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);

/// Exit codes of `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerdictFail = 2;

/// Runs the experiment, writes report.json and the command's CSV files into
/// config.out, and returns kExitOk or kExitVerdictFail. Execution errors
/// propagate as exceptions. Progress notes go to `log`.
int run(const ExperimentConfig& config, std::ostream& log);

/// Catalog as JSON (array of {name, kind, summary, defaults}).
nlohmann::json builtin_catalog();

}  // namespace tsirelson::app
