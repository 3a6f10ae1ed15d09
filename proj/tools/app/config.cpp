#include <algorithm>
#include <string>

#include "experiment.hpp"
#include "tsirelson/builtins.hpp"
#include "tsirelson/chaos.hpp"
#include "tsirelson/errors.hpp"

namespace tsirelson::app {

namespace {

using nlohmann::json;

constexpr std::pair<Command, const char*> kCommands[] = {
    {Command::ChaosSpectrum, "chaos-spectrum"},   {Command::FilterSpectrum, "filter-spectrum"},
    {Command::Invertibility, "invertibility"},     {Command::EstimateH, "estimate-h"},
    {Command::InnovationCheck, "innovation-check"}, {Command::Figure2Surface, "figure2-surface"},
};

std::string path(const std::string& prefix, const std::string& key) { return prefix + "/" + key; }

void check_keys(const json& obj, const std::string& prefix, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
        allowed.end()) {
      throw ConfigError(path(prefix, key), "unknown field");
    }
  }
}

std::uint64_t get_unsigned(const json& obj, const std::string& prefix, const char* key,
                           std::uint64_t fallback, std::uint64_t min = 0) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj[key];
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ConfigError(path(prefix, key), "expected a non-negative integer");
  }
  const auto value = v.get<std::uint64_t>();
  if (value < min) throw ConfigError(path(prefix, key), "must be at least " + std::to_string(min));
  return value;
}

double get_number(const json& obj, const std::string& prefix, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ConfigError(path(prefix, key), "expected a number");
  return obj[key].get<double>();
}

bool get_bool(const json& obj, const std::string& prefix, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError(path(prefix, key), "expected true or false");
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const std::string& prefix, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) throw ConfigError(path(prefix, key), "expected a string");
  return obj[key].get<std::string>();
}

// Re-raises a nested spec error with the enclosing field prefix.
template <typename Fn>
json nested(const std::string& prefix, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.field(), std::string(e.what()).substr(e.field().size() + 2));
  }
}

json canonical_chaos(const json& spec) {
  return nested("/chaos", [&] {
    if (spec.is_object() && spec.contains("kernels")) return to_json(chaos_from_json(spec));
    return canonical_chaos_spec(spec);
  });
}

}  // namespace

const char* to_string(Command c) noexcept {
  for (const auto& [command, name] : kCommands) {
    if (command == c) return name;
  }
  return "unknown";
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");
  check_keys(doc, "", {"command", "n_steps", "n_paths", "seed", "workers", "chaos", "normalize",
                       "mc_paths", "drift", "signal", "xi", "intervals", "t", "surface_points",
                       "projection", "tolerance", "normalization_paths", "expect", "out"});
  ExperimentConfig c;
  if (!doc.contains("command")) throw ConfigError("/command", "missing");
  const std::string command = get_string(doc, "", "command", "");
  const auto it = std::find_if(std::begin(kCommands), std::end(kCommands),
                               [&](const auto& p) { return command == p.second; });
  if (it == std::end(kCommands)) throw ConfigError("/command", "unknown command '" + command + "'");
  c.command = it->first;

  c.n_steps = get_unsigned(doc, "", "n_steps", c.n_steps, 1);
  if (c.n_steps > (1u << 20)) throw ConfigError("/n_steps", "must be at most 2^20");
  c.n_paths = get_unsigned(doc, "", "n_paths", c.n_paths, 1);
  c.seed = get_unsigned(doc, "", "seed", c.seed);
  c.workers = get_unsigned(doc, "", "workers", c.workers);
  c.normalize = get_bool(doc, "", "normalize", c.normalize);
  c.mc_paths = get_unsigned(doc, "", "mc_paths", c.mc_paths);
  c.t = get_number(doc, "", "t", c.t);
  if (!(c.t > 0.0 && c.t <= 1.0)) throw ConfigError("/t", "must lie in (0, 1]");
  c.surface_points = get_unsigned(doc, "", "surface_points", c.surface_points, 2);
  c.normalization_paths = get_unsigned(doc, "", "normalization_paths", c.normalization_paths, 1000);
  c.expect = get_string(doc, "", "expect", c.expect);
  if (c.expect != "any" && c.expect != "equality" && c.expect != "strict") {
    throw ConfigError("/expect", "must be one of any, equality, strict");
  }
  c.out = get_string(doc, "", "out", c.out);

  if (doc.contains("intervals")) {
    const json& list = doc["intervals"];
    if (!list.is_array()) throw ConfigError("/intervals", "expected an array of [s, t] pairs");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string p = "/intervals/" + std::to_string(i);
      const json& pair = list[i];
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
        throw ConfigError(p, "expected [s, t]");
      }
      const double s = pair[0].get<double>(), t = pair[1].get<double>();
      if (!(s >= 0.0 && s <= t && t <= 1.0)) throw ConfigError(p, "need 0 <= s <= t <= 1");
      c.intervals.emplace_back(s, t);
    }
  }

  if (doc.contains("projection")) {
    const json& p = doc["projection"];
    if (!p.is_object()) throw ConfigError("/projection", "expected an object");
    check_keys(p, "/projection", {"method", "fit_paths", "fit_seed", "features"});
    c.projection.method = get_string(p, "/projection", "method", c.projection.method);
    if (c.projection.method != "auto" && c.projection.method != "exact" &&
        c.projection.method != "fixed-point" && c.projection.method != "regression") {
      throw ConfigError("/projection/method", "must be one of auto, exact, fixed-point, regression");
    }
    c.projection.fit_paths = get_unsigned(p, "/projection", "fit_paths", 0);
    if (p.contains("fit_seed")) c.projection.fit_seed = get_unsigned(p, "/projection", "fit_seed", 0);
    if (p.contains("features")) {
      const json& f = p["features"];
      const std::string fp = "/projection/features";
      if (!f.is_object()) throw ConfigError(fp, "expected an object");
      check_keys(f, fp, {"dyadic_lags", "blocks", "level", "square"});
      auto& spec = c.projection.features;
      spec.dyadic_lags = get_unsigned(f, fp, "dyadic_lags", spec.dyadic_lags);
      spec.blocks = get_unsigned(f, fp, "blocks", spec.blocks);
      spec.level = get_bool(f, fp, "level", spec.level);
      spec.square = get_bool(f, fp, "square", spec.square);
      if (spec.dyadic_lags > 16) throw ConfigError(fp + "/dyadic_lags", "must be at most 16");
      if (spec.blocks > 256) throw ConfigError(fp + "/blocks", "must be at most 256");
    }
  }

  if (doc.contains("tolerance")) {
    const json& t = doc["tolerance"];
    if (!t.is_object()) throw ConfigError("/tolerance", "expected an object");
    check_keys(t, "/tolerance", {"sigmas", "slack"});
    c.tolerance.sigmas = get_number(t, "/tolerance", "sigmas", c.tolerance.sigmas);
    c.tolerance.slack = get_number(t, "/tolerance", "slack", c.tolerance.slack);
    if (!(c.tolerance.sigmas > 0.0)) throw ConfigError("/tolerance/sigmas", "must be positive");
    if (!(c.tolerance.slack >= 0.0)) throw ConfigError("/tolerance/slack", "must be non-negative");
  }

  if (c.command == Command::ChaosSpectrum) {
    if (!doc.contains("chaos")) throw ConfigError("/chaos", "missing (required by chaos-spectrum)");
    c.chaos = canonical_chaos(doc["chaos"]);
  } else if (doc.contains("chaos")) {
    throw ConfigError("/chaos", "only used by chaos-spectrum");
  }

  if (c.command != Command::ChaosSpectrum) {
    if (!doc.contains("drift")) throw ConfigError("/drift", "missing");
    c.drift = nested("/drift", [&] { return canonical_drift_spec(doc["drift"]); });
  } else if (doc.contains("drift")) {
    throw ConfigError("/drift", "not used by chaos-spectrum");
  }

  const json signal = doc.contains("signal") ? doc["signal"] : json{{"name", "cos"}};
  if (c.command == Command::EstimateH) {
    c.signal = nested("/signal", [&] { return canonical_signal_spec(signal); });
  } else if (doc.contains("signal")) {
    throw ConfigError("/signal", "only used by estimate-h");
  }

  const json xi = doc.contains("xi") ? doc["xi"] : json("matched");
  if (c.command == Command::InnovationCheck) {
    if (xi.is_string()) {
      if (xi.get<std::string>() != "matched") throw ConfigError("/xi", "expected \"matched\" or a drift");
      c.xi = xi;
    } else {
      c.xi = nested("/xi", [&] { return canonical_drift_spec(xi); });
    }
  } else if (doc.contains("xi")) {
    throw ConfigError("/xi", "only used by innovation-check");
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json doc = {{"command", to_string(c.command)},
              {"n_steps", c.n_steps},
              {"n_paths", c.n_paths},
              {"seed", c.seed},
              {"workers", c.workers},
              {"t", c.t},
              {"surface_points", c.surface_points},
              {"normalization_paths", c.normalization_paths},
              {"expect", c.expect},
              {"out", c.out},
              {"normalize", c.normalize},
              {"mc_paths", c.mc_paths},
              {"tolerance", {{"sigmas", c.tolerance.sigmas}, {"slack", c.tolerance.slack}}}};
  json intervals = json::array();
  for (const auto& [s, t] : c.intervals) intervals.push_back({s, t});
  doc["intervals"] = intervals;
  json projection = {{"method", c.projection.method},
                     {"fit_paths", c.projection.fit_paths},
                     {"features",
                      {{"dyadic_lags", c.projection.features.dyadic_lags},
                       {"blocks", c.projection.features.blocks},
                       {"level", c.projection.features.level},
                       {"square", c.projection.features.square}}}};
  if (c.projection.fit_seed) projection["fit_seed"] = *c.projection.fit_seed;
  doc["projection"] = projection;
  if (c.command == Command::ChaosSpectrum) {
    doc["chaos"] = c.chaos;
  } else {
    doc["drift"] = c.drift;
  }
  if (c.command == Command::EstimateH) doc["signal"] = c.signal;
  if (c.command == Command::InnovationCheck) doc["xi"] = c.xi;
  return doc;
}

json builtin_catalog() {
  json out = json::array();
  for (const auto& b : list_builtins()) {
    out.push_back({{"name", b.name}, {"kind", b.kind}, {"summary", b.summary}, {"defaults", b.defaults}});
  }
  return out;
}

}  // namespace tsirelson::app
