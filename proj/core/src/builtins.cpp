#include "tsirelson/builtins.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "tsirelson/errors.hpp"
#include "tsirelson/rng.hpp"

namespace tsirelson {

namespace {

using nlohmann::json;

struct Plugin {
  DriftPlugin factory;
  json defaults;
  std::string summary;
};

std::mutex& plugin_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, Plugin>& plugins() {
  static std::map<std::string, Plugin> registry;
  return registry;
}

const json& require_object(const json& spec) {
  if (!spec.is_object()) throw ConfigError("", "expected an object");
  if (!spec.contains("name") || !spec["name"].is_string()) {
    throw ConfigError("/name", "expected a string");
  }
  return spec;
}

double number_field(const json& spec, const char* key, double fallback) {
  if (!spec.contains(key)) return fallback;
  const json& v = spec[key];
  if (!v.is_number()) throw ConfigError(std::string("/") + key, "expected a number");
  return v.get<double>();
}

std::uint64_t unsigned_field(const json& spec, const char* key, std::uint64_t fallback) {
  if (!spec.contains(key)) return fallback;
  const json& v = spec[key];
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(std::string("/") + key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<double> array_field(const json& spec, const char* key) {
  if (!spec.contains(key)) return {};
  const json& v = spec[key];
  if (!v.is_array()) throw ConfigError(std::string("/") + key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ConfigError(std::string("/") + key + "/" + std::to_string(i), "expected a number");
    }
    out.push_back(v[i].get<double>());
  }
  return out;
}

void reject_unknown(const json& spec, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : spec.items()) {
    bool known = key == "name";
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError("/" + key, "unknown field");
  }
}

unsigned monomial_power(const std::string& name) {
  if (name.rfind("w1pow", 0) != 0 || name.size() == 5) return 0;
  unsigned k = 0;
  for (char c : name.substr(5)) {
    if (c < '0' || c > '9') return 0;
    k = k * 10 + static_cast<unsigned>(c - '0');
    if (k > 12) return 0;
  }
  return k;
}

std::size_t default_exponential_order(double beta) {
  try {
    exponential_chaos(beta, 30);
    return 30;
  } catch (const TruncationError& e) {
    return e.suggested_order() + static_cast<std::size_t>(std::ceil(4.0 * std::sqrt(beta))) + 10;
  }
}

struct Fourier {
  double constant = 0.0;
  std::vector<double> cos;
  std::vector<double> sin;

  double operator()(double t) const {
    double v = constant;
    for (std::size_t k = 0; k < cos.size(); ++k) {
      v += cos[k] * std::cos(2.0 * std::numbers::pi * static_cast<double>(k + 1) * t);
    }
    for (std::size_t k = 0; k < sin.size(); ++k) {
      v += sin[k] * std::sin(2.0 * std::numbers::pi * static_cast<double>(k + 1) * t);
    }
    return v;
  }
};

DriftSpec fourier_drift(Fourier f, double feedback, const TimeGrid& grid, std::string label) {
  if (feedback == 0.0) {
    return DriftSpec::deterministic(CameronMartinPath::from_derivative(grid, f)).set_label(std::move(label));
  }
  auto phi = [f = std::move(f), feedback](double t, double x) { return f(t) + feedback * x; };
  return DriftSpec::state_feedback(phi, std::abs(feedback)).set_label(std::move(label));
}

}  // namespace

std::vector<BuiltinInfo> list_builtins() {
  std::vector<BuiltinInfo> out;
  for (unsigned k = 1; k <= 8; ++k) {
    const std::string name = "w1pow" + std::to_string(k);
    out.push_back({name, "chaos", "W_1^" + std::to_string(k) + " (exact, constant kernels)",
                   canonical_chaos_spec({{"name", name}})});
  }
  out.push_back({"expmart", "chaos", "exp(sqrt(beta) W_1 - beta), Poisson(beta) cardinality law",
                 canonical_chaos_spec({{"name", "expmart"}})});
  out.push_back({"zero", "drift", "identity filter", canonical_drift_spec({{"name", "zero"}})});
  out.push_back({"sin", "drift", "deterministic drift hdot(t) = sin t", canonical_drift_spec({{"name", "sin"}})});
  out.push_back({"linear-feedback", "drift", "state feedback phi(t, x) = a x",
                 canonical_drift_spec({{"name", "linear-feedback"}})});
  out.push_back({"fourier", "drift", "explicit Fourier series plus linear feedback a x",
                 canonical_drift_spec({{"name", "fourier"}})});
  out.push_back({"random-fourier", "drift", "seeded random Fourier series (K terms) plus feedback a x",
                 canonical_drift_spec({{"name", "random-fourier"}})});
  for (const char* s : {"zero", "sin", "cos", "unit-slope"}) {
    out.push_back({std::string("signal:") + s, "signal", "input signal h with the named derivative",
                   canonical_signal_spec({{"name", s}})});
  }
  std::lock_guard lock(plugin_mutex());
  for (const auto& [name, plugin] : plugins()) {
    out.push_back({name, "drift", plugin.summary, plugin.defaults});
  }
  return out;
}

json canonical_chaos_spec(const json& spec) {
  require_object(spec);
  const std::string name = spec["name"].get<std::string>();
  if (monomial_power(name) != 0) {
    reject_unknown(spec, {});
    return {{"name", name}};
  }
  if (name == "expmart") {
    reject_unknown(spec, {"beta", "max_order"});
    const double beta = number_field(spec, "beta", 4.0);
    if (!(beta > 0.0) || beta > 50.0) throw ConfigError("/beta", "must lie in (0, 50]");
    std::uint64_t order = unsigned_field(spec, "max_order", 0);
    if (order == 0) order = default_exponential_order(beta);
    return {{"name", name}, {"beta", beta}, {"max_order", order}};
  }
  throw ConfigError("/name", "unknown chaos functional '" + name + "'");
}

ChaosExpansion builtin_chaos(const json& spec) {
  const json c = canonical_chaos_spec(spec);
  const std::string name = c["name"].get<std::string>();
  if (const unsigned k = monomial_power(name)) return monomial_chaos(k);
  return exponential_chaos(c["beta"].get<double>(), c["max_order"].get<std::size_t>());
}

json canonical_drift_spec(const json& spec) {
  require_object(spec);
  const std::string name = spec["name"].get<std::string>();
  if (name == "zero" || name == "sin") {
    reject_unknown(spec, {});
    return {{"name", name}};
  }
  if (name == "linear-feedback") {
    reject_unknown(spec, {"a"});
    return {{"name", name}, {"a", number_field(spec, "a", -0.5)}};
  }
  if (name == "fourier") {
    reject_unknown(spec, {"constant", "cos", "sin", "feedback"});
    return {{"name", name},
            {"constant", number_field(spec, "constant", 0.0)},
            {"cos", array_field(spec, "cos")},
            {"sin", array_field(spec, "sin")},
            {"feedback", number_field(spec, "feedback", 0.0)}};
  }
  if (name == "random-fourier") {
    reject_unknown(spec, {"seed", "K", "scale", "feedback"});
    const std::uint64_t K = unsigned_field(spec, "K", 4);
    if (K == 0 || K > 64) throw ConfigError("/K", "must lie in [1, 64]");
    const double scale = number_field(spec, "scale", 1.0);
    if (!(scale >= 0.0)) throw ConfigError("/scale", "must be non-negative");
    return {{"name", name},
            {"seed", unsigned_field(spec, "seed", 1)},
            {"K", K},
            {"scale", scale},
            {"feedback", number_field(spec, "feedback", 0.0)}};
  }
  std::lock_guard lock(plugin_mutex());
  const auto it = plugins().find(name);
  if (it == plugins().end()) throw ConfigError("/name", "unknown drift '" + name + "'");
  json out = it->second.defaults;
  for (const auto& [key, value] : spec.items()) out[key] = value;
  out["name"] = name;
  return out;
}

DriftSpec builtin_drift(const json& spec, const TimeGrid& grid) {
  const json c = canonical_drift_spec(spec);
  const std::string name = c["name"].get<std::string>();
  if (name == "zero") return DriftSpec::zero(grid);
  if (name == "sin") {
    return DriftSpec::deterministic(
               CameronMartinPath::from_derivative(grid, [](double t) { return std::sin(t); }))
        .set_label("sin");
  }
  if (name == "linear-feedback") {
    const double a = c["a"].get<double>();
    return DriftSpec::state_feedback([a](double, double x) { return a * x; }, std::abs(a))
        .set_label("linear-feedback(" + c["a"].dump() + ")");
  }
  if (name == "fourier") {
    Fourier f{c["constant"].get<double>(), c["cos"].get<std::vector<double>>(),
              c["sin"].get<std::vector<double>>()};
    return fourier_drift(std::move(f), c["feedback"].get<double>(), grid, "fourier");
  }
  if (name == "random-fourier") {
    const auto K = c["K"].get<std::size_t>();
    const double scale = c["scale"].get<double>();
    RngStream rng(c["seed"].get<std::uint64_t>(), 0);
    Fourier f;
    for (std::size_t k = 1; k <= K; ++k) {
      f.cos.push_back(scale / static_cast<double>(k) * rng.normal());
      f.sin.push_back(scale / static_cast<double>(k) * rng.normal());
    }
    return fourier_drift(std::move(f), c["feedback"].get<double>(), grid,
                         "random-fourier(" + c["seed"].dump() + ")");
  }
  DriftPlugin factory;
  {
    std::lock_guard lock(plugin_mutex());
    factory = plugins().at(name).factory;
  }
  return factory(c, grid).set_label(name);
}

json canonical_signal_spec(const json& spec) {
  require_object(spec);
  const std::string name = spec["name"].get<std::string>();
  if (name != "zero" && name != "sin" && name != "cos" && name != "unit-slope") {
    throw ConfigError("/name", "unknown signal '" + name + "'");
  }
  reject_unknown(spec, {});
  return {{"name", name}};
}

CameronMartinPath builtin_signal(const json& spec, const TimeGrid& grid) {
  const std::string name = canonical_signal_spec(spec)["name"].get<std::string>();
  if (name == "zero") return CameronMartinPath::zero(grid);
  if (name == "sin") return CameronMartinPath::from_derivative(grid, [](double t) { return std::sin(t); });
  if (name == "cos") return CameronMartinPath::from_derivative(grid, [](double t) { return std::cos(t); });
  return CameronMartinPath::from_derivative(grid, [](double) { return 1.0; });
}

void register_drift_plugin(const std::string& name, DriftPlugin factory, json defaults,
                           std::string summary) {
  static const char* reserved[] = {"zero", "sin", "linear-feedback", "fourier", "random-fourier"};
  for (const char* r : reserved) {
    if (name == r) throw ConfigError("/name", "cannot replace builtin drift '" + name + "'");
  }
  if (!factory) throw Error("drift plugin '" + name + "' needs a factory");
  if (!defaults.is_object()) defaults = json::object();
  defaults["name"] = name;
  std::lock_guard lock(plugin_mutex());
  plugins()[name] = {std::move(factory), std::move(defaults), std::move(summary)};
}

}  // namespace tsirelson
