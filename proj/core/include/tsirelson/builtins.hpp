#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsirelson/chaos.hpp"
#include "tsirelson/filter.hpp"
#include "tsirelson/grid.hpp"

namespace tsirelson {

struct BuiltinInfo {
  std::string name;
  std::string kind;  ///< "chaos", "drift" or "signal"
  std::string summary;
  nlohmann::json defaults;  ///< canonical spec with every parameter filled in
};

/// Catalog of named functionals, drifts and input signals, plus registered plugins.
std::vector<BuiltinInfo> list_builtins();

/**
 * Named chaos functionals:
 *   {"name": "w1pow<k>"}                        W_1^k, 1 <= k <= 12
 *   {"name": "expmart", "beta": b, "max_order": N}   exp(sqrt(b) W_1 - b)
 * max_order 0 picks an order whose dropped mass is far below 1e-8.
 */
ChaosExpansion builtin_chaos(const nlohmann::json& spec);

/**
 * Named drifts:
 *   {"name": "zero"}
 *   {"name": "sin"}                                   hdot(t) = sin t
 *   {"name": "linear-feedback", "a": a}               phi(t, x) = a x
 *   {"name": "fourier", "constant": c, "cos": [...], "sin": [...], "feedback": a}
 *        phi(t, x) = c + sum_k cos_k cos(2 pi k t) + sin_k sin(2 pi k t) + a x
 *   {"name": "random-fourier", "seed": s, "K": K, "scale": r, "feedback": a}
 *        fourier drift with N(0, (r / k)^2) coefficients drawn from seed s
 *   {"name": "<plugin>", ...}                         a registered plugin
 */
DriftSpec builtin_drift(const nlohmann::json& spec, const TimeGrid& grid);

/// Named Cameron-Martin input signals: zero, sin (hdot = sin), cos (hdot = cos,
/// so h = sin), unit-slope (hdot = 1).
CameronMartinPath builtin_signal(const nlohmann::json& spec, const TimeGrid& grid);

/// Spec with defaults filled in; canonical(canonical(x)) == canonical(x).
nlohmann::json canonical_chaos_spec(const nlohmann::json& spec);
nlohmann::json canonical_drift_spec(const nlohmann::json& spec);
nlohmann::json canonical_signal_spec(const nlohmann::json& spec);

/// User drift hook: builds a drift from its JSON parameters.
using DriftPlugin = std::function<DriftSpec(const nlohmann::json& spec, const TimeGrid& grid)>;

/// Registers `factory` under `name`; builtin names cannot be replaced.
void register_drift_plugin(const std::string& name, DriftPlugin factory,
                           nlohmann::json defaults = nlohmann::json::object(),
                           std::string summary = "user drift");

}  // namespace tsirelson
