#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "tsirelson/brownian.hpp"
#include "tsirelson/builtins.hpp"
#include "tsirelson/errors.hpp"

using namespace tsirelson;
using nlohmann::json;

namespace {

bool has(const std::vector<BuiltinInfo>& catalog, const std::string& name) {
  return std::any_of(catalog.begin(), catalog.end(), [&](const BuiltinInfo& b) { return b.name == name; });
}

std::string field_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("catalog contents") {
  const auto catalog = list_builtins();
  for (unsigned k = 1; k <= 8; ++k) CHECK(has(catalog, "w1pow" + std::to_string(k)));
  for (const char* name : {"expmart", "zero", "sin", "linear-feedback", "fourier", "random-fourier", "signal:cos"}) {
    CHECK(has(catalog, name));
  }
  std::set<std::string> names;
  for (const auto& b : catalog) {
    CHECK(names.insert(b.name).second);
    CHECK((b.kind == "chaos" || b.kind == "drift" || b.kind == "signal"));
  }
}

TEST_CASE("catalog defaults round-trip through canonicalization and construction") {
  const TimeGrid g(32);
  for (const auto& b : list_builtins()) {
    CAPTURE(b.name);
    if (b.kind == "chaos") {
      CHECK(canonical_chaos_spec(b.defaults) == b.defaults);
      CHECK(canonical_chaos_spec(json::parse(b.defaults.dump())) == b.defaults);
      CHECK(builtin_chaos(b.defaults).total_mass() > 0.0);
    } else if (b.kind == "drift") {
      CHECK(canonical_drift_spec(b.defaults) == b.defaults);
      CHECK(canonical_drift_spec(json::parse(b.defaults.dump())) == b.defaults);
      CHECK_NOTHROW(builtin_drift(b.defaults, g).evaluate(SamplePath::zeros(g)));
    } else {
      CHECK(canonical_signal_spec(b.defaults) == b.defaults);
      CHECK(builtin_signal(b.defaults, g).grid() == g);
    }
  }
}

TEST_CASE("builtin chaos functionals") {
  const auto w4 = builtin_chaos({{"name", "w1pow4"}});
  CHECK(w4.total_mass() == doctest::Approx(105.0));
  const auto spec = canonical_chaos_spec({{"name", "expmart"}, {"beta", 4.0}});
  CHECK(spec["max_order"].get<std::size_t>() >= 30);
  const auto e = builtin_chaos(spec);
  CHECK(std::abs(e.total_mass() - 1.0) < 1e-8);
  CHECK(canonical_chaos_spec({{"name", "expmart"}, {"beta", 1.0}})["max_order"] == 30);
  CHECK(field_of([] { canonical_chaos_spec({{"name", "w1pow13"}}); }) == "/name");
  CHECK(field_of([] { canonical_chaos_spec({{"name", "expmart"}, {"beta", -1.0}}); }) == "/beta");
  CHECK(field_of([] { canonical_chaos_spec({{"name", "expmart"}, {"gamma", 1.0}}); }) == "/gamma");
  CHECK(field_of([] { canonical_chaos_spec({{"name", 4}}); }) == "/name");
  CHECK(field_of([] { canonical_chaos_spec(json::array()); }) == "");
  CHECK_THROWS_AS(builtin_chaos({{"name", "expmart"}, {"beta", 4.0}, {"max_order", 10}}), TruncationError);
}

TEST_CASE("builtin drifts") {
  const TimeGrid g(64);
  const auto b = sample_brownian(g, RngStream(1, 0));
  const auto s = builtin_drift({{"name", "sin"}}, g);
  CHECK(s.kind() == DriftKind::Deterministic);
  CHECK(s.deterministic_path().derivative()[10] == std::sin(g.node(10)));
  const auto lf = builtin_drift({{"name", "linear-feedback"}}, g);
  CHECK(lf.kind() == DriftKind::StateFeedback);
  CHECK(lf.lipschitz_bound() == 0.5);
  CHECK(lf.evaluate(b)[5] == -0.5 * b[5]);
  const auto lf2 = builtin_drift({{"name", "linear-feedback"}, {"a", 1}}, g);
  CHECK(lf2.evaluate(b)[5] == b[5]);

  const auto f = builtin_drift({{"name", "fourier"}, {"constant", 0.5}, {"cos", {1.0}}, {"sin", {0.0, 2.0}}}, g);
  CHECK(f.kind() == DriftKind::Deterministic);
  const double t = g.node(7);
  CHECK(f.deterministic_path().derivative()[7] ==
        doctest::Approx(0.5 + std::cos(2 * std::numbers::pi * t) + 2.0 * std::sin(4 * std::numbers::pi * t)));
  const auto ff = builtin_drift({{"name", "fourier"}, {"constant", 0.5}, {"feedback", -0.25}}, g);
  CHECK(ff.kind() == DriftKind::StateFeedback);
  CHECK(ff.evaluate(b)[9] == doctest::Approx(0.5 - 0.25 * b[9]));

  const auto r1 = builtin_drift({{"name", "random-fourier"}, {"seed", 3}}, g);
  const auto r2 = builtin_drift({{"name", "random-fourier"}, {"seed", 3}}, g);
  const auto r3 = builtin_drift({{"name", "random-fourier"}, {"seed", 4}}, g);
  CHECK(r1.evaluate(b) == r2.evaluate(b));
  CHECK(r1.evaluate(b) != r3.evaluate(b));
  CHECK(builtin_drift({{"name", "random-fourier"}, {"feedback", 0.3}}, g).lipschitz_bound() == doctest::Approx(0.3));

  CHECK(field_of([&] { builtin_drift({{"name", "linear-feedback"}, {"a", "x"}}, g); }) == "/a");
  CHECK(field_of([&] { builtin_drift({{"name", "random-fourier"}, {"K", 0}}, g); }) == "/K");
  CHECK(field_of([&] { builtin_drift({{"name", "fourier"}, {"cos", {1.0, "a"}}}, g); }) == "/cos/1");
  CHECK(field_of([&] { builtin_drift({{"name", "sin"}, {"amplitude", 2}}, g); }) == "/amplitude");
  CHECK(field_of([&] { builtin_drift({{"name", "nope"}}, g); }) == "/name");
}

TEST_CASE("builtin signals") {
  const TimeGrid g(64);
  CHECK(builtin_signal({{"name", "zero"}}, g).energy() == 0.0);
  const auto c = builtin_signal({{"name", "cos"}}, g).path();
  CHECK(c.back() == doctest::Approx(std::sin(1.0)).epsilon(g.dt()));
  CHECK(builtin_signal({{"name", "unit-slope"}}, g).path().back() == doctest::Approx(1.0));
  CHECK(field_of([&] { builtin_signal({{"name", "tan"}}, g); }) == "/name");
}

TEST_CASE("drift plugins") {
  register_drift_plugin(
      "test-cubic",
      [](const json& spec, const TimeGrid&) {
        const double c = spec["c"].get<double>();
        return DriftSpec::state_feedback([c](double, double x) { return c * std::tanh(x); }, std::abs(c));
      },
      {{"c", 0.25}}, "bounded tanh feedback");
  const TimeGrid g(16);
  const auto spec = canonical_drift_spec({{"name", "test-cubic"}});
  CHECK(spec == json{{"name", "test-cubic"}, {"c", 0.25}});
  CHECK(canonical_drift_spec(spec) == spec);
  const auto d = builtin_drift({{"name", "test-cubic"}, {"c", 1.0}}, g);
  CHECK(d.label() == "test-cubic");
  CHECK(d.lipschitz_bound() == 1.0);
  CHECK(has(list_builtins(), "test-cubic"));
  CHECK_THROWS_AS(register_drift_plugin("sin", [](const json&, const TimeGrid& grid) { return DriftSpec::zero(grid); }),
                  ConfigError);
}
