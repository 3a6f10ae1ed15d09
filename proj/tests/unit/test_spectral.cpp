#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "tsirelson/brownian.hpp"
#include "tsirelson/chaos.hpp"
#include "tsirelson/conditional.hpp"
#include "tsirelson/errors.hpp"
#include "tsirelson/report.hpp"
#include "tsirelson/spectral.hpp"

using namespace tsirelson;

namespace {

const double kSinSq = 0.5 - std::sin(2.0) / 4.0;

CameronMartinPath sin_path(const TimeGrid& g) {
  return CameronMartinPath::from_derivative(g, [](double t) { return std::sin(t); });
}

DriftSpec sin_drift(const TimeGrid& g) { return DriftSpec::deterministic(sin_path(g)); }

DriftSpec feedback(double a) {
  return DriftSpec::state_feedback([a](double, double x) { return a * x; }, std::abs(a));
}

// exp(int_s^t sin^2) in closed form.
double sin_surface(double s, double t) {
  return std::exp((t - s) / 2.0 - (std::sin(2.0 * t) - std::sin(2.0 * s)) / 4.0);
}

}  // namespace

TEST_CASE("projected-drift estimator on the zero drift is exactly one") {
  const TimeGrid g(64);
  const auto ens = build_ensemble(DriftSpec::zero(g), 1000, g, 1);
  const auto est = rho_J_lemma1(ens, project_deterministic(DriftSpec::zero(g), g, 8), 8, 40);
  CHECK(est.value == 1.0);
  CHECK(est.std_error == 0.0);
  CHECK(est.method == EstimateMethod::LemmaOneMC);
  CHECK(est.s == 8);
  CHECK(est.t == 40);
}

TEST_CASE("projected-drift estimator on the sin drift") {
  const TimeGrid g(256);
  const auto ens = build_ensemble(sin_drift(g), 20000, g, 2);
  const auto est = rho_J_lemma1(ens, project_deterministic(sin_drift(g), g), 0, 256);
  CHECK(std::abs(est.value - std::exp(kSinSq)) <= 3.0 * est.std_error + g.dt());
  CHECK(std::abs(est.value - 1.31348) <= 3.0 * est.std_error + g.dt());
  const auto closed = rho_J_closed_form(sin_path(g), 0, 256);
  CHECK(closed.method == EstimateMethod::ClosedForm);
  CHECK(closed.value == doctest::Approx(std::exp(kSinSq)).epsilon(g.dt()));
}

TEST_CASE("Monte Carlo and closed form agree on random intervals") {
  const TimeGrid g(128);
  const auto drift = DriftSpec::deterministic(
      CameronMartinPath::from_derivative(g, [](double t) { return 1.0 + std::cos(4.0 * t); }));
  const auto ens = build_ensemble(drift, 20000, g, 3);
  GateOptions gate;
  gate.normalization = normalization_check(drift, g, 128, 4000, 33);
  RngStream r(3, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t s = static_cast<std::size_t>(r.uniform() * 128);
    std::size_t t = static_cast<std::size_t>(r.uniform() * 128);
    if (s > t) std::swap(s, t);
    const auto mc = rho_J_lemma1(ens, project_deterministic(drift, g, s), s, t, gate);
    const auto exact = rho_J_closed_form(drift.deterministic_path(), s, t);
    CHECK(std::abs(mc.value - exact.value) <= 3.0 * mc.std_error + g.dt());
  }
}

TEST_CASE("projected-drift estimates are monotone over nested intervals") {
  const TimeGrid g(64);
  const auto fb = feedback(-0.5);
  const auto ens = build_ensemble(fb, 10000, g, 4);
  const auto p = project_fixed_point(fb, g);
  std::vector<std::vector<double>> logs;
  for (std::size_t t : {8u, 16u, 32u, 48u, 64u}) logs.push_back(lemma1_logs(ens, p, 0, t));
  for (std::size_t j = 0; j + 1 < logs.size(); ++j) {
    const auto diff = exp_difference_estimate(logs[j + 1], logs[j]);
    CHECK(diff.mean >= -3.0 * diff.std_error);
  }
}

TEST_CASE("chaos route") {
  const TimeGrid g(16);
  const auto w4 = normalize_spectral(monomial_chaos(4));
  const auto e = rho_J_chaos(w4, g, 0, 8);
  CHECK(e.value == doctest::Approx(0.2714286).epsilon(1e-6));
  CHECK(e.method == EstimateMethod::ChaosExact);
  CHECK(rho_J_chaos(w4, g, 0, 16).value == doctest::Approx(1.0));
  CHECK_THROWS_AS(rho_J_chaos(w4, g, 9, 8), DimensionError);
}

TEST_CASE("normalization gate refuses failed checks") {
  const TimeGrid g(32);
  const auto ens = build_ensemble(sin_drift(g), 200, g, 5);
  GateOptions gate;
  NormalizationCheck failed;
  failed.verdict = Verdict::Fail;
  failed.doleans = {3.0, 0.1, 1000};
  gate.normalization = failed;
  CHECK_THROWS_AS(rho_J_lemma1(ens, project_deterministic(sin_drift(g), g), 0, 32, gate), HypothesisError);
  CHECK_THROWS_AS(invertibility_report(ens, project_deterministic(sin_drift(g), g), 32, {gate}), HypothesisError);
}

TEST_CASE("exponential right side of the Jensen gap") {
  const TimeGrid g(256);
  const auto zero = build_ensemble(DriftSpec::zero(g), 500, g, 6);
  const auto z = theorem1_rhs(zero, 256);
  CHECK(z.value == 1.0);
  CHECK(z.std_error == 0.0);
  const auto ens = build_ensemble(sin_drift(g), 20000, g, 7);
  const auto s = theorem1_rhs(ens, 256);
  CHECK(std::abs(s.value - std::exp(kSinSq)) <= 3.0 * s.std_error + g.dt());
}

TEST_CASE("conditional identity check") {
  const TimeGrid g(64);
  {
    const auto ens = build_ensemble(DriftSpec::zero(g), 2000, g, 8);
    const auto c = proposition1_identity_check(ens, project_deterministic(DriftSpec::zero(g), g, 16), 16, 48);
    CHECK(c.discrepancy.mean == doctest::Approx(0.0).epsilon(1e-20));
    CHECK(c.verdict == Verdict::Pass);
  }
  {
    const auto ens = build_ensemble(sin_drift(g), 2000, g, 9);
    const auto c = proposition1_identity_check(ens, project_deterministic(sin_drift(g), g, 0), 0, 64);
    CHECK(c.discrepancy.mean <= g.dt());
    CHECK(c.verdict == Verdict::Pass);
  }
  {
    const auto fb = feedback(-0.5);
    const auto ens = build_ensemble(fb, 5000, g, 10);
    const auto c = proposition1_identity_check(ens, project_fixed_point(fb, g), 0, 64);
    CHECK(c.discrepancy.mean <= c.bound);
    CHECK(c.r_squared > 0.99);
    CHECK(c.verdict == Verdict::Pass);
  }
}

TEST_CASE("invertibility reports") {
  const TimeGrid g(128);
  {
    const auto ens = build_ensemble(DriftSpec::zero(g), 1000, g, 11);
    const auto r = invertibility_report(ens, project_deterministic(DriftSpec::zero(g), g), 128);
    CHECK(r.gap == 0.0);
    CHECK(r.verdict == InvertibilityVerdict::EqualityConsistent);
  }
  {
    const auto ens = build_ensemble(sin_drift(g), 5000, g, 12);
    const auto r = invertibility_report(ens, project_deterministic(sin_drift(g), g), 128);
    CHECK(r.verdict == InvertibilityVerdict::EqualityConsistent);
    REQUIRE(r.reconstruction.has_value());
    CHECK(r.reconstruction->converged);
    CHECK(r.reconstruction->max_residual <= 1e-10);
    CHECK(r.jensen == Verdict::Pass);
  }
  {
    const auto fb = feedback(-0.5);
    const auto ens = build_ensemble(fb, 10000, g, 13);
    const auto r = invertibility_report(ens, project_fixed_point(fb, g), 128);
    CHECK(r.verdict == InvertibilityVerdict::EqualityConsistent);
    REQUIRE(r.reconstruction.has_value());
    CHECK(r.reconstruction->max_input_error <= 10.0 * g.dt());
    CHECK(r.reconstruction->max_residual <= 1e-10);
    const auto json = to_json(r);
    CHECK(json["verdict"] == "EQUALITY_CONSISTENT");
  }
}

TEST_CASE("an uninformative projection shows a strict gap") {
  // Projecting a feedback drift onto the constant zero discards what Y
  // reveals about it, so the left side collapses to 1.
  const TimeGrid g(64);
  const auto fb = feedback(-1.0);
  const auto ens = build_ensemble(fb, 10000, g, 14);
  const auto r = invertibility_report(ens, project_deterministic(DriftSpec::zero(g), g), 64);
  CHECK(r.lhs.value == 1.0);
  CHECK(r.verdict == InvertibilityVerdict::StrictInequality);
  CHECK(r.jensen == Verdict::Pass);
  CHECK(!r.reconstruction.has_value());
}

TEST_CASE("signal estimation through the inverse filter") {
  const TimeGrid g(64);
  const auto ramp = CameronMartinPath::from_derivative(g, [](double) { return 1.0; });
  const auto cos_signal = CameronMartinPath::from_derivative(g, [](double t) { return std::cos(t); });
  const auto check = [&](const DriftSpec& drift, const CameronMartinPath& h, std::uint64_t seed) {
    const auto ens = build_ensemble(drift, 4000, g, seed, h);
    const auto est = estimate_h_hat(ens, 64);
    REQUIRE(est.bias.size() == 65);
    for (std::size_t k = 0; k <= 64; ++k) {
      CHECK(std::abs(est.bias[k]) <= 3.0 * est.se[k] + g.dt());
      CHECK(est.h[k] == doctest::Approx(h.path()[k]));
    }
    CHECK(est.verdict == Verdict::Pass);
  };
  check(DriftSpec::zero(g), cos_signal, 15);
  check(sin_drift(g), ramp, 16);
  check(feedback(1.0), cos_signal, 17);
  check(feedback(-0.5), cos_signal, 18);
}

TEST_CASE("signal estimation refuses without a realizable inverse") {
  const TimeGrid g(32);
  const auto opaque = DriftSpec::state_feedback([](double, double x) { return std::tanh(x); });
  CHECK_THROWS_AS(estimate_h_hat(build_ensemble(opaque, 100, g, 1), 32), NotRealizableError);
  InvertibilityReport gate;
  gate.verdict = InvertibilityVerdict::StrictInequality;
  CHECK_THROWS_AS(estimate_h_hat(build_ensemble(feedback(1.0), 100, g, 1), 32, &gate), NotRealizableError);
}

TEST_CASE("empty-set probability") {
  for (double beta : {0.5, 4.0}) {
    const auto e = exponential_chaos(beta, 45);
    const auto r = empty_set_probability(e);
    CHECK(r.p_empty.value == doctest::Approx(std::exp(-beta)).epsilon(1e-10));
    // As a probability density f / E[f] the empty set carries mass one.
    std::vector<ChaosKernel> kernels = e.kernels();
    for (auto& k : kernels) std::get<ConstantKernel>(k.form).c /= e.mean();
    const ChaosExpansion density("density", kernels);
    CHECK(subset_mass(density, IntervalUnion::empty(TimeGrid(8))) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(empty_set_probability(normalize_spectral(monomial_chaos(4))).p_empty.value == doctest::Approx(9.0 / 105.0));

  const TimeGrid g(128);
  {
    const auto ens = build_ensemble(DriftSpec::zero(g), 1000, g, 19);
    const auto inv = invertibility_report(ens, project_deterministic(DriftSpec::zero(g), g), 128);
    const auto r = empty_set_probability(inv, g);
    CHECK(r.p_empty.value == 1.0);
    CHECK(r.lower_bound.value == 1.0);
    CHECK(r.verdict == Verdict::Pass);
  }
  {
    const auto ens = build_ensemble(sin_drift(g), 20000, g, 20);
    const auto inv = invertibility_report(ens, project_deterministic(sin_drift(g), g), 128);
    const auto r = empty_set_probability(inv, g);
    CHECK(r.p_empty.value * inv.lhs.value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(r.p_empty.value - std::exp(-kSinSq)) <= 3.0 * r.p_empty.std_error + g.dt());
    CHECK(std::abs(r.lower_bound.value - 0.76134) <= 3.0 * r.lower_bound.std_error + g.dt());
    CHECK(r.equality_expected);
    CHECK(r.verdict == Verdict::Pass);
    CHECK_THROWS_AS(empty_set_probability(invertibility_report(ens, project_deterministic(sin_drift(g), g), 64), g),
                    DimensionError);
  }
}

TEST_CASE("surface routine matches per-interval estimates") {
  const TimeGrid g(64);
  const auto drift = sin_drift(g);
  const auto ens = build_ensemble(drift, 4000, g, 21);
  const std::vector<std::size_t> s_nodes{0, 16, 32}, t_nodes{16, 32, 64};
  GateOptions one, three;
  one.workers = 1;
  three.workers = 3;
  const auto projection = [&](std::size_t s) { return project_deterministic(drift, g, s); };
  const auto surface = rho_J_surface(ens, projection, s_nodes, t_nodes, one);
  REQUIRE(surface.size() == 6);
  for (const auto& p : surface) {
    CHECK(p.estimate.s < p.estimate.t);
    const auto single = rho_J_lemma1(ens, projection(p.estimate.s), p.estimate.s, p.estimate.t, one);
    CHECK(p.estimate.value == doctest::Approx(single.value).epsilon(1e-12));
    CHECK(p.estimate.std_error == doctest::Approx(single.std_error).epsilon(1e-8));
    CHECK(p.closed_form == doctest::Approx(sin_surface(g.node(p.estimate.s), g.node(p.estimate.t))).epsilon(g.dt()));
  }
  const auto csv = surface_csv(surface, g);
  CHECK(csv.rfind("s,t,rho,se,closed_form\n0,0.25,", 0) == 0);
  CHECK(csv == surface_csv(rho_J_surface(ens, projection, s_nodes, t_nodes, three), g));

  const auto fb = feedback(-0.5);
  const auto fens = build_ensemble(fb, 1000, g, 22);
  const auto fs = rho_J_surface(fens, [&](std::size_t) { return project_fixed_point(fb, g); }, {0}, {32, 64});
  CHECK(std::isnan(fs[0].closed_form));
  CHECK(surface_csv(fs, g).find(",\n") != std::string::npos);
}

TEST_CASE("innovation check with matched drifts") {
  const TimeGrid g(64);
  InnovationOptions options;
  options.permutations = 200;
  {
    const auto det = sin_drift(g);
    const auto y = build_ensemble(det, 4000, g, 23);
    const auto z = build_ensemble(det, 4000, g, 24);
    const auto r = corollary1_check(y, project_deterministic(det, g), z, 64, options);
    CHECK(r.condition_i.verdict == Verdict::Pass);
    CHECK(r.condition_ii.verdict == Verdict::Pass);
    CHECK(r.condition_iii.verdict == Verdict::Pass);
    CHECK(r.reconstruction_error < 1e-12);
    CHECK(r.verdict == Verdict::Pass);
    CHECK(r.condition_i.nodes.size() == 8);
    CHECK(r.condition_i.nodes.back() == 64);
  }
  {
    const auto zero = DriftSpec::zero(g);
    const auto y = build_ensemble(zero, 2000, g, 25);
    const auto z = build_ensemble(zero, 2000, g, 26);
    const auto r = corollary1_check(y, project_deterministic(zero, g), z, 64, options);
    CHECK(r.verdict == Verdict::Pass);
    CHECK(r.reconstruction_error == 0.0);
  }
  {
    const auto fb = feedback(-0.5);
    const auto p = project_fixed_point(fb, g);
    const auto y = build_ensemble(fb, 10000, g, 27);
    const auto z = build_ensemble(output_feedback_drift(p), 10000, g, 28);
    const auto r = corollary1_check(y, p, z, 64, options);
    CHECK(r.condition_i.verdict == Verdict::Pass);
    CHECK(r.condition_ii.verdict == Verdict::Pass);
    CHECK(r.condition_iii.verdict == Verdict::Pass);
    CHECK(r.reconstruction_error <= 10.0 * g.dt());
    CHECK(to_json(r)["verdict"] == "PASS");
  }
}

TEST_CASE("innovation check rejects a mismatched drift") {
  const TimeGrid g(64);
  const auto shifted = DriftSpec::deterministic(CameronMartinPath::from_derivative(g, [](double) { return 1.0; }));
  const auto y = build_ensemble(shifted, 4000, g, 29);
  const auto z = build_ensemble(DriftSpec::zero(g), 4000, g, 30);
  InnovationOptions options;
  options.permutations = 200;
  const auto r = corollary1_check(y, project_deterministic(shifted, g), z, 64, options);
  CHECK(r.condition_i.verdict == Verdict::Fail);
  CHECK(r.condition_i.ks_p_proxy < 0.01);
  CHECK(r.condition_iii.verdict == Verdict::Fail);
  CHECK(r.reconstruction_error > 0.5);
  CHECK(r.verdict == Verdict::Fail);
}

TEST_CASE("estimate method and verdict names") {
  CHECK(std::string(to_string(EstimateMethod::ChaosExact)) == "chaos-exact");
  CHECK(std::string(to_string(EstimateMethod::LemmaOneMC)) == "monte-carlo");
  CHECK(std::string(to_string(EstimateMethod::ClosedForm)) == "closed-form");
  CHECK(std::string(to_string(InvertibilityVerdict::StrictInequality)) == "STRICT_INEQUALITY");
  CHECK(std::string(to_string(InvertibilityVerdict::Inconclusive)) == "INCONCLUSIVE");
}
