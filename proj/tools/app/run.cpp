#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>

#include "experiment.hpp"
#include "tsirelson/brownian.hpp"
#include "tsirelson/builtins.hpp"
#include "tsirelson/chaos.hpp"
#include "tsirelson/conditional.hpp"
#include "tsirelson/errors.hpp"
#include "tsirelson/format.hpp"
#include "tsirelson/parallel.hpp"
#include "tsirelson/report.hpp"
#include "tsirelson/rng.hpp"
#include "tsirelson/spectral.hpp"
#include "tsirelson/stats.hpp"

namespace tsirelson::app {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kFitStream = 0x6669742d70617468ULL;
constexpr std::uint64_t kShiftStream = 0x7368696674656421ULL;
constexpr std::uint64_t kInnovationStream = 0x696e6e6f76617465ULL;

struct Context {
  const ExperimentConfig& config;
  std::ostream& log;
  TimeGrid grid;
  json results = json::object();
  bool failed = false;

  GateOptions gate() const {
    GateOptions g;
    g.normalization_paths = config.normalization_paths;
    g.tolerance = config.tolerance;
    return g;
  }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(fs::path(config.out) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (fs::path(config.out) / name).string());
    out << content;
  }

  void fail_if(bool condition, const std::string& reason) {
    if (!condition) return;
    failed = true;
    results["failures"].push_back(reason);
    log << "FAIL: " << reason << '\n';
  }
};

// Critical value for `points` simultaneous comparisons at the configured sigma level.
double family_sigmas(double sigmas, std::size_t points) {
  if (points <= 1) return sigmas;
  const double alpha = std::erfc(sigmas / std::sqrt(2.0));
  return normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(points)));
}

class Projections {
 public:
  Projections(const Context& ctx, const DriftSpec& drift) : ctx_(ctx), drift_(drift) {}

  ProjectedDrift at(std::size_t s) {
    const auto& cfg = ctx_.config.projection;
    std::string method = cfg.method;
    if (method == "auto") method = drift_.kind() == DriftKind::Deterministic ? "exact" : "regression";
    if (method == "exact") {
      if (drift_.kind() != DriftKind::Deterministic) {
        throw ConfigError("/projection/method", "exact projection needs a deterministic drift");
      }
      return project_deterministic(drift_, ctx_.grid, s);
    }
    if (method == "fixed-point") {
      if (s != 0) throw ConfigError("/projection/method", "fixed-point projection starts at 0 only");
      if (!drift_.lipschitz_bound()) {
        throw ConfigError("/projection/method", "fixed-point projection needs a Lipschitz drift");
      }
      return project_fixed_point(drift_, ctx_.grid);
    }
    if (!fit_) {
      const std::size_t paths =
          cfg.fit_paths ? cfg.fit_paths : std::max<std::size_t>(2000, ctx_.config.n_paths / 5);
      const std::uint64_t seed = cfg.fit_seed ? *cfg.fit_seed : splitmix64_mix(ctx_.config.seed ^ kFitStream);
      fit_.emplace(drift_, ctx_.grid, paths, seed);
      ctx_.log << "fitting regression projection on " << paths << " paths\n";
    }
    RegressionOptions options;
    options.features = cfg.features;
    return project_regression(*fit_, s, options);
  }

 private:
  const Context& ctx_;
  const DriftSpec& drift_;
  std::optional<FilterEnsemble> fit_;
};

// ---------------------------------------------------------------------------

void chaos_spectrum(Context& ctx) {
  const auto& cfg = ctx.config;
  const ChaosExpansion original = cfg.chaos.contains("kernels") ? chaos_from_json(cfg.chaos)
                                                                : builtin_chaos(cfg.chaos);
  const ChaosExpansion chaos = cfg.normalize ? normalize_spectral(original) : original;
  const std::vector<double> law = cardinality_law(chaos);
  ctx.write("cardinality.csv", cardinality_csv(law));

  json& r = ctx.results;
  r["label"] = original.label();
  r["normalized"] = cfg.normalize;
  r["mean"] = original.mean();
  r["second_moment"] = original.total_mass();
  r["truncation_tail"] = chaos.truncation_tail();
  r["cardinality"] = law;
  double law_sum = 0.0;
  for (double m : law) law_sum += m;
  r["cardinality_sum"] = law_sum;
  r["empty_set"] = to_json(empty_set_probability(chaos));

  const TimeGrid grid = chaos.grid().value_or(ctx.grid);
  if (!cfg.intervals.empty()) {
    std::string csv = "s,t,mass\n";
    json subsets = json::array();
    for (const auto& [s, t] : cfg.intervals) {
      const double mass = subset_mass(chaos, IntervalUnion::make(grid, {{s, t}}));
      csv += csv_row({format_real(s), format_real(t), format_real(mass)});
      subsets.push_back({{"s", s}, {"t", t}, {"mass", mass}});
    }
    r["subsets"] = subsets;
    r["union_mass"] = subset_mass(chaos, IntervalUnion::make(grid, cfg.intervals));
    ctx.write("subsets.csv", csv);
  }

  if (cfg.mc_paths > 0) {
    std::vector<double> squares(cfg.mc_paths);
    parallel_for(cfg.mc_paths, [&](std::size_t i) {
      const double f = evaluate_chaos_on_path(chaos, sample_brownian(grid, RngStream(cfg.seed, i)));
      squares[i] = f * f;
    });
    const MeanEstimate mc = mean_estimate(squares);
    const double target = chaos.total_mass();
    const double bound = cfg.tolerance.sigmas * mc.std_error;
    r["monte_carlo_second_moment"] = {{"estimate", to_json(mc)}, {"target", target}, {"bound", bound}};
    ctx.fail_if(std::abs(mc.mean - target) > bound, "Monte Carlo second moment outside sigmas * SE");
  }
}

std::size_t interval_points(const ExperimentConfig& cfg) {
  return std::max<std::size_t>(1, cfg.intervals.size());
}

void filter_spectrum(Context& ctx) {
  const auto& cfg = ctx.config;
  const DriftSpec drift = builtin_drift(cfg.drift, ctx.grid);
  const FilterEnsemble ensemble(drift, ctx.grid, cfg.n_paths, cfg.seed);
  Projections projections(ctx, drift);
  std::vector<std::pair<double, double>> intervals = cfg.intervals;
  if (intervals.empty()) intervals.emplace_back(0.0, 1.0);

  std::size_t t_max = 0;
  for (const auto& iv : intervals) t_max = std::max(t_max, ctx.grid.snap(iv.second));
  GateOptions gate = ctx.gate();
  gate.normalization = require_normalization(ensemble, t_max, gate);
  ctx.results["normalization"] = to_json(*gate.normalization);

  const double z = family_sigmas(cfg.tolerance.sigmas, interval_points(cfg));
  std::map<std::size_t, ProjectedDrift> cache;
  std::string csv = "s,t,rho,se,closed_form\n";
  json rows = json::array();
  for (const auto& [s_time, t_time] : intervals) {
    const std::size_t s = ctx.grid.snap(s_time), t = ctx.grid.snap(t_time);
    auto it = cache.find(s);
    if (it == cache.end()) it = cache.emplace(s, projections.at(s)).first;
    const SpectralEstimate est = rho_J_lemma1(ensemble, it->second, s, t, gate);
    json row = {{"s", ctx.grid.node(s)}, {"t", ctx.grid.node(t)}, {"rho", to_json(est)},
                {"projection", projection_summary(it->second)}};
    std::string closed;
    if (drift.kind() == DriftKind::Deterministic) {
      const double cf = rho_J_closed_form(drift.deterministic_path(), s, t).value;
      closed = format_real(cf);
      row["closed_form"] = cf;
      const double bound = z * est.std_error + cfg.tolerance.slack * ctx.grid.dt();
      ctx.fail_if(std::abs(est.value - cf) > bound,
                  "rho on [" + format_real(ctx.grid.node(s)) + ", " + format_real(ctx.grid.node(t)) +
                      "] disagrees with the closed form");
    }
    csv += csv_row({format_real(ctx.grid.node(s)), format_real(ctx.grid.node(t)), format_real(est.value),
                    format_real(est.std_error), closed});
    rows.push_back(row);
  }
  ctx.results["intervals"] = rows;
  ctx.write("spectrum.csv", csv);
}

InvertibilityReport run_invertibility(Context& ctx, const FilterEnsemble& ensemble,
                                      const ProjectedDrift& projected, std::size_t t) {
  InvertibilityOptions options;
  options.gate = ctx.gate();
  InvertibilityReport report = invertibility_report(ensemble, projected, t, options);
  ctx.fail_if(report.jensen == Verdict::Fail, "Jensen inequality violated beyond tolerance");
  if (report.reconstruction) {
    const auto& rec = *report.reconstruction;
    ctx.fail_if(!rec.converged || rec.max_input_error > 10.0 * ctx.grid.dt(),
                "EQUALITY_CONSISTENT but the fixed-point inverse does not reconstruct the input");
  }
  return report;
}

void invertibility(Context& ctx) {
  const auto& cfg = ctx.config;
  const DriftSpec drift = builtin_drift(cfg.drift, ctx.grid);
  const FilterEnsemble ensemble(drift, ctx.grid, cfg.n_paths, cfg.seed);
  Projections projections(ctx, drift);
  const ProjectedDrift projected = projections.at(0);
  const std::size_t t = ctx.grid.snap(cfg.t);

  const InvertibilityReport report = run_invertibility(ctx, ensemble, projected, t);
  json& r = ctx.results;
  r["invertibility"] = to_json(report);
  r["projection"] = projection_summary(projected);
  if (cfg.expect == "equality") {
    ctx.fail_if(report.verdict != InvertibilityVerdict::EqualityConsistent, "expected EQUALITY_CONSISTENT");
  } else if (cfg.expect == "strict") {
    ctx.fail_if(report.verdict != InvertibilityVerdict::StrictInequality, "expected STRICT_INEQUALITY");
  }

  GateOptions gate = ctx.gate();
  gate.normalization = report.normalization;
  const PropositionOneCheck prop = proposition1_identity_check(ensemble, projected, 0, t, gate);
  r["identity_check"] = to_json(prop);
  ctx.fail_if(prop.verdict == Verdict::Fail, "conditional identity check failed");

  if (t == ctx.grid.n_steps()) {
    const EmptySetReport empty = empty_set_probability(report, ctx.grid, cfg.tolerance);
    r["empty_set"] = to_json(empty);
    ctx.fail_if(empty.verdict == Verdict::Fail, "empty-set probability below its lower bound");
  }
  if (projected.method() == ProjectionMethod::Regression) {
    ctx.write("projection_diagnostics.csv", projected.diagnostics_csv());
  }
  ctx.write("invertibility.csv",
            "t,lhs,lhs_se,rhs,rhs_se,gap,gap_se,verdict\n" +
                csv_row({format_real(ctx.grid.node(t)), format_real(report.lhs.value),
                         format_real(report.lhs.std_error), format_real(report.rhs.value),
                         format_real(report.rhs.std_error), format_real(report.gap),
                         format_real(report.gap_se), to_string(report.verdict)}));
}

void estimate_h(Context& ctx) {
  const auto& cfg = ctx.config;
  const DriftSpec drift = builtin_drift(cfg.drift, ctx.grid);
  const CameronMartinPath h = builtin_signal(cfg.signal, ctx.grid);
  const std::size_t t = ctx.grid.snap(cfg.t);

  const FilterEnsemble ensemble(drift, ctx.grid, cfg.n_paths, cfg.seed);
  Projections projections(ctx, drift);
  const InvertibilityReport gate = run_invertibility(ctx, ensemble, projections.at(0), t);
  ctx.results["invertibility"] = to_json(gate);

  const FilterEnsemble shifted(drift, ctx.grid, cfg.n_paths, splitmix64_mix(cfg.seed ^ kShiftStream), h);
  const HHatEstimate est = estimate_h_hat(shifted, t, &gate, cfg.tolerance);
  ctx.results["h_hat"] = to_json(est);
  ctx.fail_if(est.verdict == Verdict::Fail, "estimated signal is biased beyond tolerance");
  ctx.write("h_hat.csv", h_hat_csv(est, ctx.grid));
}

void innovation_check(Context& ctx) {
  const auto& cfg = ctx.config;
  const DriftSpec drift = builtin_drift(cfg.drift, ctx.grid);
  const FilterEnsemble y_ensemble(drift, ctx.grid, cfg.n_paths, cfg.seed);
  Projections projections(ctx, drift);
  const ProjectedDrift projected = projections.at(0);
  const std::size_t t = ctx.grid.snap(cfg.t);

  DriftSpec xi = drift;
  if (cfg.xi.is_string()) {
    if (drift.kind() != DriftKind::Deterministic) xi = output_feedback_drift(projected);
  } else {
    xi = builtin_drift(cfg.xi, ctx.grid);
  }
  const FilterEnsemble z_ensemble(xi, ctx.grid, cfg.n_paths, splitmix64_mix(cfg.seed ^ kInnovationStream));

  InnovationOptions options;
  options.gate = ctx.gate();
  const InnovationCheckReport report = corollary1_check(y_ensemble, projected, z_ensemble, t, options);
  ctx.results["innovation"] = to_json(report);
  ctx.results["projection"] = projection_summary(projected);
  ctx.fail_if(report.verdict == Verdict::Fail, "innovation conditions not met");
  ctx.fail_if(report.reconstruction_error > 10.0 * ctx.grid.dt(),
              "F^xi(innovation) does not reproduce the observation");

  std::string csv = "t,mean_z,variance_z\n";
  const auto& c1 = report.condition_i;
  for (std::size_t j = 0; j < c1.nodes.size(); ++j) {
    csv += csv_row({format_real(ctx.grid.node(c1.nodes[j])), format_real(c1.mean_z[j]),
                    format_real(c1.variance_z[j])});
  }
  ctx.write("marginals.csv", csv);
}

void figure2_surface(Context& ctx) {
  const auto& cfg = ctx.config;
  const DriftSpec drift = builtin_drift(cfg.drift, ctx.grid);
  const FilterEnsemble ensemble(drift, ctx.grid, cfg.n_paths, cfg.seed);
  Projections projections(ctx, drift);
  const std::size_t P = cfg.surface_points;
  std::vector<std::size_t> s_nodes, t_nodes;
  for (std::size_t i = 0; i < P; ++i) s_nodes.push_back(ctx.grid.snap(static_cast<double>(i) / P));
  for (std::size_t j = 1; j <= P; ++j) t_nodes.push_back(ctx.grid.snap(static_cast<double>(j) / P));

  GateOptions gate = ctx.gate();
  const std::vector<SurfacePoint> surface =
      rho_J_surface(ensemble, [&](std::size_t s) { return projections.at(s); }, s_nodes, t_nodes, gate);
  ctx.write("surface.csv", surface_csv(surface, ctx.grid));

  const double z = family_sigmas(cfg.tolerance.sigmas, surface.size());
  std::size_t violations = 0;
  double worst = 0.0;
  for (const auto& p : surface) {
    if (std::isnan(p.closed_form)) continue;
    const double excess = std::abs(p.estimate.value - p.closed_form) -
                          (z * p.estimate.std_error + cfg.tolerance.slack * ctx.grid.dt());
    worst = std::max(worst, excess);
    if (excess > 0.0) ++violations;
  }
  json& r = ctx.results;
  r["points"] = surface.size();
  r["family_sigmas"] = z;
  r["closed_form_violations"] = violations;
  for (const auto& p : surface) {
    if (p.estimate.s == 0 && p.estimate.t == ctx.grid.n_steps()) r["full_interval"] = to_json(p.estimate);
  }
  ctx.fail_if(violations > 0, std::to_string(violations) + " surface points disagree with the closed form");
}

}  // namespace

int run(const ExperimentConfig& config, std::ostream& log) {
  if (config.workers > 0) set_default_workers(config.workers);
  fs::create_directories(config.out);
  Context ctx{config, log, TimeGrid(config.n_steps)};
  if (config.command != Command::ChaosSpectrum && (config.n_steps & (config.n_steps - 1)) != 0) {
    log << "warning: n_steps = " << config.n_steps << " is not a power of two\n";
  }

  try {
    switch (config.command) {
      case Command::ChaosSpectrum: chaos_spectrum(ctx); break;
      case Command::FilterSpectrum: filter_spectrum(ctx); break;
      case Command::Invertibility: invertibility(ctx); break;
      case Command::EstimateH: estimate_h(ctx); break;
      case Command::InnovationCheck: innovation_check(ctx); break;
      case Command::Figure2Surface: figure2_surface(ctx); break;
    }
  } catch (const HypothesisError& e) {
    ctx.fail_if(true, e.what());
  } catch (const NotRealizableError& e) {
    ctx.fail_if(true, e.what());
  }

  json report = {{"command", to_string(config.command)},
                 {"config", to_json(config)},
                 {"results", ctx.results},
                 {"verdict", ctx.failed ? "FAIL" : "PASS"}};
  ctx.write("report.json", report.dump(2) + "\n");
  return ctx.failed ? kExitVerdictFail : kExitOk;
}

}  // namespace tsirelson::app
