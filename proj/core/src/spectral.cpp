#include "tsirelson/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "tsirelson/errors.hpp"
#include "tsirelson/format.hpp"
#include "tsirelson/parallel.hpp"
#include "tsirelson/rng.hpp"

namespace tsirelson {

namespace {

constexpr std::size_t kChunkPaths = 256;

// Running mean and centred second moment; merged with Chan's update.
struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }

  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    if (n == 0.0) {
      *this = o;
      return;
    }
    const double total = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * n * o.n / total;
    n = total;
  }

  MeanEstimate estimate() const {
    MeanEstimate est;
    est.mean = mean;
    est.n = static_cast<std::size_t>(n);
    if (n > 1.0) est.std_error = std::sqrt(std::max(0.0, m2 / (n - 1.0)) / n);
    return est;
  }
};

// Runs chunk(c, begin, end) over fixed-size path chunks, `workers` chunks at
// a time, and hands each finished chunk to merge(c) in chunk order.
void for_each_chunk(std::size_t n_paths, std::size_t workers,
                    const std::function<void(std::size_t, std::size_t, std::size_t, std::size_t)>& chunk,
                    const std::function<void(std::size_t)>& merge) {
  if (workers == 0) workers = default_workers();
  const std::size_t n_chunks = (n_paths + kChunkPaths - 1) / kChunkPaths;
  for (std::size_t group = 0; group < n_chunks; group += workers) {
    const std::size_t size = std::min(workers, n_chunks - group);
    parallel_for(
        size,
        [&](std::size_t g) {
          const std::size_t c = group + g;
          chunk(g, c, c * kChunkPaths, std::min(n_paths, (c + 1) * kChunkPaths));
        },
        workers);
    for (std::size_t g = 0; g < size; ++g) merge(g);
  }
}

Verdict grade(double deviation, double bound) {
  if (deviation <= bound) return Verdict::Pass;
  if (deviation <= 2.0 * bound) return Verdict::Warn;
  return Verdict::Fail;
}

Verdict worst(Verdict a, Verdict b) { return static_cast<int>(a) > static_cast<int>(b) ? a : b; }

void check_interval(const TimeGrid& grid, std::size_t s, std::size_t t) {
  if (s > t || t > grid.n_steps()) throw DimensionError("interval nodes must satisfy s <= t <= n");
}

SpectralEstimate from_mean(const MeanEstimate& m, EstimateMethod method, std::size_t s, std::size_t t) {
  return {m.mean, m.std_error, m.n, method, s, t};
}

// Probability that a standard normal exceeds `sigmas` in absolute value.
double two_sided_level(double sigmas) { return std::erfc(sigmas / std::sqrt(2.0)); }

}  // namespace

const char* to_string(EstimateMethod m) noexcept {
  switch (m) {
    case EstimateMethod::ChaosExact: return "chaos-exact";
    case EstimateMethod::LemmaOneMC: return "monte-carlo";
    case EstimateMethod::ClosedForm: return "closed-form";
  }
  return "unknown";
}

const char* to_string(InvertibilityVerdict v) noexcept {
  switch (v) {
    case InvertibilityVerdict::EqualityConsistent: return "EQUALITY_CONSISTENT";
    case InvertibilityVerdict::StrictInequality: return "STRICT_INEQUALITY";
    case InvertibilityVerdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

// ---------------------------------------------------------------------------
// Spectral mass from the projected drift

NormalizationCheck require_normalization(const FilterEnsemble& ensemble, std::size_t t_node,
                                         const GateOptions& options) {
  NormalizationCheck check;
  if (options.normalization) {
    check = *options.normalization;
  } else {
    const std::uint64_t seed = splitmix64_mix(ensemble.seed() ^ 0x6e6f726d616c697aULL);
    check = normalization_check(ensemble.drift(), ensemble.grid(), t_node,
                                std::max<std::size_t>(1000, options.normalization_paths), seed,
                                options.tolerance);
  }
  if (check.verdict == Verdict::Fail) {
    throw HypothesisError("normalization check failed for drift '" + ensemble.drift().label() +
                          "': E[exp(...)] = " + format_real(check.doleans.mean) + " +- " +
                          format_real(check.doleans.std_error));
  }
  return check;
}

std::vector<double> lemma1_logs(const FilterEnsemble& ensemble, const ProjectedDrift& projected,
                                std::size_t s, std::size_t t, std::size_t workers) {
  const TimeGrid& grid = ensemble.grid();
  check_interval(grid, s, t);
  if (projected.start_node() != s) throw DimensionError("projection must start at s");
  if (!(projected.grid() == grid)) throw DimensionError("projection grid differs from ensemble grid");
  const double dt = grid.dt();
  return ensemble.map(
      [&](const EnsembleRecord& rec) {
        CausalEvaluator v = projected.start();
        const auto y = rec.Y.values();
        double log = 0.0;
        for (std::size_t k = s; k < t; ++k) {
          const double vk = v(k, y.subspan(s, k - s + 1));
          if (!std::isfinite(vk)) throw DriftEvaluationError(k, vk, rec.id);
          log += vk * (y[k + 1] - y[k]) - 0.5 * vk * vk * dt;
        }
        return log;
      },
      workers);
}

SpectralEstimate rho_J_lemma1(const FilterEnsemble& ensemble, const ProjectedDrift& projected,
                              std::size_t s, std::size_t t, const GateOptions& options) {
  check_interval(ensemble.grid(), s, t);
  require_normalization(ensemble, t, options);
  const std::vector<double> logs = lemma1_logs(ensemble, projected, s, t, options.workers);
  return from_mean(exp_mean_estimate(logs), EstimateMethod::LemmaOneMC, s, t);
}

SpectralEstimate rho_J_closed_form(const CameronMartinPath& h, std::size_t s, std::size_t t) {
  check_interval(h.grid(), s, t);
  double energy = 0.0;
  for (std::size_t k = s; k < t; ++k) energy += h.derivative()[k] * h.derivative()[k];
  return {std::exp(energy * h.grid().dt()), 0.0, 0, EstimateMethod::ClosedForm, s, t};
}

SpectralEstimate rho_J_chaos(const ChaosExpansion& chaos, const TimeGrid& grid, std::size_t s,
                             std::size_t t) {
  check_interval(grid, s, t);
  const IntervalUnion region = IntervalUnion::make(grid, {{grid.node(s), grid.node(t)}});
  return {subset_mass(chaos, region), 0.0, 0, EstimateMethod::ChaosExact, s, t};
}

std::vector<SurfacePoint> rho_J_surface(
    const FilterEnsemble& ensemble,
    const std::function<ProjectedDrift(std::size_t s)>& projection_at,
    const std::vector<std::size_t>& s_nodes, const std::vector<std::size_t>& t_nodes,
    const GateOptions& options) {
  const TimeGrid& grid = ensemble.grid();
  const double dt = grid.dt();
  const std::set<std::size_t> s_set(s_nodes.begin(), s_nodes.end());
  const std::set<std::size_t> t_set(t_nodes.begin(), t_nodes.end());
  if (s_set.empty() || t_set.empty()) throw DimensionError("surface needs interval endpoints");
  if (*t_set.rbegin() > grid.n_steps()) throw DimensionError("surface endpoint beyond the grid");

  struct Row {
    std::size_t s;
    std::vector<std::size_t> ts;  // t > s in increasing order
    std::size_t offset;           // first pair index
  };
  std::vector<Row> rows;
  std::vector<ProjectedDrift> projections;
  std::size_t n_pairs = 0;
  for (std::size_t s : s_set) {
    Row row{s, {}, n_pairs};
    for (std::size_t t : t_set) {
      if (t > s) row.ts.push_back(t);
    }
    if (row.ts.empty()) continue;
    n_pairs += row.ts.size();
    projections.push_back(projection_at(s));
    if (projections.back().start_node() != s) throw DimensionError("projection must start at s");
    rows.push_back(std::move(row));
  }
  if (n_pairs == 0) throw DimensionError("surface has no pair with s < t");
  require_normalization(ensemble, *t_set.rbegin(), options);

  const std::size_t workers = options.workers == 0 ? default_workers() : options.workers;
  std::vector<std::vector<Moments>> partial(workers, std::vector<Moments>(n_pairs));
  std::vector<Moments> total(n_pairs);
  for_each_chunk(
      ensemble.n_paths(), workers,
      [&](std::size_t slot, std::size_t, std::size_t begin, std::size_t end) {
        auto& acc = partial[slot];
        std::fill(acc.begin(), acc.end(), Moments{});
        for (std::size_t i = begin; i < end; ++i) {
          const EnsembleRecord rec = ensemble.record(i);
          const auto y = rec.Y.values();
          for (std::size_t r = 0; r < rows.size(); ++r) {
            const Row& row = rows[r];
            CausalEvaluator v = projections[r].start();
            double log = 0.0;
            std::size_t next = 0;
            for (std::size_t k = row.s; k < row.ts.back(); ++k) {
              const double vk = v(k, y.subspan(row.s, k - row.s + 1));
              if (!std::isfinite(vk)) throw DriftEvaluationError(k, vk, i);
              log += vk * (y[k + 1] - y[k]) - 0.5 * vk * vk * dt;
              if (k + 1 == row.ts[next]) acc[row.offset + next++].add(std::exp(log));
            }
          }
        }
      },
      [&](std::size_t slot) {
        for (std::size_t p = 0; p < n_pairs; ++p) total[p].merge(partial[slot][p]);
      });

  const bool closed = ensemble.drift().kind() == DriftKind::Deterministic && !ensemble.shift();
  std::vector<SurfacePoint> out;
  out.reserve(n_pairs);
  for (const Row& row : rows) {
    for (std::size_t j = 0; j < row.ts.size(); ++j) {
      SurfacePoint point;
      point.estimate = from_mean(total[row.offset + j].estimate(), EstimateMethod::LemmaOneMC, row.s,
                                 row.ts[j]);
      point.closed_form =
          closed ? rho_J_closed_form(ensemble.drift().deterministic_path(), row.s, row.ts[j]).value
                 : std::numeric_limits<double>::quiet_NaN();
      out.push_back(point);
    }
  }
  return out;
}

std::string surface_csv(const std::vector<SurfacePoint>& surface, const TimeGrid& grid) {
  std::string out = "s,t,rho,se,closed_form\n";
  for (const auto& p : surface) {
    const std::string closed = std::isnan(p.closed_form) ? std::string() : format_real(p.closed_form);
    out += csv_row({format_real(grid.node(p.estimate.s)), format_real(grid.node(p.estimate.t)),
                    format_real(p.estimate.value), format_real(p.estimate.std_error), closed});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conditional identity

PropositionOneCheck proposition1_identity_check(const FilterEnsemble& ensemble,
                                                const ProjectedDrift& projected, std::size_t s,
                                                std::size_t t, const GateOptions& options) {
  const TimeGrid& grid = ensemble.grid();
  check_interval(grid, s, t);
  require_normalization(ensemble, t, options);
  const std::vector<double> logs = lemma1_logs(ensemble, projected, s, t, options.workers);
  const double dt = grid.dt();
  const std::size_t N = ensemble.n_paths();
  constexpr std::size_t F = 5;
  if (N < 10 * F) throw Error("identity check needs at least 50 paths");

  std::vector<double> doleans(N);
  Eigen::MatrixXd X(N, F);
  ensemble.for_each(
      [&](const EnsembleRecord& rec) {
        double log = 0.0;
        for (std::size_t k = s; k < t; ++k) {
          log -= rec.drift[k] * rec.input.increment(k) + 0.5 * rec.drift[k] * rec.drift[k] * dt;
        }
        doleans[rec.id] = std::exp(log);
        double area = 0.0;
        for (std::size_t k = s; k < t; ++k) area += (rec.Y[k] - rec.Y[s]) * dt;
        const double level = rec.Y[t] - rec.Y[s];
        X.row(static_cast<Eigen::Index>(rec.id)) << 1.0, std::exp(-logs[rec.id]), level, level * level,
            area;
      },
      options.workers);

  const Eigen::Map<const Eigen::VectorXd> e(doleans.data(), static_cast<Eigen::Index>(N));
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::VectorXd xty = X.transpose() * e;
  const Eigen::VectorXd beta = xtx.completeOrthogonalDecomposition().solve(xty);
  const Eigen::VectorXd fit = X * beta;

  std::vector<double> discrepancy(N);
  std::vector<double> residual_sq(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const double d = fit(idx) - X(idx, 1);
    discrepancy[i] = d * d;
    const double r = e(idx) - fit(idx);
    residual_sq[i] = r * r;
  }

  PropositionOneCheck check;
  check.discrepancy = mean_estimate(discrepancy);
  const double ssr = pairwise_sum(residual_sq);
  const MeanEstimate e_moments = mean_estimate(doleans);
  const double sst = e_moments.std_error * e_moments.std_error * static_cast<double>(N) *
                     static_cast<double>(N - 1);
  check.r_squared = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : 1.0;
  check.noise_floor = static_cast<double>(F) * (ssr / static_cast<double>(N - F)) / static_cast<double>(N);
  check.bound = options.tolerance.bound(check.discrepancy.std_error, dt) + check.noise_floor;
  check.verdict = grade(check.discrepancy.mean, check.bound);
  return check;
}

// ---------------------------------------------------------------------------
// Jensen gap and inversion

std::vector<double> theorem1_logs(const FilterEnsemble& ensemble, std::size_t t, std::size_t workers) {
  const TimeGrid& grid = ensemble.grid();
  check_interval(grid, 0, t);
  const double dt = grid.dt();
  return ensemble.map(
      [&](const EnsembleRecord& rec) {
        double log = 0.0;
        for (std::size_t k = 0; k < t; ++k) {
          log += rec.drift[k] * rec.Y.increment(k) - 0.5 * rec.drift[k] * rec.drift[k] * dt;
        }
        return log;
      },
      workers);
}

SpectralEstimate theorem1_rhs(const FilterEnsemble& ensemble, std::size_t t, std::size_t workers) {
  const std::vector<double> logs = theorem1_logs(ensemble, t, workers);
  return from_mean(exp_mean_estimate(logs), EstimateMethod::LemmaOneMC, 0, t);
}

InvertibilityReport invertibility_report(const FilterEnsemble& ensemble,
                                         const ProjectedDrift& projected, std::size_t t,
                                         const InvertibilityOptions& options) {
  const TimeGrid& grid = ensemble.grid();
  check_interval(grid, 0, t);
  InvertibilityReport report;
  report.t = t;
  report.normalization = require_normalization(ensemble, t, options.gate);

  const std::vector<double> lhs_logs = lemma1_logs(ensemble, projected, 0, t, options.gate.workers);
  const std::vector<double> rhs_logs = theorem1_logs(ensemble, t, options.gate.workers);
  report.lhs = from_mean(exp_mean_estimate(lhs_logs), EstimateMethod::LemmaOneMC, 0, t);
  report.rhs = from_mean(exp_mean_estimate(rhs_logs), EstimateMethod::LemmaOneMC, 0, t);
  const MeanEstimate diff = exp_difference_estimate(rhs_logs, lhs_logs);
  report.gap = report.rhs.value - report.lhs.value;
  report.gap_se = diff.std_error;
  report.tolerance = options.gate.tolerance.bound(report.gap_se, grid.dt());
  if (std::abs(report.gap) <= report.tolerance) {
    report.verdict = InvertibilityVerdict::EqualityConsistent;
  } else if (report.gap > report.tolerance) {
    report.verdict = InvertibilityVerdict::StrictInequality;
  } else {
    report.verdict = InvertibilityVerdict::Inconclusive;
  }
  report.jensen = report.gap >= -report.tolerance ? Verdict::Pass : Verdict::Fail;

  const DriftSpec& drift = ensemble.drift();
  if (report.verdict == InvertibilityVerdict::EqualityConsistent && drift.lipschitz_bound()) {
    ReconstructionSummary summary;
    summary.paths = std::min(options.reconstruction_paths, ensemble.n_paths());
    for (std::size_t i = 0; i < summary.paths; ++i) {
      const EnsembleRecord rec = ensemble.record(i);
      try {
        const FixedPointResult fp =
            reconstruct_input_fixed_point(drift, rec.Y, 200, options.reconstruction_tol);
        summary.max_residual = std::max(summary.max_residual, fp.residual);
        summary.max_iterations = std::max(summary.max_iterations, fp.iterations);
        for (std::size_t k = 0; k < rec.input.size(); ++k) {
          summary.max_input_error =
              std::max(summary.max_input_error, std::abs(fp.input[k] - rec.input[k]));
        }
      } catch (const NoContractionError& e) {
        summary.converged = false;
        summary.max_residual = std::max(summary.max_residual, e.residual());
        summary.max_iterations = std::max(summary.max_iterations, e.iterations());
      }
    }
    report.reconstruction = summary;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Signal estimation

HHatEstimate estimate_h_hat(const FilterEnsemble& ensemble_h, std::size_t t,
                            const InvertibilityReport* gate, Tolerance tol, std::size_t workers) {
  const TimeGrid& grid = ensemble_h.grid();
  check_interval(grid, 0, t);
  const DriftSpec& drift = ensemble_h.drift();
  if (!drift.lipschitz_bound()) {
    throw NotRealizableError("no realizable inverse: drift '" + drift.label() +
                             "' has no Lipschitz bound");
  }
  if (gate && gate->verdict != InvertibilityVerdict::EqualityConsistent) {
    throw NotRealizableError(std::string("no realizable inverse: invertibility verdict is ") +
                             to_string(gate->verdict));
  }

  const std::size_t nodes = t + 1;
  if (workers == 0) workers = default_workers();
  std::vector<std::vector<Moments>> partial(workers, std::vector<Moments>(nodes));
  std::vector<Moments> total(nodes);
  for_each_chunk(
      ensemble_h.n_paths(), workers,
      [&](std::size_t slot, std::size_t, std::size_t begin, std::size_t end) {
        auto& acc = partial[slot];
        std::fill(acc.begin(), acc.end(), Moments{});
        for (std::size_t i = begin; i < end; ++i) {
          const EnsembleRecord rec = ensemble_h.record(i);
          const FixedPointResult fp = reconstruct_input_fixed_point(drift, rec.Y);
          for (std::size_t k = 0; k < nodes; ++k) acc[k].add(fp.input[k]);
        }
      },
      [&](std::size_t slot) {
        for (std::size_t k = 0; k < nodes; ++k) total[k].merge(partial[slot][k]);
      });

  HHatEstimate est;
  const SamplePath h = ensemble_h.shift() ? ensemble_h.shift()->path() : SamplePath::zeros(grid);
  est.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nodes; ++k) {
    const MeanEstimate m = total[k].estimate();
    est.h.push_back(h[k]);
    est.mean.push_back(m.mean);
    est.bias.push_back(m.mean - h[k]);
    est.se.push_back(m.std_error);
    est.worst_excess =
        std::max(est.worst_excess, std::abs(m.mean - h[k]) - tol.bound(m.std_error, grid.dt()));
  }
  if (est.worst_excess <= 0.0) {
    est.verdict = Verdict::Pass;
  } else {
    est.verdict = Verdict::Warn;
    for (std::size_t k = 0; k < nodes; ++k) {
      if (std::abs(est.bias[k]) > 2.0 * tol.bound(est.se[k], grid.dt())) est.verdict = Verdict::Fail;
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Empty set

EmptySetReport empty_set_probability(const ChaosExpansion& chaos) {
  const double total = chaos.total_mass();
  if (!(total > 0.0)) throw DegenerateFunctionalError("functional has zero second moment");
  EmptySetReport report;
  const std::size_t n = chaos.grid() ? chaos.grid()->n_steps() : 0;
  report.p_empty = {cardinality_mass(chaos, 0) / total, 0.0, 0, EstimateMethod::ChaosExact, 0, n};
  report.lower_bound = report.p_empty;
  report.equality_expected = true;
  report.verdict = Verdict::Pass;
  return report;
}

EmptySetReport empty_set_probability(const InvertibilityReport& inv, const TimeGrid& grid,
                                     Tolerance tol) {
  if (inv.t != grid.n_steps()) throw DimensionError("empty-set probability needs t = 1");
  if (!(inv.lhs.value > 0.0) || !(inv.rhs.value > 0.0)) {
    throw DegenerateFunctionalError("spectral mass estimate is not positive");
  }
  EmptySetReport report;
  const double lhs = inv.lhs.value;
  const double rhs = inv.rhs.value;
  report.p_empty = {1.0 / lhs, inv.lhs.std_error / (lhs * lhs), inv.lhs.n_samples,
                    EstimateMethod::LemmaOneMC, 0, inv.t};
  report.lower_bound = {1.0 / rhs, inv.rhs.std_error / (rhs * rhs), inv.rhs.n_samples,
                        EstimateMethod::LemmaOneMC, 0, inv.t};
  // p - lb = gap / (lhs * rhs) on the coupled ensemble.
  report.tolerance = tol.bound(inv.gap_se / (lhs * rhs), grid.dt());
  report.equality_expected = inv.verdict == InvertibilityVerdict::EqualityConsistent;
  const double diff = report.p_empty.value - report.lower_bound.value;
  const double deviation = report.equality_expected ? std::abs(diff) : std::max(0.0, -diff);
  report.verdict = grade(deviation, report.tolerance);
  return report;
}

// ---------------------------------------------------------------------------
// Innovation check

namespace {

std::vector<std::vector<double>> values_at_nodes(const FilterEnsemble& ensemble,
                                                 const std::vector<std::size_t>& nodes,
                                                 std::size_t workers) {
  std::vector<std::vector<double>> out(nodes.size(), std::vector<double>(ensemble.n_paths()));
  ensemble.for_each(
      [&](const EnsembleRecord& rec) {
        for (std::size_t j = 0; j < nodes.size(); ++j) out[j][rec.id] = rec.Y[nodes[j]];
      },
      workers);
  return out;
}

// Two-sample KS distance with labels[i] == 1 marking the first sample;
// `order` sorts the pooled values.
double ks_distance(const std::vector<std::uint32_t>& order, const std::vector<unsigned char>& labels,
                   double n_first, double n_second) {
  double a = 0.0, b = 0.0, best = 0.0;
  for (std::uint32_t idx : order) {
    if (labels[idx]) {
      a += 1.0;
    } else {
      b += 1.0;
    }
    best = std::max(best, std::abs(a / n_first - b / n_second));
  }
  return best;
}

MarginalComparison compare_marginals(const FilterEnsemble& y_ensemble,
                                     const FilterEnsemble& z_ensemble, std::size_t t,
                                     const InnovationOptions& options) {
  MarginalComparison cmp;
  const std::size_t m = std::max<std::size_t>(1, options.marginal_nodes);
  for (std::size_t j = 1; j <= m; ++j) {
    const std::size_t node = (t * j + m / 2) / m;
    if (node > 0 && (cmp.nodes.empty() || node != cmp.nodes.back())) cmp.nodes.push_back(node);
  }
  if (cmp.nodes.empty()) throw DimensionError("marginal comparison needs t > 0");
  const auto y = values_at_nodes(y_ensemble, cmp.nodes, options.gate.workers);
  const auto z = values_at_nodes(z_ensemble, cmp.nodes, options.gate.workers);

  const std::size_t tests = 2 * cmp.nodes.size();
  const double alpha = two_sided_level(options.gate.tolerance.sigmas);
  cmp.z_threshold = normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(tests)));
  bool moments_ok = true;
  for (std::size_t j = 0; j < cmp.nodes.size(); ++j) {
    const MeanEstimate my = mean_estimate(y[j]), mz = mean_estimate(z[j]);
    const MeanEstimate vy = variance_estimate(y[j]), vz = variance_estimate(z[j]);
    const double se_mean = std::hypot(my.std_error, mz.std_error);
    const double se_var = std::hypot(vy.std_error, vz.std_error);
    const double zm = se_mean > 0.0 ? (my.mean - mz.mean) / se_mean : (my.mean == mz.mean ? 0.0 : INFINITY);
    const double zv = se_var > 0.0 ? (vy.mean - vz.mean) / se_var : (vy.mean == vz.mean ? 0.0 : INFINITY);
    cmp.mean_z.push_back(zm);
    cmp.variance_z.push_back(zv);
    if (std::abs(zm) > cmp.z_threshold || std::abs(zv) > cmp.z_threshold) moments_ok = false;
  }

  // Max-over-nodes KS with a label-permutation null.
  const std::size_t ny = y_ensemble.n_paths(), nz = z_ensemble.n_paths(), pooled = ny + nz;
  std::vector<std::vector<std::uint32_t>> orders(cmp.nodes.size());
  for (std::size_t j = 0; j < cmp.nodes.size(); ++j) {
    std::vector<double> values(y[j]);
    values.insert(values.end(), z[j].begin(), z[j].end());
    auto& order = orders[j];
    order.resize(pooled);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return values[a] < values[b]; });
  }
  std::vector<unsigned char> labels(pooled, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(ny), 1);
  auto max_ks = [&](const std::vector<unsigned char>& lab) {
    double best = 0.0;
    for (const auto& order : orders) {
      best = std::max(best, ks_distance(order, lab, static_cast<double>(ny), static_cast<double>(nz)));
    }
    return best;
  };
  cmp.ks_statistic = max_ks(labels);

  const std::size_t P = std::max<std::size_t>(1, options.permutations);
  std::vector<double> null(P);
  parallel_for(
      P,
      [&](std::size_t p) {
        std::vector<unsigned char> lab(labels);
        RngStream rng(options.permutation_seed, p);
        for (std::size_t i = pooled - 1; i > 0; --i) {
          const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
          std::swap(lab[i], lab[std::min(j, i)]);
        }
        null[p] = max_ks(lab);
      },
      options.gate.workers);
  std::sort(null.begin(), null.end());
  const auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(P)));
  cmp.ks_threshold = null[std::clamp<std::size_t>(rank, 1, P) - 1];
  const auto exceed = static_cast<double>(
      std::count_if(null.begin(), null.end(), [&](double v) { return v >= cmp.ks_statistic; }));
  cmp.ks_p_proxy = (1.0 + exceed) / (1.0 + static_cast<double>(P));

  cmp.verdict = (moments_ok && cmp.ks_statistic <= cmp.ks_threshold) ? Verdict::Pass : Verdict::Fail;
  return cmp;
}

}  // namespace

InnovationCheckReport corollary1_check(const FilterEnsemble& y_ensemble,
                                       const ProjectedDrift& projected,
                                       const FilterEnsemble& z_ensemble, std::size_t t,
                                       const InnovationOptions& options) {
  const TimeGrid& grid = y_ensemble.grid();
  if (!(z_ensemble.grid() == grid)) throw DimensionError("Y and Z ensembles use different grids");
  check_interval(grid, 0, t);
  const DriftSpec& xi = z_ensemble.drift();
  const Tolerance tol = options.gate.tolerance;

  InnovationCheckReport report;
  report.condition_i = compare_marginals(y_ensemble, z_ensemble, t, options);

  const std::uint64_t xi_seed = splitmix64_mix(z_ensemble.seed() ^ 0x6e6f726d616c697aULL);
  report.condition_ii = normalization_check(
      xi, grid, t, std::max<std::size_t>(1000, options.gate.normalization_paths), xi_seed, tol);

  ConditionThree& c3 = report.condition_iii;
  c3.lhs = rho_J_lemma1(y_ensemble, projected, 0, t, options.gate);
  c3.rhs = theorem1_rhs(z_ensemble, t, options.gate.workers);
  c3.gap = c3.rhs.value - c3.lhs.value;
  c3.gap_se = std::hypot(c3.lhs.std_error, c3.rhs.std_error);
  c3.tolerance = tol.bound(c3.gap_se, grid.dt());
  c3.verdict = grade(std::abs(c3.gap), c3.tolerance);

  report.reconstruction_paths = std::min(options.reconstruction_paths, y_ensemble.n_paths());
  for (std::size_t i = 0; i < report.reconstruction_paths; ++i) {
    const EnsembleRecord rec = y_ensemble.record(i);
    const SamplePath rebuilt = apply_filter(xi, innovation_of(rec.Y, projected));
    for (std::size_t k = 0; k <= t; ++k) {
      report.reconstruction_error = std::max(report.reconstruction_error, std::abs(rebuilt[k] - rec.Y[k]));
    }
  }

  report.verdict = worst(worst(report.condition_i.verdict, report.condition_ii.verdict), c3.verdict);
  return report;
}

}  // namespace tsirelson
