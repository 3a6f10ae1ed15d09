#include "tsirelson/conditional.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "tsirelson/errors.hpp"
#include "tsirelson/format.hpp"
#include "tsirelson/parallel.hpp"

namespace tsirelson {

namespace {

constexpr double kRidgeFactor = 1e-8;
constexpr double kRankTolerance = 1e-12;

// Incremental dictionary over Y[s..k]; must be fed increasing k.
class FeatureBuilder {
 public:
  FeatureBuilder(const FeatureSpec& spec, const TimeGrid& grid, std::size_t start)
      : spec_(spec), grid_(grid), start_(start), processed_(start), block_sums_(spec.blocks, 0.0) {}

  void compute(std::size_t k, std::span<const double> past, double* out) {
    const double origin = past[0];
    const double dt = grid_.dt();
    const std::size_t n = grid_.n_steps();
    for (; processed_ < k; ++processed_) {
      const std::size_t block = processed_ * spec_.blocks / n;
      block_sums_[block] += (past[processed_ - start_] - origin) * dt;
    }
    const double level = past.back() - origin;
    std::size_t f = 0;
    out[f++] = 1.0;
    if (spec_.level) out[f++] = level;
    if (spec_.square) out[f++] = level * level;
    for (std::size_t j = 0; j < spec_.dyadic_lags; ++j) {
      const std::size_t lag = std::size_t{1} << j;
      out[f++] = (k >= start_ + lag) ? past.back() - past[k - start_ - lag] : 0.0;
    }
    for (double sum : block_sums_) out[f++] = sum;
  }

 private:
  FeatureSpec spec_;
  TimeGrid grid_;
  std::size_t start_;
  std::size_t processed_;
  std::vector<double> block_sums_;
};

// Normal-equation accumulator for all cells of one chunk of paths.
struct CellAccumulator {
  std::size_t features;
  std::size_t cells;
  std::vector<double> data;  // per cell: X'X (F*F), X'y (F), sum y, sum y^2

  CellAccumulator(std::size_t f, std::size_t c) : features(f), cells(c), data(c * stride(), 0.0) {}

  std::size_t stride() const { return features * features + features + 2; }
  double* cell(std::size_t i) { return data.data() + i * stride(); }
  const double* cell(std::size_t i) const { return data.data() + i * stride(); }

  void add(std::size_t i, const double* x, double y) {
    double* xtx = cell(i);
    double* xty = xtx + features * features;
    for (std::size_t a = 0; a < features; ++a) {
      const double xa = x[a];
      for (std::size_t b = a; b < features; ++b) xtx[a * features + b] += xa * x[b];
      xty[a] += xa * y;
    }
    xty[features] += y;
    xty[features + 1] += y * y;
  }

  void merge(const CellAccumulator& other) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
  }
};

}  // namespace

const char* to_string(ProjectionMethod m) noexcept {
  switch (m) {
    case ProjectionMethod::Exact: return "exact";
    case ProjectionMethod::FixedPoint: return "fixed-point";
    case ProjectionMethod::Regression: return "regression";
  }
  return "unknown";
}

std::vector<std::string> FeatureSpec::names() const {
  std::vector<std::string> out{"const"};
  if (level) out.emplace_back("level");
  if (square) out.emplace_back("level2");
  for (std::size_t j = 0; j < dyadic_lags; ++j) out.push_back("inc_lag" + std::to_string(1u << j));
  for (std::size_t b = 0; b < blocks; ++b) out.push_back("block" + std::to_string(b));
  return out;
}

// ---------------------------------------------------------------------------
// ProjectedDrift

ProjectedDrift::ProjectedDrift(ProjectionMethod method, TimeGrid grid, std::size_t start_node,
                               CausalFactory factory, std::vector<CellDiagnostics> diagnostics,
                               FeatureSpec features)
    : method_(method),
      grid_(grid),
      start_(start_node),
      factory_(std::move(factory)),
      diagnostics_(std::move(diagnostics)),
      features_(features) {
  if (start_ > grid_.n_steps()) throw DimensionError("projection start beyond the grid");
}

std::vector<double> ProjectedDrift::evaluate_path(const SamplePath& Y) const {
  if (!(Y.grid() == grid_)) throw DimensionError("observation grid differs from projection grid");
  const std::size_t n = grid_.n_steps();
  std::vector<double> out(n - start_);
  CausalEvaluator evaluator = start();
  const auto values = Y.values();
  for (std::size_t k = start_; k < n; ++k) {
    const double v = evaluator(k, values.subspan(start_, k - start_ + 1));
    if (!std::isfinite(v)) throw DriftEvaluationError(k, v);
    out[k - start_] = v;
  }
  return out;
}

std::size_t ProjectedDrift::ridge_cells() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(diagnostics_.begin(), diagnostics_.end(), [](const auto& d) { return d.ridge; }));
}

std::string ProjectedDrift::diagnostics_csv() const {
  std::string out = "cell,r_squared,residual_se,ridge";
  const auto names = features_.names();
  for (std::size_t j = 1; j < names.size(); ++j) out += ",corr_" + names[j];
  out += '\n';
  for (std::size_t i = 0; i < diagnostics_.size(); ++i) {
    const auto& d = diagnostics_[i];
    out += std::to_string(start_ + i) + ',' + format_real(d.r_squared) + ',' +
           format_real(d.residual_se) + ',' + (d.ridge ? "1" : "0");
    for (double c : d.residual_correlation) out += ',' + format_real(c);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact and fixed-point projections

ProjectedDrift project_deterministic(const DriftSpec& drift, const TimeGrid& grid,
                                     std::size_t start_node) {
  if (drift.kind() != DriftKind::Deterministic) {
    throw UnsupportedError("exact projection needs a deterministic drift");
  }
  const CameronMartinPath& h = drift.deterministic_path();
  if (!(h.grid() == grid)) throw DimensionError("drift grid differs from projection grid");
  auto derivative = std::make_shared<std::vector<double>>(h.derivative().begin(), h.derivative().end());
  CausalFactory factory = [derivative]() -> CausalEvaluator {
    return [derivative](std::size_t cell, std::span<const double>) { return (*derivative)[cell]; };
  };
  return ProjectedDrift(ProjectionMethod::Exact, grid, start_node, std::move(factory));
}

ProjectedDrift project_fixed_point(const DriftSpec& drift, const TimeGrid& grid) {
  if (!drift.lipschitz_bound()) {
    throw NotRealizableError("fixed-point projection needs a drift with a Lipschitz bound");
  }
  CausalFactory factory = [drift, grid]() -> CausalEvaluator {
    struct State {
      std::vector<double> input;
      CausalEvaluator drift_eval;
      double integral = 0.0;
      double last = 0.0;
    };
    auto state = std::make_shared<State>();
    state->drift_eval = drift.start(grid);
    const double dt = grid.dt();
    return [state, dt](std::size_t cell, std::span<const double> past) {
      // One-cell Picard blocks: the fixed point is reached in a single sweep.
      for (std::size_t j = state->input.size(); j <= cell; ++j) {
        state->input.push_back(past[j] - state->integral);
        state->last = state->drift_eval(j, state->input);
        state->integral += state->last * dt;
      }
      return state->last;
    };
  };
  return ProjectedDrift(ProjectionMethod::FixedPoint, grid, 0, std::move(factory));
}

// ---------------------------------------------------------------------------
// Regression projection

ProjectedDrift project_regression(const FilterEnsemble& ensemble, std::size_t start_node,
                                  const RegressionOptions& options) {
  const TimeGrid& grid = ensemble.grid();
  const std::size_t n = grid.n_steps();
  if (start_node >= n) throw DimensionError("regression start must precede the last node");
  const FeatureSpec spec = options.features;
  const std::size_t F = spec.count();
  const std::size_t N = ensemble.n_paths();
  if (N < 10 * F) {
    throw Error("regression needs at least " + std::to_string(10 * F) + " paths for " +
                std::to_string(F) + " features");
  }
  const std::size_t cells = n - start_node;
  const std::size_t chunk = std::max<std::size_t>(1, options.chunk_paths);
  const std::size_t n_chunks = (N + chunk - 1) / chunk;
  const std::size_t workers = options.workers == 0 ? default_workers() : options.workers;

  CellAccumulator total(F, cells);
  // Chunks are summed independently and merged in chunk order, so the
  // result does not depend on the worker count.
  for (std::size_t group = 0; group < n_chunks; group += workers) {
    const std::size_t group_size = std::min(workers, n_chunks - group);
    std::vector<CellAccumulator> partial(group_size, CellAccumulator(F, cells));
    parallel_for(
        group_size,
        [&](std::size_t g) {
          const std::size_t c = group + g;
          std::vector<double> x(F);
          for (std::size_t i = c * chunk; i < std::min(N, (c + 1) * chunk); ++i) {
            const EnsembleRecord rec = ensemble.record(i);
            FeatureBuilder builder(spec, grid, start_node);
            const auto values = rec.Y.values();
            for (std::size_t k = start_node; k < n; ++k) {
              builder.compute(k, values.subspan(start_node, k - start_node + 1), x.data());
              partial[g].add(k - start_node, x.data(), rec.drift[k]);
            }
          }
        },
        workers);
    for (const auto& p : partial) total.merge(p);
  }

  auto coefficients = std::make_shared<std::vector<double>>(cells * F, 0.0);
  std::vector<CellDiagnostics> diagnostics(cells);
  const double count = static_cast<double>(N);
  for (std::size_t i = 0; i < cells; ++i) {
    const double* xtx_raw = total.cell(i);
    const double* xty_raw = xtx_raw + F * F;
    const double sum_y = xty_raw[F];
    const double sum_y2 = xty_raw[F + 1];

    Eigen::MatrixXd xtx(F, F);
    Eigen::VectorXd xty(F);
    for (std::size_t a = 0; a < F; ++a) {
      xty(a) = xty_raw[a];
      for (std::size_t b = a; b < F; ++b) {
        xtx(a, b) = xtx_raw[a * F + b];
        xtx(b, a) = xtx_raw[a * F + b];
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    Eigen::VectorXd beta;
    const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                          ldlt.rcond() < kRankTolerance;
    if (singular) {
      const double lambda = kRidgeFactor * xtx.trace();
      Eigen::MatrixXd ridged = xtx;
      // The intercept is left unpenalized so constant drifts stay exact.
      ridged.diagonal().tail(F - 1).array() += std::max(lambda, 1e-300);
      beta = ridged.ldlt().solve(xty);
      diagnostics[i].ridge = true;
    } else {
      beta = ldlt.solve(xty);
    }
    for (std::size_t a = 0; a < F; ++a) (*coefficients)[i * F + a] = beta(a);

    // Fit statistics from the accumulated moments.
    const Eigen::VectorXd gradient = xty - xtx * beta;  // X' r
    const double ssr = std::max(0.0, sum_y2 - 2.0 * beta.dot(xty) + beta.dot(xtx * beta));
    const double sst = sum_y2 - sum_y * sum_y / count;
    auto& d = diagnostics[i];
    d.r_squared = (sst <= 1e-14 * std::max(1.0, sum_y2)) ? 1.0 : std::clamp(1.0 - ssr / sst, 0.0, 1.0);
    d.residual_se = N > F ? std::sqrt(ssr / static_cast<double>(N - F)) : 0.0;
    const double sum_r = gradient(0);
    d.residual_correlation.resize(F - 1, 0.0);
    for (std::size_t j = 1; j < F; ++j) {
      const double mean_x = xtx(0, j) / count;
      const double var_x = xtx(j, j) - count * mean_x * mean_x;
      const double denom = std::sqrt(std::max(0.0, var_x) * ssr);
      d.residual_correlation[j - 1] = denom > 0.0 ? (gradient(j) - mean_x * sum_r) / denom : 0.0;
    }
  }

  CausalFactory factory = [coefficients, spec, grid, start_node, F]() -> CausalEvaluator {
    auto builder = std::make_shared<FeatureBuilder>(spec, grid, start_node);
    auto x = std::make_shared<std::vector<double>>(F);
    return [coefficients, builder, x, start_node, F](std::size_t cell, std::span<const double> past) {
      builder->compute(cell, past, x->data());
      const double* beta = coefficients->data() + (cell - start_node) * F;
      double v = 0.0;
      for (std::size_t a = 0; a < F; ++a) v += beta[a] * (*x)[a];
      return v;
    };
  };
  return ProjectedDrift(ProjectionMethod::Regression, grid, start_node, std::move(factory),
                        std::move(diagnostics), spec);
}

// ---------------------------------------------------------------------------
// Fixed-point inversion

FixedPointResult reconstruct_input_fixed_point(const DriftSpec& drift, const SamplePath& Y,
                                               std::size_t max_iter, double tol) {
  if (!drift.lipschitz_bound()) {
    throw NotRealizableError("fixed-point inversion needs a drift with a Lipschitz bound");
  }
  const double bound = *drift.lipschitz_bound();
  const TimeGrid& grid = Y.grid();
  const std::size_t n = grid.n_steps();
  const double dt = grid.dt();

  std::size_t block_cells = n;
  if (bound > 1.0) {
    // Longest block with length strictly below 1 / (2L).
    const double max_length = 1.0 / (2.0 * bound);
    block_cells = static_cast<std::size_t>(std::ceil(max_length / dt)) - 1;
    block_cells = std::clamp<std::size_t>(block_cells, 1, n);
  }

  std::vector<double> guess(Y.values().begin(), Y.values().end());
  FixedPointResult result{Y, 0.0, 0, 0};
  for (std::size_t a = 0; a < n; a += block_cells) {
    const std::size_t b = std::min(n, a + block_cells);
    ++result.blocks;
    bool converged = false;
    double delta = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
      ++result.iterations;
      const std::vector<double> samples = drift.evaluate(SamplePath(grid, guess), b);
      double integral = 0.0;
      for (std::size_t j = 0; j < a; ++j) integral += samples[j] * dt;
      delta = 0.0;
      std::vector<double> update(b - a);
      for (std::size_t k = a + 1; k <= b; ++k) {
        integral += samples[k - 1] * dt;
        update[k - a - 1] = Y[k] - integral;
        delta = std::max(delta, std::abs(update[k - a - 1] - guess[k]));
      }
      // delta is exactly the residual of the current guess on this block.
      if (delta <= tol) {
        converged = true;
        break;
      }
      std::copy(update.begin(), update.end(), guess.begin() + static_cast<std::ptrdiff_t>(a + 1));
    }
    if (!converged) throw NoContractionError(result.iterations, delta);
  }

  SamplePath input(grid, std::move(guess));
  const std::vector<double> samples = drift.evaluate(input);
  double integral = 0.0;
  double residual = std::abs(Y[0] - input[0]);
  for (std::size_t k = 0; k < n; ++k) {
    integral += samples[k] * dt;
    residual = std::max(residual, std::abs(Y[k + 1] - input[k + 1] - integral));
  }
  result.input = std::move(input);
  result.residual = residual;
  return result;
}

// ---------------------------------------------------------------------------
// Innovation

SamplePath innovation_of(const SamplePath& Y, const ProjectedDrift& projected) {
  if (projected.start_node() != 0) throw Error("innovation needs a projection started at 0");
  const std::vector<double> v = projected.evaluate_path(Y);
  const double dt = Y.grid().dt();
  std::vector<double> out(Y.size());
  double integral = 0.0;
  out[0] = Y[0];
  for (std::size_t k = 0; k < v.size(); ++k) {
    integral += v[k] * dt;
    out[k + 1] = Y[k + 1] - integral;
  }
  return SamplePath(Y.grid(), std::move(out));
}

InnovationPath innovation_process(const EnsembleRecord& record, const ProjectedDrift& projected) {
  return {innovation_of(record.Y, projected), record.id};
}

DriftSpec output_feedback_drift(const ProjectedDrift& projected) {
  if (projected.start_node() != 0) throw Error("output feedback needs a projection started at 0");
  const double dt = projected.grid().dt();
  CausalFactory factory = [projected, dt]() -> CausalEvaluator {
    struct State {
      std::vector<double> output;
      CausalEvaluator inner;
      double integral = 0.0;
      double last = 0.0;
    };
    auto state = std::make_shared<State>();
    state->inner = projected.start();
    return [state, dt](std::size_t cell, std::span<const double> past) {
      for (std::size_t j = state->output.size(); j <= cell; ++j) {
        state->output.push_back(past[j] + state->integral);
        state->last = state->inner(j, state->output);
        state->integral += state->last * dt;
      }
      return state->last;
    };
  };
  return DriftSpec::path_functional(std::move(factory)).set_label("output-feedback");
}

}  // namespace tsirelson
