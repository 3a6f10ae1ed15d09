#include "tsirelson/filter.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "tsirelson/brownian.hpp"
#include "tsirelson/errors.hpp"
#include "tsirelson/parallel.hpp"
#include "tsirelson/rng.hpp"

namespace tsirelson {

// ---------------------------------------------------------------------------
// DriftSpec

DriftSpec DriftSpec::zero(const TimeGrid& grid) {
  DriftSpec spec = deterministic(CameronMartinPath::zero(grid));
  spec.zero_ = true;
  spec.label_ = "zero";
  return spec;
}

DriftSpec DriftSpec::deterministic(CameronMartinPath h) {
  DriftSpec spec;
  spec.kind_ = DriftKind::Deterministic;
  spec.lipschitz_ = 0.0;
  spec.zero_ = h.energy() == 0.0;
  spec.label_ = "deterministic";
  spec.path_ = std::move(h);
  return spec;
}

DriftSpec DriftSpec::state_feedback(std::function<double(double, double)> phi,
                                    std::optional<double> lipschitz_bound) {
  if (!phi) throw Error("state feedback drift needs a callback");
  DriftSpec spec;
  spec.kind_ = DriftKind::StateFeedback;
  spec.lipschitz_ = lipschitz_bound;
  spec.label_ = "state-feedback";
  spec.phi_ = std::move(phi);
  return spec;
}

DriftSpec DriftSpec::path_functional(CausalFactory factory, std::optional<double> lipschitz_bound) {
  if (!factory) throw Error("path functional drift needs a factory");
  DriftSpec spec;
  spec.kind_ = DriftKind::PathFunctional;
  spec.lipschitz_ = lipschitz_bound;
  spec.label_ = "path-functional";
  spec.factory_ = std::move(factory);
  return spec;
}

const CameronMartinPath& DriftSpec::deterministic_path() const {
  if (kind_ != DriftKind::Deterministic) {
    throw UnsupportedError("drift '" + label_ + "' is not deterministic");
  }
  return *path_;
}

CausalEvaluator DriftSpec::start(const TimeGrid& grid) const {
  switch (kind_) {
    case DriftKind::Deterministic: {
      if (!(path_->grid() == grid)) {
        throw DimensionError("deterministic drift grid does not match the input grid");
      }
      auto derivative = std::make_shared<const std::vector<double>>(path_->derivative().begin(),
                                                                    path_->derivative().end());
      return [derivative](std::size_t cell, std::span<const double>) { return (*derivative)[cell]; };
    }
    case DriftKind::StateFeedback:
      return [phi = phi_, grid](std::size_t cell, std::span<const double> past) {
        return phi(grid.node(cell), past.back());
      };
    case DriftKind::PathFunctional:
      return factory_();
  }
  throw Error("unknown drift kind");
}

std::vector<double> DriftSpec::evaluate(const SamplePath& input, std::size_t cells) const {
  const TimeGrid& grid = input.grid();
  cells = std::min(cells, grid.n_steps());
  std::vector<double> drift(cells);
  CausalEvaluator evaluator = start(grid);
  const auto values = input.values();
  for (std::size_t k = 0; k < cells; ++k) {
    const double v = evaluator(k, values.first(k + 1));
    if (!std::isfinite(v)) throw DriftEvaluationError(k, v);
    drift[k] = v;
  }
  return drift;
}

// ---------------------------------------------------------------------------
// Filters

FilterOutput filter_path(const DriftSpec& drift, const SamplePath& input) {
  std::vector<double> samples = drift.evaluate(input);
  const double dt = input.grid().dt();
  std::vector<double> out(input.size());
  double integral = 0.0;
  out[0] = input[0];
  for (std::size_t k = 0; k < samples.size(); ++k) {
    integral += samples[k] * dt;
    out[k + 1] = input[k + 1] + integral;
  }
  return {SamplePath(input.grid(), std::move(out)), std::move(samples)};
}

SamplePath apply_filter(const DriftSpec& drift, const SamplePath& input) {
  return filter_path(drift, input).output;
}

SamplePath shift_by_h(const CameronMartinPath& h, const SamplePath& input) {
  if (!(h.grid() == input.grid())) throw DimensionError("shift and input grids differ");
  const SamplePath hp = h.path();
  std::vector<double> out(input.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = input[k] + hp[k];
  return SamplePath(input.grid(), std::move(out));
}

double doleans_log(std::span<const double> drift, const SamplePath& driver, std::size_t t_node) {
  if (t_node > driver.grid().n_steps() || drift.size() < t_node) {
    throw DimensionError("Doleans exponential horizon exceeds the drift samples");
  }
  const double dt = driver.grid().dt();
  double stochastic = 0.0;
  double energy = 0.0;
  for (std::size_t k = 0; k < t_node; ++k) {
    if (!std::isfinite(drift[k])) throw DriftEvaluationError(k, drift[k]);
    stochastic += drift[k] * driver.increment(k);
    energy += drift[k] * drift[k];
  }
  return -stochastic - 0.5 * energy * dt;
}

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Warn: return "WARN";
    case Verdict::Fail: return "FAIL";
  }
  return "FAIL";
}

NormalizationCheck normalization_check(const DriftSpec& drift, const TimeGrid& grid,
                                       std::size_t t_node, std::size_t n_paths,
                                       std::uint64_t seed, Tolerance tol) {
  if (n_paths < 1000) throw Error("normalization check needs at least 1000 paths");
  if (t_node > grid.n_steps()) throw DimensionError("horizon beyond the grid");
  std::vector<double> logs(n_paths), energies(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    const SamplePath W = sample_brownian(grid, RngStream(seed, i));
    std::vector<double> samples;
    try {
      samples = drift.evaluate(W, t_node);
    } catch (const DriftEvaluationError& e) {
      throw DriftEvaluationError(e.cell(), NAN, i);
    }
    logs[i] = doleans_log(samples, W, t_node);
    double energy = 0.0;
    for (double v : samples) energy += v * v;
    energies[i] = energy * grid.dt();
  });
  NormalizationCheck check;
  check.doleans = exp_mean_estimate(logs);
  check.energy = mean_estimate(energies);
  check.tolerance = tol.bound(check.doleans.std_error, grid.dt());
  const double deviation = std::abs(check.doleans.mean - 1.0);
  if (deviation <= check.tolerance) {
    check.verdict = Verdict::Pass;
  } else if (deviation <= 2.0 * check.tolerance) {
    check.verdict = Verdict::Warn;
  } else {
    check.verdict = Verdict::Fail;
  }
  return check;
}

// ---------------------------------------------------------------------------
// Ensembles

FilterEnsemble::FilterEnsemble(DriftSpec drift, TimeGrid grid, std::size_t n_paths,
                               std::uint64_t seed, std::optional<CameronMartinPath> shift)
    : drift_(std::move(drift)), grid_(grid), n_paths_(n_paths), seed_(seed), shift_(std::move(shift)) {
  if (n_paths_ == 0) throw Error("ensemble needs at least one path");
  if (shift_ && !(shift_->grid() == grid_)) throw DimensionError("shift grid differs from ensemble grid");
}

EnsembleRecord FilterEnsemble::record(std::size_t id) const {
  if (id >= n_paths_) throw DimensionError("record id out of range");
  SamplePath B = sample_brownian(grid_, RngStream(seed_, id));
  SamplePath input = shift_ ? shift_by_h(*shift_, B) : B;
  FilterOutput filtered{SamplePath::zeros(grid_), {}};
  try {
    filtered = filter_path(drift_, input);
  } catch (const DriftEvaluationError& e) {
    throw DriftEvaluationError(e.cell(), NAN, id);
  }
  const double log_doleans = doleans_log(filtered.drift, input, grid_.n_steps());
  return {id, std::move(B), std::move(input), std::move(filtered.output), std::move(filtered.drift),
          log_doleans};
}

void FilterEnsemble::for_each(const std::function<void(const EnsembleRecord&)>& fn,
                              std::size_t workers) const {
  parallel_for(n_paths_, [&](std::size_t i) { fn(record(i)); }, workers);
}

std::vector<double> FilterEnsemble::map(const std::function<double(const EnsembleRecord&)>& fn,
                                        std::size_t workers) const {
  std::vector<double> out(n_paths_);
  parallel_for(n_paths_, [&](std::size_t i) { out[i] = fn(record(i)); }, workers);
  return out;
}

FilterEnsemble build_ensemble(const DriftSpec& drift, std::size_t n_paths, const TimeGrid& grid,
                              std::uint64_t seed, std::optional<CameronMartinPath> shift) {
  return FilterEnsemble(drift, grid, n_paths, seed, std::move(shift));
}

double bookkeeping_error(const EnsembleRecord& record) {
  const double dt = record.Y.grid().dt();
  double integral = 0.0;
  double worst = std::abs(record.Y[0] - record.input[0]);
  for (std::size_t k = 0; k < record.drift.size(); ++k) {
    integral += record.drift[k] * dt;
    worst = std::max(worst, std::abs(record.Y[k + 1] - (record.input[k + 1] + integral)));
  }
  return worst;
}

}  // namespace tsirelson
