#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsirelson/grid.hpp"
#include "tsirelson/stats.hpp"

namespace tsirelson {

/**
 * Per-path causal evaluator. It is called once per cell with strictly
 * increasing `cell`, and `past` holds the path values at nodes 0..cell
 * (or s..cell for evaluators started at s). Since nothing later is ever
 * passed in, every evaluator is adapted by construction and may keep state
 * between calls.
 */
using CausalEvaluator = std::function<double(std::size_t cell, std::span<const double> past)>;

/// Produces a fresh evaluator for each path.
using CausalFactory = std::function<CausalEvaluator()>;

enum class DriftKind { Deterministic, StateFeedback, PathFunctional };

/**
 * Adapted drift u-dot of a causal filter F(x) = x + int u-dot(x).
 *
 * Deterministic drifts are Cameron-Martin derivatives; state feedback
 * evaluates phi(t_k, x(t_k)); path functionals see the whole past.
 * `lipschitz_bound` is the sup-norm Lipschitz constant of x -> u-dot(x)
 * when known; it gates fixed-point inversion.
 */
class DriftSpec {
 public:
  static DriftSpec zero(const TimeGrid& grid);
  static DriftSpec deterministic(CameronMartinPath h);
  static DriftSpec state_feedback(std::function<double(double t, double x)> phi,
                                  std::optional<double> lipschitz_bound = std::nullopt);
  static DriftSpec path_functional(CausalFactory factory,
                                   std::optional<double> lipschitz_bound = std::nullopt);

  DriftKind kind() const noexcept { return kind_; }
  bool is_zero() const noexcept { return zero_; }
  const std::optional<double>& lipschitz_bound() const noexcept { return lipschitz_; }

  const std::string& label() const noexcept { return label_; }
  DriftSpec& set_label(std::string label) {
    label_ = std::move(label);
    return *this;
  }

  /// The Cameron-Martin path of a deterministic drift; throws UnsupportedError otherwise.
  const CameronMartinPath& deterministic_path() const;

  /// Fresh evaluator for one input path on `grid`.
  CausalEvaluator start(const TimeGrid& grid) const;

  /// Drift on cells [0, cells) of `input`; throws DriftEvaluationError on
  /// the first non-finite value.
  std::vector<double> evaluate(const SamplePath& input,
                               std::size_t cells = std::numeric_limits<std::size_t>::max()) const;

 private:
  DriftKind kind_ = DriftKind::Deterministic;
  bool zero_ = false;
  std::optional<double> lipschitz_;
  std::string label_;
  std::optional<CameronMartinPath> path_;
  std::function<double(double, double)> phi_;
  CausalFactory factory_;
};

/// Filter output together with the drift samples that produced it.
struct FilterOutput {
  SamplePath output;
  std::vector<double> drift;
};

/// output[k] = input[k] + sum_{j<k} u-dot_j(input) dt, cell by cell.
SamplePath apply_filter(const DriftSpec& drift, const SamplePath& input);
FilterOutput filter_path(const DriftSpec& drift, const SamplePath& input);

/// input + h (pointwise).
SamplePath shift_by_h(const CameronMartinPath& h, const SamplePath& input);

/// log of the Doleans-Dade exponential on [0, t_node]:
/// -sum_{k<t_node} drift_k dB_k - 1/2 sum_{k<t_node} drift_k^2 dt.
double doleans_log(std::span<const double> drift, const SamplePath& driver, std::size_t t_node);

enum class Verdict { Pass, Warn, Fail };
const char* to_string(Verdict v) noexcept;

/// Sigma multiplier and dt-proportional slack shared by all verdicts.
struct Tolerance {
  double sigmas = 3.0;
  double slack = 1.0;

  double bound(double std_error, double dt) const noexcept { return sigmas * std_error + slack * dt; }
};

struct NormalizationCheck {
  MeanEstimate doleans;   ///< E[exp(-int u dW - 1/2 int u^2)] on [0, t]
  MeanEstimate energy;    ///< E[int_0^t u^2], square-integrability proxy
  double tolerance = 0.0; ///< sigmas * SE + slack * dt
  Verdict verdict = Verdict::Fail;
};

/// Monte Carlo check of E[exp(-int_0^t u dW - 1/2 int_0^t u^2)] = 1.
/// Pass within tolerance, Warn within twice the tolerance, Fail otherwise.
NormalizationCheck normalization_check(const DriftSpec& drift, const TimeGrid& grid,
                                       std::size_t t_node, std::size_t n_paths,
                                       std::uint64_t seed, Tolerance tol = {});

/// One coupled record of an ensemble.
struct EnsembleRecord {
  std::size_t id = 0;
  SamplePath B;          ///< driving Brownian path
  SamplePath input;      ///< filter input X = B + h (equal to B without shift)
  SamplePath Y;          ///< filter output
  std::vector<double> drift;
  double log_doleans = 0.0;  ///< -int drift dX - 1/2 int drift^2 over [0, 1]
};

/**
 * Seeded ensemble of coupled (B, Y, drift) records.
 *
 * Records are regenerated on demand from (seed, id), so arbitrarily large
 * ensembles cost no memory and any record can be reproduced in isolation.
 * Path i draws its Brownian increments from RngStream(seed, i).
 */
class FilterEnsemble {
 public:
  FilterEnsemble(DriftSpec drift, TimeGrid grid, std::size_t n_paths, std::uint64_t seed,
                 std::optional<CameronMartinPath> shift = std::nullopt);

  const DriftSpec& drift() const noexcept { return drift_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t n_paths() const noexcept { return n_paths_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::optional<CameronMartinPath>& shift() const noexcept { return shift_; }

  EnsembleRecord record(std::size_t id) const;

  /// Calls fn(record) for every record, in parallel; fn must only touch
  /// per-record storage indexed by record.id.
  void for_each(const std::function<void(const EnsembleRecord&)>& fn,
                std::size_t workers = 0) const;

  /// Per-record scalar, collected in id order.
  std::vector<double> map(const std::function<double(const EnsembleRecord&)>& fn,
                          std::size_t workers = 0) const;

 private:
  DriftSpec drift_;
  TimeGrid grid_;
  std::size_t n_paths_;
  std::uint64_t seed_;
  std::optional<CameronMartinPath> shift_;
};

/// Builds a seeded ensemble; with `shift` the filter input is B + h.
FilterEnsemble build_ensemble(const DriftSpec& drift, std::size_t n_paths, const TimeGrid& grid,
                              std::uint64_t seed,
                              std::optional<CameronMartinPath> shift = std::nullopt);

/// max_k |Y[k] - (input[k] + sum_{j<k} drift_j dt)| for one record.
double bookkeeping_error(const EnsembleRecord& record);

// Export. CSV columns: path_id,t,B,Y,drift (drift empty on the last node).
void write_ensemble_csv(const FilterEnsemble& ensemble, std::ostream& out,
                        std::size_t max_paths = std::numeric_limits<std::size_t>::max());

/**
 * Binary layout, all fields little-endian:
 *   char[4] "TSEN", u32 version (1), u64 n_steps, u64 n_paths, u64 seed,
 *   then per path: f64 B[n+1], f64 Y[n+1], f64 drift[n], f64 log_doleans.
 */
void write_ensemble_binary(const FilterEnsemble& ensemble, std::ostream& out,
                           std::size_t max_paths = std::numeric_limits<std::size_t>::max());

struct StoredRecord {
  std::vector<double> B;
  std::vector<double> Y;
  std::vector<double> drift;
  double log_doleans = 0.0;
};

struct StoredEnsemble {
  std::size_t n_steps = 0;
  std::uint64_t seed = 0;
  std::vector<StoredRecord> records;
};

StoredEnsemble read_ensemble_binary(std::istream& in);

}  // namespace tsirelson
