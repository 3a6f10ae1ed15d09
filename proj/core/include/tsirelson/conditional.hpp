#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tsirelson/filter.hpp"
#include "tsirelson/grid.hpp"

namespace tsirelson {

enum class ProjectionMethod { Exact, FixedPoint, Regression };
const char* to_string(ProjectionMethod m) noexcept;

/**
 * Regression dictionary over the observation past [s, t_k].
 *
 * Columns, in order: constant; level Y_k - Y_s; its square; increments
 * Y_k - Y_{k-2^j} for j < dyadic_lags (zero when the lag reaches before s);
 * and integrals of (Y - Y_s) over [s, t_k] intersected with each of
 * `blocks` equal blocks of [0, 1].
 */
struct FeatureSpec {
  std::size_t dyadic_lags = 4;
  std::size_t blocks = 8;
  bool level = true;
  bool square = true;

  std::size_t count() const noexcept {
    return 1 + (level ? 1 : 0) + (square ? 1 : 0) + dyadic_lags + blocks;
  }
  std::vector<std::string> names() const;
};

/// Per-cell fit quality of a regression projection.
struct CellDiagnostics {
  double r_squared = 1.0;
  double residual_se = 0.0;  ///< sqrt(SSR / (N - F))
  bool ridge = false;        ///< ridge fallback was needed
  std::vector<double> residual_correlation;  ///< per non-constant feature
};

/**
 * Estimate of v_k = E[u-dot_k | observation increments on [s, t_k]].
 *
 * `start()` returns an evaluator that is fed Y values at nodes s..k for
 * k = s, s+1, ... and returns the estimate on cell k.
 */
class ProjectedDrift {
 public:
  ProjectedDrift(ProjectionMethod method, TimeGrid grid, std::size_t start_node, CausalFactory factory,
                 std::vector<CellDiagnostics> diagnostics = {}, FeatureSpec features = {});

  ProjectionMethod method() const noexcept { return method_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t start_node() const noexcept { return start_; }

  CausalEvaluator start() const { return factory_(); }

  /// Estimates on cells [s, n) of an observation path (length n - s).
  std::vector<double> evaluate_path(const SamplePath& Y) const;

  /// Empty unless method() == Regression; indexed by cell - s.
  const std::vector<CellDiagnostics>& diagnostics() const noexcept { return diagnostics_; }
  const FeatureSpec& features() const noexcept { return features_; }
  std::size_t ridge_cells() const noexcept;

  /// CSV rows "cell,r_squared,residual_se,ridge,corr_<feature>...".
  std::string diagnostics_csv() const;

 private:
  ProjectionMethod method_;
  TimeGrid grid_;
  std::size_t start_;
  CausalFactory factory_;
  std::vector<CellDiagnostics> diagnostics_;
  FeatureSpec features_;
};

/// Exact projection of a deterministic drift: v_k = hdot_k. Throws
/// UnsupportedError for other kinds.
ProjectedDrift project_deterministic(const DriftSpec& drift, const TimeGrid& grid,
                                     std::size_t start_node = 0);

/// Projection from the observation origin for a drift with a Lipschitz bound:
/// the input path is rebuilt causally from Y and the drift is evaluated on
/// it, which is the conditional expectation whenever the filter is invertible.
ProjectedDrift project_fixed_point(const DriftSpec& drift, const TimeGrid& grid);

struct RegressionOptions {
  FeatureSpec features{};
  std::size_t chunk_paths = 512;  ///< accumulation chunk; fixes the summation order
  std::size_t workers = 0;
};

/// Per-cell least squares of drift_k on the feature dictionary over the
/// ensemble. Singular cells fall back to ridge with
/// lambda = 1e-8 * trace(X'X) on every column except the constant.
ProjectedDrift project_regression(const FilterEnsemble& ensemble, std::size_t start_node,
                                  const RegressionOptions& options = {});

struct FixedPointResult {
  SamplePath input;            ///< reconstructed filter input
  double residual = 0.0;       ///< max_k |Y_k - B_k - sum_{j<k} u_j(B) dt|
  std::size_t iterations = 0;  ///< total Picard sweeps over all blocks
  std::size_t blocks = 0;
};

/**
 * Inverts Y = B + int u(B) by Picard iteration B <- Y - int u(B).
 *
 * Requires a Lipschitz bound L. When L > 1 the horizon is split into
 * consecutive blocks shorter than 1 / (2L) and solved block by block.
 * Throws NoContractionError when a block does not reach `tol` in `max_iter`
 * sweeps.
 */
FixedPointResult reconstruct_input_fixed_point(const DriftSpec& drift, const SamplePath& Y,
                                               std::size_t max_iter = 200, double tol = 1e-10);

struct InnovationPath {
  SamplePath values;
  std::size_t record_id = 0;
};

/// values[k] = Y[k] - sum_{j<k} v_j dt for a projection started at 0.
InnovationPath innovation_process(const EnsembleRecord& record, const ProjectedDrift& projected);
SamplePath innovation_of(const SamplePath& Y, const ProjectedDrift& projected);

/// Output-feedback drift x -> v(z) with z = x + int v(z): the filter whose
/// output is driven by its own projected drift. Used to turn a projection
/// into a candidate innovation drift.
DriftSpec output_feedback_drift(const ProjectedDrift& projected);

}  // namespace tsirelson
