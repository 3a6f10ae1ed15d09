#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsirelson/grid.hpp"

namespace tsirelson {

// Kernel forms. All three are symmetric by construction.

/// f_n(t_1..t_n) = c on [0,1]^n.
struct ConstantKernel {
  double c = 0.0;
};

/// f_n(t_1..t_n) = c * g(t_1) ... g(t_n), g piecewise constant on grid cells.
struct SeparableKernel {
  double c = 0.0;
  std::vector<double> g;
};

/// f_n tabulated at cell centres of a uniform `resolution`^n grid of
/// [0,1]^n, row-major with the first coordinate slowest. Orders 1..3 only.
struct TabulatedKernel {
  std::size_t resolution = 0;
  std::vector<double> values;
};

/// Kernel of one chaos level.
struct ChaosKernel {
  std::size_t order = 0;
  std::variant<ConstantKernel, SeparableKernel, TabulatedKernel> form;

  /// Throws DimensionError/UnsupportedError on malformed data or asymmetric tables.
  void validate() const;
};

/**
 * Sorted union of disjoint closed intervals of [0,1] with endpoints on grid
 * nodes. Construction snaps, sorts and merges touching or overlapping input.
 */
class IntervalUnion {
 public:
  static IntervalUnion make(const TimeGrid& grid, std::vector<std::pair<double, double>> intervals);
  static IntervalUnion empty(const TimeGrid& grid);
  static IntervalUnion full(const TimeGrid& grid);

  const TimeGrid& grid() const noexcept { return grid_; }

  /// Node-index ranges [first, last] of each interval.
  const std::vector<std::pair<std::size_t, std::size_t>>& node_ranges() const noexcept {
    return ranges_;
  }
  std::vector<std::pair<double, double>> intervals() const;

  double total_length() const noexcept;
  bool is_empty() const noexcept { return ranges_.empty(); }

  /// True when cell [t_k, t_{k+1}] lies inside the union.
  bool contains_cell(std::size_t k) const noexcept;
  bool contains(double t) const noexcept;
  bool is_subset_of(const IntervalUnion& other) const noexcept;

 private:
  explicit IntervalUnion(TimeGrid grid) : grid_(grid) {}

  TimeGrid grid_;
  std::vector<std::pair<std::size_t, std::size_t>> ranges_;
};

/**
 * Truncated Ito-Wiener expansion f = sum_{n<=N} I_n(f_n).
 *
 * `kernels[n]` has order n; the order-0 kernel is a constant equal to E[f].
 * `truncation_tail` is an upper bound for the dropped mass sum_{n>N} n!|f_n|^2
 * (zero for exact expansions).
 */
class ChaosExpansion {
 public:
  ChaosExpansion(std::string label, std::vector<ChaosKernel> kernels, double truncation_tail = 0.0);

  const std::string& label() const noexcept { return label_; }
  const std::vector<ChaosKernel>& kernels() const noexcept { return kernels_; }
  std::size_t max_order() const noexcept { return kernels_.size() - 1; }
  double truncation_tail() const noexcept { return truncation_tail_; }
  bool is_exact() const noexcept { return truncation_tail_ == 0.0; }

  /// E[f].
  double mean() const;

  /// sum_n n! |f_n|^2, equal to E[f^2] for exact expansions.
  double total_mass() const;

  /// Grid of the separable kernels, if any are present.
  std::optional<TimeGrid> grid() const;

 private:
  std::string label_;
  std::vector<ChaosKernel> kernels_;
  double truncation_tail_;
};

/// n! with a log-space path above n = 20.
double factorial(std::size_t n);
double log_factorial(std::size_t n);

/// Probabilists' Hermite polynomial He_n(x).
double hermite(std::size_t n, double x);

/// Exact expansion of W_1^k (1 <= k <= 12) with constant kernels.
ChaosExpansion monomial_chaos(unsigned k);

/// Expansion of exp(sqrt(beta) W_1 - beta) truncated at max_order. Throws
/// TruncationError when the dropped Poisson tail exceeds 1e-8 of the mass.
ChaosExpansion exponential_chaos(double beta, std::size_t max_order);

/// Level-n mass n! |f_n|^2; |f_0|^2 for n = 0; zero past the truncation order.
double cardinality_mass(const ChaosExpansion& chaos, std::size_t n);

/// Levels 0..max_order of the cardinality law.
std::vector<double> cardinality_law(const ChaosExpansion& chaos);

/// Spectral mass of {K : K subset of E} = sum_n n! int_{E^n} |f_n|^2.
double subset_mass(const ChaosExpansion& chaos, const IntervalUnion& region);

/// f / sqrt(E[f^2]); throws DegenerateFunctionalError when the mass is zero.
ChaosExpansion normalize_spectral(const ChaosExpansion& chaos);

/// Kernels restricted to E^n (zero outside): the expansion of E[f | F_E].
ChaosExpansion condition_on(const ChaosExpansion& chaos, const IntervalUnion& region);

/// Evaluates sum_n I_n(f_n) on a grid path using
/// I_n(g^{(x)n}) = |g|^n He_n(int g dW / |g|). Constant and separable only.
double evaluate_chaos_on_path(const ChaosExpansion& chaos, const SamplePath& path);

// Serialization.
nlohmann::json to_json(const ChaosExpansion& chaos);
ChaosExpansion chaos_from_json(const nlohmann::json& doc);

/// CSV rows "n,mass" with 17 significant digits.
std::string cardinality_csv(const std::vector<double>& law);

}  // namespace tsirelson
