#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tsirelson {

/**
 * Uniform grid on [0, 1] with `n_steps` cells and `n_steps + 1` nodes.
 *
 * Node k sits at k / n_steps, so t_0 = 0 and t_n = 1 exactly. Times passed
 * in by callers are snapped to the nearest node with `snap`.
 */
class TimeGrid {
 public:
  explicit TimeGrid(std::size_t n_steps);

  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t n_nodes() const noexcept { return n_steps_ + 1; }
  double dt() const noexcept { return dt_; }

  double node(std::size_t k) const noexcept {
    return static_cast<double>(k) / static_cast<double>(n_steps_);
  }

  /// Index of the node nearest to t (ties round up); t is clamped to [0, 1].
  std::size_t snap(double t) const noexcept;

  bool operator==(const TimeGrid& other) const noexcept { return n_steps_ == other.n_steps_; }

 private:
  std::size_t n_steps_;
  double dt_;
};

/// Real-valued path sampled at every node of a grid.
class SamplePath {
 public:
  SamplePath(TimeGrid grid, std::vector<double> values);

  /// Path identically zero.
  static SamplePath zeros(TimeGrid grid);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values_mut() noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator[](std::size_t k) const noexcept { return values_[k]; }
  double back() const noexcept { return values_.back(); }

  /// values[k + 1] - values[k].
  double increment(std::size_t k) const noexcept { return values_[k + 1] - values_[k]; }

  bool operator==(const SamplePath& other) const = default;

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

/**
 * Cameron-Martin element stored by its piecewise-constant derivative.
 *
 * The integrated path is h(t_k) = sum_{j<k} hdot_j dt and the energy is
 * sum hdot_j^2 dt, so grid quadrature of h-related quantities is exact.
 */
class CameronMartinPath {
 public:
  CameronMartinPath(TimeGrid grid, std::vector<double> derivative);

  static CameronMartinPath zero(TimeGrid grid);

  /// Derivative sampled at left cell endpoints: hdot_k = f(t_k).
  static CameronMartinPath from_derivative(TimeGrid grid, const std::function<double(double)>& f);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::span<const double> derivative() const noexcept { return derivative_; }
  double energy() const noexcept { return energy_; }

  SamplePath path() const;

 private:
  TimeGrid grid_;
  std::vector<double> derivative_;
  double energy_;
};

}  // namespace tsirelson
