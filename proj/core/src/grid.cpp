#include "tsirelson/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsirelson/errors.hpp"

namespace tsirelson {

TimeGrid::TimeGrid(std::size_t n_steps)
    : n_steps_(n_steps), dt_(n_steps == 0 ? 0.0 : 1.0 / static_cast<double>(n_steps)) {
  if (n_steps == 0) throw DimensionError("time grid needs at least one step");
}

std::size_t TimeGrid::snap(double t) const noexcept {
  if (!(t > 0.0)) return 0;
  if (t >= 1.0) return n_steps_;
  const double scaled = t * static_cast<double>(n_steps_);
  return std::min(n_steps_, static_cast<std::size_t>(std::floor(scaled + 0.5)));
}

SamplePath::SamplePath(TimeGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.n_nodes()) {
    throw DimensionError("sample path has " + std::to_string(values_.size()) +
                         " values, grid has " + std::to_string(grid_.n_nodes()) + " nodes");
  }
}

SamplePath SamplePath::zeros(TimeGrid grid) {
  return SamplePath(grid, std::vector<double>(grid.n_nodes(), 0.0));
}

CameronMartinPath::CameronMartinPath(TimeGrid grid, std::vector<double> derivative)
    : grid_(grid), derivative_(std::move(derivative)), energy_(0.0) {
  if (derivative_.size() != grid_.n_steps()) {
    throw DimensionError("Cameron-Martin derivative has " + std::to_string(derivative_.size()) +
                         " cells, grid has " + std::to_string(grid_.n_steps()));
  }
  for (double d : derivative_) {
    if (!std::isfinite(d)) throw DimensionError("Cameron-Martin derivative must be finite");
    energy_ += d * d;
  }
  energy_ *= grid_.dt();
}

CameronMartinPath CameronMartinPath::zero(TimeGrid grid) {
  return CameronMartinPath(grid, std::vector<double>(grid.n_steps(), 0.0));
}

CameronMartinPath CameronMartinPath::from_derivative(TimeGrid grid,
                                                     const std::function<double(double)>& f) {
  std::vector<double> derivative(grid.n_steps());
  for (std::size_t k = 0; k < derivative.size(); ++k) derivative[k] = f(grid.node(k));
  return CameronMartinPath(grid, std::move(derivative));
}

SamplePath CameronMartinPath::path() const {
  std::vector<double> values(grid_.n_nodes(), 0.0);
  const double dt = grid_.dt();
  for (std::size_t k = 0; k < derivative_.size(); ++k) {
    values[k + 1] = values[k] + derivative_[k] * dt;
  }
  return SamplePath(grid_, std::move(values));
}

}  // namespace tsirelson
