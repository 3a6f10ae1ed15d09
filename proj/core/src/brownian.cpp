#include "tsirelson/brownian.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "tsirelson/errors.hpp"

namespace tsirelson {

SamplePath sample_brownian(const TimeGrid& grid, RngStream& rng) {
  std::vector<double> values(grid.n_nodes());
  const double scale = std::sqrt(grid.dt());
  values[0] = 0.0;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    values[k + 1] = values[k] + scale * rng.normal();
  }
  return SamplePath(grid, std::move(values));
}

SamplePath sample_brownian(const TimeGrid& grid, RngStream&& rng) {
  RngStream local = rng;
  return sample_brownian(grid, local);
}

double ito_integral(std::span<const double> integrand, const SamplePath& driver) {
  if (integrand.size() != driver.grid().n_steps()) {
    throw DimensionError("integrand has " + std::to_string(integrand.size()) +
                         " cells, driver grid has " + std::to_string(driver.grid().n_steps()));
  }
  return ito_integral(integrand, driver, 0, integrand.size());
}

double ito_integral(std::span<const double> integrand, const SamplePath& driver, std::size_t from,
                    std::size_t to) {
  if (integrand.size() != driver.grid().n_steps()) {
    throw DimensionError("integrand length does not match driver grid");
  }
  if (from > to || to > integrand.size()) throw DimensionError("cell range out of bounds");
  double sum = 0.0;
  for (std::size_t k = from; k < to; ++k) sum += integrand[k] * driver.increment(k);
  return sum;
}

double quadrature(std::span<const double> values) {
  if (values.empty()) throw DimensionError("quadrature needs at least one cell");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace tsirelson
