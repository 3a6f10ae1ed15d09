#pragma once

#include <span>

#include "tsirelson/grid.hpp"
#include "tsirelson/rng.hpp"

namespace tsirelson {

/// Brownian path on the grid: B_0 = 0 and i.i.d. Normal(0, dt) increments.
/// The stream is consumed from its current position.
SamplePath sample_brownian(const TimeGrid& grid, RngStream& rng);

/// Same, from a fresh copy of the stream.
SamplePath sample_brownian(const TimeGrid& grid, RngStream&& rng);

/// Left-endpoint Ito sum: sum_k integrand[k] * (driver[k+1] - driver[k]).
double ito_integral(std::span<const double> integrand, const SamplePath& driver);

/// Ito sum over the cells [from, to).
double ito_integral(std::span<const double> integrand, const SamplePath& driver,
                    std::size_t from, std::size_t to);

/// Left rectangle rule on [0, 1]: sum_k values[k] / values.size().
double quadrature(std::span<const double> values);

}  // namespace tsirelson
