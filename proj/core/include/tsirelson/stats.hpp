#pragma once

#include <cstddef>
#include <span>

namespace tsirelson {

/// Sample mean with its standard error (sd / sqrt(n)).
struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Pairwise (tree) summation in index order; result depends only on the data.
double pairwise_sum(std::span<const double> values);

MeanEstimate mean_estimate(std::span<const double> values);

/// Mean and SE of exp(logs[i]) computed with a max shift so large
/// exponents do not overflow before the final rescaling.
MeanEstimate exp_mean_estimate(std::span<const double> logs);

/// Mean of exp(a_i) - exp(b_i) with its SE, shifted by a common maximum.
MeanEstimate exp_difference_estimate(std::span<const double> log_a, std::span<const double> log_b);

/// Sample variance with its SE (delta method from the fourth central moment).
MeanEstimate variance_estimate(std::span<const double> values);

/// Sample excess-free kurtosis E[(x-m)^4]/Var^2 with an asymptotic SE.
MeanEstimate kurtosis_estimate(std::span<const double> values);

/// Standard normal quantile (Acklam's rational approximation, refined).
double normal_quantile(double p);

}  // namespace tsirelson
