#include "tsirelson/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "tsirelson/errors.hpp"

namespace tsirelson {

namespace {

constexpr std::size_t kLeafSize = 64;

double pairwise_sum_impl(const double* data, std::size_t n) {
  if (n <= kLeafSize) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += data[i];
    return sum;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, n - half);
}

MeanEstimate from_moments(double mean, double sum_sq_dev, std::size_t n) {
  MeanEstimate est;
  est.mean = mean;
  est.n = n;
  if (n > 1) {
    const double var = std::max(0.0, sum_sq_dev / static_cast<double>(n - 1));
    est.std_error = std::sqrt(var / static_cast<double>(n));
  }
  return est;
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

MeanEstimate mean_estimate(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = pairwise_sum(values) / n;
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - mean;
    dev[i] = d * d;
  }
  return from_moments(mean, pairwise_sum(dev), values.size());
}

MeanEstimate exp_mean_estimate(std::span<const double> logs) {
  if (logs.empty()) return {};
  const double shift = *std::max_element(logs.begin(), logs.end());
  if (!std::isfinite(shift)) {
    return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            logs.size()};
  }
  std::vector<double> scaled(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) scaled[i] = std::exp(logs[i] - shift);
  MeanEstimate est = mean_estimate(scaled);
  const double factor = std::exp(shift);
  est.mean *= factor;
  est.std_error *= factor;
  return est;
}

MeanEstimate exp_difference_estimate(std::span<const double> log_a, std::span<const double> log_b) {
  if (log_a.size() != log_b.size()) throw DimensionError("paired samples differ in length");
  if (log_a.empty()) return {};
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_a.size(); ++i) shift = std::max({shift, log_a[i], log_b[i]});
  std::vector<double> diff(log_a.size());
  for (std::size_t i = 0; i < log_a.size(); ++i) {
    diff[i] = std::exp(log_a[i] - shift) - std::exp(log_b[i] - shift);
  }
  MeanEstimate est = mean_estimate(diff);
  const double factor = std::exp(shift);
  est.mean *= factor;
  est.std_error *= factor;
  return est;
}

MeanEstimate variance_estimate(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return {0.0, 0.0, n};
  const double mean = pairwise_sum(values) / static_cast<double>(n);
  std::vector<double> sq(n), quad(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = values[i] - mean;
    sq[i] = d * d;
    quad[i] = sq[i] * sq[i];
  }
  const double m2 = pairwise_sum(sq) / static_cast<double>(n);
  const double m4 = pairwise_sum(quad) / static_cast<double>(n);
  MeanEstimate est;
  est.n = n;
  est.mean = m2 * static_cast<double>(n) / static_cast<double>(n - 1);
  est.std_error = std::sqrt(std::max(0.0, m4 - m2 * m2) / static_cast<double>(n));
  return est;
}

MeanEstimate kurtosis_estimate(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 4) return {0.0, 0.0, n};
  const double mean = pairwise_sum(values) / static_cast<double>(n);
  std::vector<double> p2(n), p4(n), p6(n), p8(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = (values[i] - mean) * (values[i] - mean);
    p2[i] = d2;
    p4[i] = d2 * d2;
    p6[i] = p4[i] * d2;
    p8[i] = p4[i] * p4[i];
  }
  const double nn = static_cast<double>(n);
  const double m2 = pairwise_sum(p2) / nn;
  const double m4 = pairwise_sum(p4) / nn;
  const double m6 = pairwise_sum(p6) / nn;
  const double m8 = pairwise_sum(p8) / nn;
  MeanEstimate est;
  est.n = n;
  if (m2 <= 0.0) return est;
  est.mean = m4 / (m2 * m2);
  // Delta method on (m2, m4).
  const double g2 = -2.0 * m4 / (m2 * m2 * m2);
  const double g4 = 1.0 / (m2 * m2);
  const double var2 = m4 - m2 * m2;
  const double var4 = m8 - m4 * m4;
  const double cov = m6 - m2 * m4;
  const double var = (g2 * g2 * var2 + g4 * g4 * var4 + 2.0 * g2 * g4 * cov) / nn;
  est.std_error = std::sqrt(std::max(0.0, var));
  return est;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("normal_quantile: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

}  // namespace tsirelson
