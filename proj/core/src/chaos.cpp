#include "tsirelson/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "tsirelson/errors.hpp"

namespace tsirelson {

namespace {

constexpr std::size_t kExactFactorialLimit = 20;
constexpr double kRelativeTailLimit = 1e-8;

// n! * x without forming n! for large n.
double scale_by_factorial(std::size_t n, double x) {
  if (x == 0.0) return 0.0;
  if (n <= kExactFactorialLimit) return factorial(n) * x;
  return std::exp(log_factorial(n) + std::log(x));
}

std::size_t table_size(std::size_t resolution, std::size_t order) {
  std::size_t size = 1;
  for (std::size_t i = 0; i < order; ++i) size *= resolution;
  return size;
}

// Cell-centre coordinate of table index along one axis.
double table_centre(std::size_t index, std::size_t resolution) {
  return (static_cast<double>(index) + 0.5) / static_cast<double>(resolution);
}

std::vector<std::size_t> unflatten(std::size_t flat, std::size_t resolution, std::size_t order) {
  std::vector<std::size_t> idx(order);
  for (std::size_t d = order; d-- > 0;) {
    idx[d] = flat % resolution;
    flat /= resolution;
  }
  return idx;
}

std::size_t flatten(const std::vector<std::size_t>& idx, std::size_t resolution) {
  std::size_t flat = 0;
  for (std::size_t i : idx) flat = flat * resolution + i;
  return flat;
}

double separable_energy(const SeparableKernel& k, const IntervalUnion* region) {
  const double dt = 1.0 / static_cast<double>(k.g.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < k.g.size(); ++j) {
    if (region == nullptr || region->contains_cell(j)) sum += k.g[j] * k.g[j];
  }
  return sum * dt;
}

// Mass of one level restricted to region^n (whole cube when region is null).
double level_mass(const ChaosKernel& kernel, const IntervalUnion* region) {
  const std::size_t n = kernel.order;
  return std::visit(
      [&](const auto& form) -> double {
        using Form = std::decay_t<decltype(form)>;
        if constexpr (std::is_same_v<Form, ConstantKernel>) {
          const double length = region ? region->total_length() : 1.0;
          return scale_by_factorial(n, form.c * form.c * std::pow(length, static_cast<double>(n)));
        } else if constexpr (std::is_same_v<Form, SeparableKernel>) {
          if (region && region->grid().n_steps() != form.g.size()) {
            throw DimensionError("interval union grid does not match separable kernel grid");
          }
          const double energy = separable_energy(form, region);
          return scale_by_factorial(
              n, form.c * form.c * std::pow(energy, static_cast<double>(n)));
        } else {
          const double cell_volume = std::pow(1.0 / static_cast<double>(form.resolution),
                                              static_cast<double>(n));
          double sum = 0.0;
          for (std::size_t flat = 0; flat < form.values.size(); ++flat) {
            if (region) {
              const auto idx = unflatten(flat, form.resolution, n);
              const bool inside = std::all_of(idx.begin(), idx.end(), [&](std::size_t i) {
                return region->contains(table_centre(i, form.resolution));
              });
              if (!inside) continue;
            }
            sum += form.values[flat] * form.values[flat];
          }
          return scale_by_factorial(n, sum * cell_volume);
        }
      },
      kernel.form);
}

}  // namespace

// ---------------------------------------------------------------------------
// Kernels and expansions

void ChaosKernel::validate() const {
  std::visit(
      [&](const auto& form) {
        using Form = std::decay_t<decltype(form)>;
        if constexpr (std::is_same_v<Form, ConstantKernel>) {
          if (!std::isfinite(form.c)) throw DimensionError("constant kernel must be finite");
        } else if constexpr (std::is_same_v<Form, SeparableKernel>) {
          if (order == 0) throw DimensionError("order-0 kernel must be constant");
          if (form.g.empty()) throw DimensionError("separable kernel needs a sampled factor");
          if (!std::isfinite(form.c)) throw DimensionError("separable kernel must be finite");
          for (double v : form.g) {
            if (!std::isfinite(v)) throw DimensionError("separable kernel must be finite");
          }
        } else {
          if (order == 0) throw DimensionError("order-0 kernel must be constant");
          if (order > 3) throw UnsupportedError("tabulated kernels are limited to order 3");
          if (form.resolution == 0) throw DimensionError("tabulated kernel needs a resolution");
          if (form.values.size() != table_size(form.resolution, order)) {
            throw DimensionError("tabulated kernel has the wrong number of values");
          }
          double scale = 0.0;
          for (double v : form.values) {
            if (!std::isfinite(v)) throw DimensionError("tabulated kernel must be finite");
            scale = std::max(scale, std::abs(v));
          }
          // Symmetry under adjacent transpositions generates all permutations.
          for (std::size_t flat = 0; flat < form.values.size(); ++flat) {
            auto idx = unflatten(flat, form.resolution, order);
            for (std::size_t d = 0; d + 1 < order; ++d) {
              auto swapped = idx;
              std::swap(swapped[d], swapped[d + 1]);
              const double other = form.values[flatten(swapped, form.resolution)];
              if (std::abs(other - form.values[flat]) > 1e-12 * std::max(1.0, scale)) {
                throw DimensionError("tabulated kernel is not symmetric");
              }
            }
          }
        }
      },
      form);
}

ChaosExpansion::ChaosExpansion(std::string label, std::vector<ChaosKernel> kernels,
                               double truncation_tail)
    : label_(std::move(label)), kernels_(std::move(kernels)), truncation_tail_(truncation_tail) {
  if (kernels_.empty()) throw DimensionError("chaos expansion needs at least the order-0 term");
  std::optional<std::size_t> steps;
  for (std::size_t n = 0; n < kernels_.size(); ++n) {
    if (kernels_[n].order != n) throw DimensionError("kernel list must be ordered 0..N");
    kernels_[n].validate();
    if (const auto* sep = std::get_if<SeparableKernel>(&kernels_[n].form)) {
      if (steps && *steps != sep->g.size()) {
        throw DimensionError("separable kernels must share one grid");
      }
      steps = sep->g.size();
    }
  }
  if (!(truncation_tail_ >= 0.0) || !std::isfinite(truncation_tail_)) {
    throw DimensionError("truncation tail must be finite and non-negative");
  }
}

double ChaosExpansion::mean() const { return std::get<ConstantKernel>(kernels_[0].form).c; }

double ChaosExpansion::total_mass() const {
  double sum = 0.0;
  for (std::size_t n = 0; n <= max_order(); ++n) sum += cardinality_mass(*this, n);
  return sum;
}

std::optional<TimeGrid> ChaosExpansion::grid() const {
  for (const auto& k : kernels_) {
    if (const auto* sep = std::get_if<SeparableKernel>(&k.form)) return TimeGrid(sep->g.size());
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Interval unions

IntervalUnion IntervalUnion::make(const TimeGrid& grid,
                                  std::vector<std::pair<double, double>> intervals) {
  IntervalUnion result(grid);
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& [s, t] : intervals) {
    if (!std::isfinite(s) || !std::isfinite(t) || s < 0.0 || t > 1.0 || s > t) {
      throw DimensionError("interval [" + std::to_string(s) + ", " + std::to_string(t) +
                           "] is not a sub-interval of [0, 1]");
    }
    ranges.emplace_back(grid.snap(s), grid.snap(t));
  }
  std::sort(ranges.begin(), ranges.end());
  for (const auto& r : ranges) {
    if (!result.ranges_.empty() && r.first <= result.ranges_.back().second) {
      result.ranges_.back().second = std::max(result.ranges_.back().second, r.second);
    } else {
      result.ranges_.push_back(r);
    }
  }
  return result;
}

IntervalUnion IntervalUnion::empty(const TimeGrid& grid) { return IntervalUnion(grid); }

IntervalUnion IntervalUnion::full(const TimeGrid& grid) { return make(grid, {{0.0, 1.0}}); }

std::vector<std::pair<double, double>> IntervalUnion::intervals() const {
  std::vector<std::pair<double, double>> out;
  out.reserve(ranges_.size());
  for (const auto& [a, b] : ranges_) out.emplace_back(grid_.node(a), grid_.node(b));
  return out;
}

double IntervalUnion::total_length() const noexcept {
  double sum = 0.0;
  for (const auto& [a, b] : ranges_) sum += grid_.node(b) - grid_.node(a);
  return sum;
}

bool IntervalUnion::contains_cell(std::size_t k) const noexcept {
  for (const auto& [a, b] : ranges_) {
    if (a <= k && k + 1 <= b) return true;
  }
  return false;
}

bool IntervalUnion::contains(double t) const noexcept {
  for (const auto& [a, b] : ranges_) {
    if (grid_.node(a) <= t && t <= grid_.node(b)) return true;
  }
  return false;
}

bool IntervalUnion::is_subset_of(const IntervalUnion& other) const noexcept {
  for (const auto& [a, b] : ranges_) {
    const bool covered = std::any_of(other.ranges_.begin(), other.ranges_.end(), [&](const auto& r) {
      return r.first <= a && b <= r.second;
    });
    if (!covered) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Numerics

double factorial(std::size_t n) {
  if (n <= kExactFactorialLimit) {
    double f = 1.0;
    for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
    return f;
  }
  return std::exp(log_factorial(n));
}

double log_factorial(std::size_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

double hermite(std::size_t n, double x) {
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (std::size_t k = 1; k < n; ++k) {
    const double next = x * cur - static_cast<double>(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Builders

ChaosExpansion monomial_chaos(unsigned k) {
  if (k == 0) throw DimensionError("monomial degree must be positive");
  if (k > 12) throw TruncationError("W_1^k coefficients overflow the guard for k > 12", 12);
  // x * He_n = He_{n+1} + n He_{n-1}
  std::vector<double> coeff{1.0};
  for (unsigned step = 0; step < k; ++step) {
    std::vector<double> next(coeff.size() + 1, 0.0);
    for (std::size_t n = 0; n < coeff.size(); ++n) {
      next[n + 1] += coeff[n];
      if (n > 0) next[n - 1] += static_cast<double>(n) * coeff[n];
    }
    coeff = std::move(next);
  }
  std::vector<ChaosKernel> kernels;
  for (std::size_t n = 0; n < coeff.size(); ++n) kernels.push_back({n, ConstantKernel{coeff[n]}});
  return ChaosExpansion("w1pow" + std::to_string(k), std::move(kernels));
}

ChaosExpansion exponential_chaos(double beta, std::size_t max_order) {
  if (!(beta > 0.0) || beta > 50.0) {
    throw DimensionError("exponential chaos needs 0 < beta <= 50");
  }
  const auto log_pmf = [beta](std::size_t n) {
    return -beta + static_cast<double>(n) * std::log(beta) - log_factorial(n);
  };
  // E[f^2] = 1, so the tail of the Poisson(beta) law is the dropped mass.
  const auto tail_after = [&](std::size_t order) {
    double tail = 0.0;
    for (std::size_t n = order + 1; n < order + 2000; ++n) {
      const double term = std::exp(log_pmf(n));
      tail += term;
      if (n > beta && term < 1e-300) break;
    }
    return tail;
  };
  const double tail = tail_after(max_order);
  if (tail > kRelativeTailLimit) {
    std::size_t suggested = max_order;
    while (tail_after(suggested) > kRelativeTailLimit) ++suggested;
    throw TruncationError("exponential chaos truncated at order " + std::to_string(max_order) +
                              " drops mass " + std::to_string(tail) + "; use max_order >= " +
                              std::to_string(suggested),
                          suggested);
  }
  std::vector<ChaosKernel> kernels;
  for (std::size_t n = 0; n <= max_order; ++n) {
    const double log_c =
        -beta / 2.0 + 0.5 * static_cast<double>(n) * std::log(beta) - log_factorial(n);
    kernels.push_back({n, ConstantKernel{std::exp(log_c)}});
  }
  char label[64];
  std::snprintf(label, sizeof label, "expmart(%g)", beta);
  return ChaosExpansion(label, std::move(kernels), tail);
}

// ---------------------------------------------------------------------------
// Spectral masses

double cardinality_mass(const ChaosExpansion& chaos, std::size_t n) {
  if (n > chaos.max_order()) return 0.0;
  return level_mass(chaos.kernels()[n], nullptr);
}

std::vector<double> cardinality_law(const ChaosExpansion& chaos) {
  std::vector<double> law(chaos.max_order() + 1);
  for (std::size_t n = 0; n < law.size(); ++n) law[n] = cardinality_mass(chaos, n);
  return law;
}

double subset_mass(const ChaosExpansion& chaos, const IntervalUnion& region) {
  double sum = 0.0;
  for (const auto& kernel : chaos.kernels()) {
    // The full interval reproduces the cardinality arithmetic exactly.
    const bool whole = region.node_ranges().size() == 1 && region.node_ranges()[0].first == 0 &&
                       region.node_ranges()[0].second == region.grid().n_steps();
    if (kernel.order == 0) {
      sum += level_mass(kernel, nullptr);
    } else {
      sum += level_mass(kernel, whole ? nullptr : &region);
    }
  }
  return sum;
}

ChaosExpansion normalize_spectral(const ChaosExpansion& chaos) {
  const double mass = chaos.total_mass();
  if (!(mass > 0.0)) throw DegenerateFunctionalError("functional has zero second moment");
  const double scale = 1.0 / std::sqrt(mass);
  std::vector<ChaosKernel> kernels = chaos.kernels();
  for (auto& kernel : kernels) {
    std::visit(
        [scale](auto& form) {
          using Form = std::decay_t<decltype(form)>;
          if constexpr (std::is_same_v<Form, TabulatedKernel>) {
            for (double& v : form.values) v *= scale;
          } else {
            form.c *= scale;
          }
        },
        kernel.form);
  }
  return ChaosExpansion(chaos.label(), std::move(kernels), chaos.truncation_tail() / mass);
}

ChaosExpansion condition_on(const ChaosExpansion& chaos, const IntervalUnion& region) {
  const TimeGrid& grid = region.grid();
  std::vector<double> indicator(grid.n_steps());
  for (std::size_t k = 0; k < indicator.size(); ++k) indicator[k] = region.contains_cell(k) ? 1.0 : 0.0;

  std::vector<ChaosKernel> kernels;
  for (const auto& kernel : chaos.kernels()) {
    if (kernel.order == 0) {
      kernels.push_back(kernel);
      continue;
    }
    ChaosKernel restricted{kernel.order, {}};
    std::visit(
        [&](const auto& form) {
          using Form = std::decay_t<decltype(form)>;
          if constexpr (std::is_same_v<Form, ConstantKernel>) {
            restricted.form = SeparableKernel{form.c, indicator};
          } else if constexpr (std::is_same_v<Form, SeparableKernel>) {
            if (form.g.size() != grid.n_steps()) {
              throw DimensionError("interval union grid does not match separable kernel grid");
            }
            SeparableKernel out{form.c, form.g};
            for (std::size_t k = 0; k < out.g.size(); ++k) out.g[k] *= indicator[k];
            restricted.form = std::move(out);
          } else {
            TabulatedKernel out = form;
            for (std::size_t flat = 0; flat < out.values.size(); ++flat) {
              const auto idx = unflatten(flat, out.resolution, kernel.order);
              const bool inside = std::all_of(idx.begin(), idx.end(), [&](std::size_t i) {
                return region.contains(table_centre(i, out.resolution));
              });
              if (!inside) out.values[flat] = 0.0;
            }
            restricted.form = std::move(out);
          }
        },
        kernel.form);
    kernels.push_back(std::move(restricted));
  }
  return ChaosExpansion(chaos.label() + "|E", std::move(kernels), chaos.truncation_tail());
}

double evaluate_chaos_on_path(const ChaosExpansion& chaos, const SamplePath& path) {
  double total = 0.0;
  for (const auto& kernel : chaos.kernels()) {
    const std::size_t n = kernel.order;
    total += std::visit(
        [&](const auto& form) -> double {
          using Form = std::decay_t<decltype(form)>;
          if constexpr (std::is_same_v<Form, ConstantKernel>) {
            if (n == 0) return form.c;
            return form.c * hermite(n, path.back() - path[0]);
          } else if constexpr (std::is_same_v<Form, SeparableKernel>) {
            if (form.g.size() != path.grid().n_steps()) {
              throw DimensionError("path grid does not match separable kernel grid");
            }
            const double energy = separable_energy(form, nullptr);
            if (energy == 0.0) return 0.0;
            const double norm = std::sqrt(energy);
            double stochastic = 0.0;
            for (std::size_t k = 0; k < form.g.size(); ++k) stochastic += form.g[k] * path.increment(k);
            return form.c * std::pow(norm, static_cast<double>(n)) * hermite(n, stochastic / norm);
          } else {
            throw UnsupportedError("tabulated kernels cannot be evaluated on paths");
          }
        },
        kernel.form);
  }
  return total;
}

}  // namespace tsirelson
