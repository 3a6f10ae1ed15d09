#include "tsirelson/report.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "tsirelson/format.hpp"

namespace tsirelson {

std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string csv_row(std::initializer_list<std::string_view> fields) {
  std::string out;
  bool first = true;
  for (std::string_view f : fields) {
    if (!first) out += ',';
    out += f;
    first = false;
  }
  out += '\n';
  return out;
}

nlohmann::json to_json(const MeanEstimate& m) {
  return {{"value", m.mean}, {"se", m.std_error}, {"n", m.n}};
}

nlohmann::json to_json(const SpectralEstimate& e) {
  return {{"value", e.value},
          {"se", e.std_error},
          {"n", e.n_samples},
          {"method", to_string(e.method)},
          {"s_node", e.s},
          {"t_node", e.t}};
}

nlohmann::json to_json(const NormalizationCheck& c) {
  return {{"doleans", to_json(c.doleans)},
          {"energy", to_json(c.energy)},
          {"tolerance", c.tolerance},
          {"verdict", to_string(c.verdict)}};
}

nlohmann::json to_json(const PropositionOneCheck& c) {
  return {{"discrepancy", to_json(c.discrepancy)},
          {"noise_floor", c.noise_floor},
          {"bound", c.bound},
          {"r_squared", c.r_squared},
          {"verdict", to_string(c.verdict)}};
}

nlohmann::json to_json(const InvertibilityReport& r) {
  nlohmann::json doc = {{"t_node", r.t},
                        {"lhs", to_json(r.lhs)},
                        {"rhs", to_json(r.rhs)},
                        {"gap", r.gap},
                        {"gap_se", r.gap_se},
                        {"tolerance", r.tolerance},
                        {"verdict", to_string(r.verdict)},
                        {"jensen", to_string(r.jensen)},
                        {"normalization", to_json(r.normalization)}};
  if (r.reconstruction) {
    const auto& s = *r.reconstruction;
    doc["reconstruction"] = {{"paths", s.paths},
                             {"max_residual", s.max_residual},
                             {"max_input_error", s.max_input_error},
                             {"max_iterations", s.max_iterations},
                             {"converged", s.converged}};
  } else {
    doc["reconstruction"] = nullptr;
  }
  return doc;
}

nlohmann::json to_json(const HHatEstimate& h) {
  double max_abs_bias = 0.0;
  for (double b : h.bias) max_abs_bias = std::max(max_abs_bias, std::abs(b));
  return {{"nodes", h.bias.size()},
          {"max_abs_bias", max_abs_bias},
          {"worst_excess", h.worst_excess},
          {"verdict", to_string(h.verdict)}};
}

nlohmann::json to_json(const EmptySetReport& r) {
  return {{"p_empty", to_json(r.p_empty)},
          {"lower_bound", to_json(r.lower_bound)},
          {"tolerance", r.tolerance},
          {"equality_expected", r.equality_expected},
          {"verdict", to_string(r.verdict)}};
}

nlohmann::json to_json(const InnovationCheckReport& r) {
  const auto& c1 = r.condition_i;
  const auto& c3 = r.condition_iii;
  return {{"condition_i",
           {{"nodes", c1.nodes},
            {"mean_z", c1.mean_z},
            {"variance_z", c1.variance_z},
            {"z_threshold", c1.z_threshold},
            {"ks_statistic", c1.ks_statistic},
            {"ks_threshold", c1.ks_threshold},
            {"ks_p_proxy", c1.ks_p_proxy},
            {"verdict", to_string(c1.verdict)}}},
          {"condition_ii", to_json(r.condition_ii)},
          {"condition_iii",
           {{"lhs", to_json(c3.lhs)},
            {"rhs", to_json(c3.rhs)},
            {"gap", c3.gap},
            {"gap_se", c3.gap_se},
            {"tolerance", c3.tolerance},
            {"verdict", to_string(c3.verdict)}}},
          {"reconstruction_paths", r.reconstruction_paths},
          {"reconstruction_error", r.reconstruction_error},
          {"verdict", to_string(r.verdict)}};
}

nlohmann::json projection_summary(const ProjectedDrift& projected) {
  nlohmann::json doc = {{"method", to_string(projected.method())}, {"start_node", projected.start_node()}};
  const auto& diag = projected.diagnostics();
  if (!diag.empty()) {
    double lo = 1.0, sum = 0.0;
    for (const auto& d : diag) {
      lo = std::min(lo, d.r_squared);
      sum += d.r_squared;
    }
    doc["features"] = projected.features().names();
    doc["ridge_cells"] = projected.ridge_cells();
    doc["min_r_squared"] = lo;
    doc["mean_r_squared"] = sum / static_cast<double>(diag.size());
  }
  return doc;
}

std::string h_hat_csv(const HHatEstimate& h, const TimeGrid& grid) {
  std::string out = "t,h,mean,bias,se\n";
  for (std::size_t k = 0; k < h.bias.size(); ++k) {
    out += csv_row({format_real(grid.node(k)), format_real(h.h[k]), format_real(h.mean[k]),
                    format_real(h.bias[k]), format_real(h.se[k])});
  }
  return out;
}

}  // namespace tsirelson
