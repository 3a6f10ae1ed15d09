#include <string>

#include "tsirelson/chaos.hpp"
#include "tsirelson/errors.hpp"
#include "tsirelson/format.hpp"

namespace tsirelson {

nlohmann::json to_json(const ChaosExpansion& chaos) {
  nlohmann::json kernels = nlohmann::json::array();
  for (const auto& kernel : chaos.kernels()) {
    nlohmann::json entry{{"order", kernel.order}};
    std::visit(
        [&](const auto& form) {
          using Form = std::decay_t<decltype(form)>;
          if constexpr (std::is_same_v<Form, ConstantKernel>) {
            entry["form"] = "constant";
            entry["c"] = form.c;
          } else if constexpr (std::is_same_v<Form, SeparableKernel>) {
            entry["form"] = "separable";
            entry["c"] = form.c;
            entry["g"] = form.g;
          } else {
            entry["form"] = "tabulated";
            entry["resolution"] = form.resolution;
            entry["values"] = form.values;
          }
        },
        kernel.form);
    kernels.push_back(std::move(entry));
  }
  return {{"label", chaos.label()},
          {"truncation_tail", chaos.truncation_tail()},
          {"kernels", std::move(kernels)}};
}

ChaosExpansion chaos_from_json(const nlohmann::json& doc) {
  try {
    std::vector<ChaosKernel> kernels;
    const auto& list = doc.at("kernels");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& entry = list[i];
      const std::string path = "/kernels/" + std::to_string(i);
      ChaosKernel kernel{entry.at("order").get<std::size_t>(), {}};
      const auto form = entry.at("form").get<std::string>();
      if (form == "constant") {
        kernel.form = ConstantKernel{entry.at("c").get<double>()};
      } else if (form == "separable") {
        kernel.form = SeparableKernel{entry.at("c").get<double>(),
                                      entry.at("g").get<std::vector<double>>()};
      } else if (form == "tabulated") {
        kernel.form = TabulatedKernel{entry.at("resolution").get<std::size_t>(),
                                      entry.at("values").get<std::vector<double>>()};
      } else {
        throw ConfigError(path + "/form", "unknown kernel form '" + form + "'");
      }
      kernels.push_back(std::move(kernel));
    }
    return ChaosExpansion(doc.value("label", std::string("chaos")), std::move(kernels),
                          doc.value("truncation_tail", 0.0));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("/", std::string("malformed chaos document: ") + e.what());
  }
}

std::string cardinality_csv(const std::vector<double>& law) {
  std::string out = "n,mass\n";
  for (std::size_t n = 0; n < law.size(); ++n) {
    out += csv_row({std::to_string(n), format_real(law[n])});
  }
  return out;
}

}  // namespace tsirelson
