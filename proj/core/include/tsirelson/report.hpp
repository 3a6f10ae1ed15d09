#pragma once

#include <nlohmann/json.hpp>

#include "tsirelson/conditional.hpp"
#include "tsirelson/filter.hpp"
#include "tsirelson/spectral.hpp"
#include "tsirelson/stats.hpp"

namespace tsirelson {

// JSON views of the result types: nested objects carrying value/se/n/verdict.
nlohmann::json to_json(const MeanEstimate& m);
nlohmann::json to_json(const SpectralEstimate& e);
nlohmann::json to_json(const NormalizationCheck& c);
nlohmann::json to_json(const PropositionOneCheck& c);
nlohmann::json to_json(const InvertibilityReport& r);
nlohmann::json to_json(const HHatEstimate& h);
nlohmann::json to_json(const EmptySetReport& r);
nlohmann::json to_json(const InnovationCheckReport& r);

/// Summary of a regression projection: ridge cells and R^2 range.
nlohmann::json projection_summary(const ProjectedDrift& projected);

/// CSV "t,h,mean,bias,se".
std::string h_hat_csv(const HHatEstimate& h, const TimeGrid& grid);

}  // namespace tsirelson
