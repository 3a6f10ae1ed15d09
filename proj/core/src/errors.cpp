#include "tsirelson/errors.hpp"

namespace tsirelson {

DriftEvaluationError::DriftEvaluationError(std::size_t cell, double value, std::size_t path)
    : Error("drift evaluated to non-finite value " + std::to_string(value) + " on cell " +
            std::to_string(cell) +
            (path == npos ? std::string() : " of path " + std::to_string(path))),
      cell_(cell),
      path_(path) {}

NoContractionError::NoContractionError(std::size_t iterations, double residual)
    : Error("fixed-point inversion did not converge after " + std::to_string(iterations) +
            " iterations (residual " + std::to_string(residual) + ")"),
      iterations_(iterations),
      residual_(residual) {}

}  // namespace tsirelson
