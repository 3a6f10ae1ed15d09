#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace tsirelson {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector lengths or grids that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A drift callback produced a non-finite value.
class DriftEvaluationError : public Error {
 public:
  DriftEvaluationError(std::size_t cell, double value, std::size_t path = npos);

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t cell() const noexcept { return cell_; }
  std::size_t path() const noexcept { return path_; }

 private:
  std::size_t cell_;
  std::size_t path_;
};

/// A chaos expansion would drop more mass than allowed.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, std::size_t suggested_order)
      : Error(what), suggested_order_(suggested_order) {}

  std::size_t suggested_order() const noexcept { return suggested_order_; }

 private:
  std::size_t suggested_order_;
};

/// Requested operation is not available for this kernel form or drift kind.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Functional with zero second moment cannot be normalized.
class DegenerateFunctionalError : public Error {
 public:
  using Error::Error;
};

/// Picard iteration failed to reach the requested residual.
class NoContractionError : public Error {
 public:
  NoContractionError(std::size_t iterations, double residual);

  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

/// No realizable inverse filter is available for the drift.
class NotRealizableError : public Error {
 public:
  using Error::Error;
};

/// An estimator refused to run because its hypothesis was rejected.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration; `field()` holds a JSON-pointer style path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace tsirelson
