#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace spt {

// Argument and domain violations use std::invalid_argument and
// std::domain_error directly. The types below carry conditions that callers
// are expected to distinguish (the CLI maps them onto exit codes).

/// Bad or inconsistent input data (CSV parse failures, membership violations).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: NaN likelihoods, non-finite Gram entries, failed
/// finite differences.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Functionally generated weight fell below the long-only tolerance.
class NotLongOnlyError : public NumericError {
 public:
  NotLongOnlyError(const std::string& what, std::size_t asset)
      : NumericError(what), asset_(asset) {}
  [[nodiscard]] std::size_t asset() const noexcept { return asset_; }

 private:
  std::size_t asset_;
};

/// Sharpe ratio requested on a return series with zero sample variance.
class UndefinedSharpeError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Strategy placed weight on an asset outside the day's universe.
class MembershipError : public DataError {
 public:
  MembershipError(const std::string& what, std::string date, std::size_t asset)
      : DataError(what), date_(std::move(date)), asset_(asset) {}
  [[nodiscard]] const std::string& date() const noexcept { return date_; }
  [[nodiscard]] std::size_t asset() const noexcept { return asset_; }

 private:
  std::string date_;
  std::size_t asset_;
};

/// A decision rule asked for information dated at or after its decision day.
class LookAheadError : public DataError {
 public:
  using DataError::DataError;
};

/// A sampler could not find a starting point with finite likelihood.
class InitializationError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Every candidate of a search failed to evaluate.
class NoFeasiblePointError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Requested problem size exceeds the configured memory budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spt
