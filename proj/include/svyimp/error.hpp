#pragma once

#include <stdexcept>
#include <string>

namespace svyimp {

/// Base of every error the toolkit raises. `rethrow_with_context` rethrows
/// the same dynamic type with a prefix, so callers can label a failing
/// stage without losing the error category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[noreturn]] virtual void rethrow_with_context(const std::string& prefix) const = 0;
};

template <class Derived>
class ErrorKind : public Error {
 public:
  using Error::Error;
  [[noreturn]] void rethrow_with_context(const std::string& prefix) const override {
    throw Derived(prefix + what());
  }
};

/// Invalid or inconsistent configuration; raised before any work is done.
class ConfigError final : public ErrorKind<ConfigError> {
  using ErrorKind::ErrorKind;
};

/// Sampling design cannot be realized on the frame (e.g. stratum too small).
class DesignError final : public ErrorKind<DesignError> {
  using ErrorKind::ErrorKind;
};

class CalibrationError final : public ErrorKind<CalibrationError> {
  using ErrorKind::ErrorKind;
};

/// A covariance or cross-product matrix that must be positive definite is not.
class NumericalError final : public ErrorKind<NumericalError> {
  using ErrorKind::ErrorKind;
};

/// Cluster structure cannot identify a random-intercept model.
class DegenerateDesignError final : public ErrorKind<DegenerateDesignError> {
  using ErrorKind::ErrorKind;
};

class InsufficientDataError final : public ErrorKind<InsufficientDataError> {
  using ErrorKind::ErrorKind;
};

class PoolingError final : public ErrorKind<PoolingError> {
  using ErrorKind::ErrorKind;
};

/// Malformed input file (CSV/JSON artifacts read back by the CLI).
class FormatError final : public ErrorKind<FormatError> {
  using ErrorKind::ErrorKind;
};

}  // namespace svyimp
