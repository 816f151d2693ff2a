#pragma once

#include <stdexcept>
#include <string>

namespace compositeflow {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller misuse: dimension mismatches, invalid arguments.
struct UsageError : Error {
  using Error::Error;
};

/// Invalid configuration: schema violations and parameter constraints.
/// The message names the offending key or quotes the violated constraint.
struct ConfigError : Error {
  using Error::Error;
};

/// A numerical routine failed to meet its tolerance.
struct NumericalError : Error {
  NumericalError(const std::string& what, double last_estimate)
      : Error(what), last_estimate(last_estimate) {}
  explicit NumericalError(const std::string& what) : Error(what), last_estimate(0) {}
  double last_estimate;
};

/// Non-finite value encountered while iterating.
struct DivergenceError : NumericalError {
  using NumericalError::NumericalError;
};

/// Operation requires a surjective operator (positive definite A*A^T).
struct SurjectivityError : Error {
  using Error::Error;
};

/// Too few usable points for a statistical fit.
struct InsufficientDataError : Error {
  using Error::Error;
};

}  // namespace compositeflow
