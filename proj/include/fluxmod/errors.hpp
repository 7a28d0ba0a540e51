#pragma once

#include <stdexcept>
#include <string>

namespace fluxmod {

/// Base of every error thrown by the library. The CLI maps the concrete
/// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the supported physical or numerical range.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative method (series, root finder, integrator) failed to reach
/// its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations, double residual)
      : Error(what + " (iterations=" + std::to_string(iterations) +
              ", residual=" + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

class CalibrationError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

/// A decay curve could not be fitted to the requested model.
class FitError : public Error {
 public:
  FitError(const std::string& what, double residual)
      : Error(what + " (residual=" + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Invalid user configuration (CLI / JSON).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fluxmod
