#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace d2ml {

// Coarse error category; the CLI maps each one to a stable exit code.
enum class ErrorKind { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& module, const std::string& what)
      : std::runtime_error("[" + module + "] " + what), kind_(kind), module_(module) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

struct ConfigError : Error {
  ConfigError(const std::string& module, const std::string& what)
      : Error(ErrorKind::config, module, what) {}
};

/// Malformed input: parse failures, schema violations, missing cells.
struct DataError : Error {
  DataError(const std::string& module, const std::string& what)
      : Error(ErrorKind::data, module, what) {}
};

struct DimensionError : DataError {
  using DataError::DataError;
};

struct DegenerateSeriesError : DataError {
  using DataError::DataError;
};

struct NumericalError : Error {
  NumericalError(const std::string& module, const std::string& what)
      : Error(ErrorKind::numerical, module, what) {}
};

/// A pivot fell below the singular-pivot tolerance. `pivot()` is zero-based.
class SingularityError : public NumericalError {
 public:
  SingularityError(const std::string& module, const std::string& what, std::size_t pivot)
      : NumericalError(module, what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Cholesky failed; `leading_minor()` is the 1-based order of the first non-PD minor.
class NotPositiveDefiniteError : public SingularityError {
 public:
  NotPositiveDefiniteError(const std::string& module, const std::string& what, std::size_t minor)
      : SingularityError(module, what, minor - 1), minor_(minor) {}
  std::size_t leading_minor() const noexcept { return minor_; }

 private:
  std::size_t minor_;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& module, const std::string& what, double residual)
      : NumericalError(module, what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

struct ExactFitError : NumericalError {
  using NumericalError::NumericalError;
};

struct FilterExhaustedError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace d2ml
