#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kaczmarz {

// Base type for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration. CLI exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// Aggregation over fewer than two trials.
struct AggregationError : ConfigError {
  using ConfigError::ConfigError;
};

struct InvalidDims : ConfigError {
  using ConfigError::ConfigError;
};

// Corruption layers request more rows than floor(beta * m) allows.
struct LayerCountMismatch : ConfigError {
  using ConfigError::ConfigError;
};

// Filesystem and parsing problems. CLI exit code 4.
struct IoError : Error {
  using Error::Error;
};

struct ParseError : IoError {
  ParseError(std::size_t line, const std::string& what)
      : IoError("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

struct NonNumericField : ParseError {
  NonNumericField(std::size_t line, const std::string& field)
      : ParseError(line, "non-numeric field '" + field + "'") {}
};

struct EmptyFile : IoError {
  using IoError::IoError;
};

// Numeric and contract failures. CLI exit code 3.
struct ZeroRow : Error {
  explicit ZeroRow(std::size_t row)
      : Error("row " + std::to_string(row) + " has norm below 1e-14"),
        row(row) {}
  std::size_t row;
};

struct IndexOutOfRange : Error {
  using Error::Error;
};

struct EmptyPool : Error {
  using Error::Error;
};

struct EmptyInput : Error {
  using Error::Error;
};

struct InvalidRange : Error {
  using Error::Error;
};

struct QuantileOutOfRange : Error {
  using Error::Error;
};

struct NonUnitRow : Error {
  using Error::Error;
};

struct OracleMissing : Error {
  using Error::Error;
};

struct NoConvergence : Error {
  NoConvergence(double achieved, double required, std::size_t iters)
      : Error("no convergence after " + std::to_string(iters) +
              " iterations: residual " + std::to_string(achieved) +
              " exceeds " + std::to_string(required)),
        achieved(achieved),
        required(required),
        iters(iters) {}
  double achieved;
  double required;
  std::size_t iters;
};

struct RegimeViolation : Error {
  using Error::Error;
};

struct InvariantViolation : Error {
  using Error::Error;
};

}  // namespace kaczmarz
