#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dlsched {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyTrace : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ConfigMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class HorizonTooShort : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvalidEta : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class BadCycleShape : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NonpositiveBound : public Error {
 public:
  using Error::Error;
};

class UnknownDegree : public Error {
 public:
  using Error::Error;
};

class SolverFailure : public Error {
 public:
  using Error::Error;
};

class ConservationViolated : public Error {
 public:
  using Error::Error;
};

/// Raised when a bounded enumeration or exact search exceeds its limits.
class OracleOverflow : public Error {
 public:
  using Error::Error;
};

class EnumerationOverflow : public OracleOverflow {
 public:
  using OracleOverflow::OracleOverflow;
};

class InstanceTooLarge : public OracleOverflow {
 public:
  using OracleOverflow::OracleOverflow;
};

}  // namespace dlsched
