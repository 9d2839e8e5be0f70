#pragma once

#include <stdexcept>
#include <string>

namespace maxfb {

/// Process exit codes shared by every front end.
enum class ExitCode : int {
  ok = 0,
  config = 2,
  assumption = 3,
  numerical = 4,
  assertion = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Bad user input: config syntax, out-of-range parameters, malformed files.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

/// Caller broke a documented precondition (non-tangential trace and similar).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ExitCode::config, what) {}
};

/// A modelling hypothesis does not hold (materials, geometry, feedback gains).
class AssumptionError : public Error {
 public:
  explicit AssumptionError(const std::string& what) : Error(ExitCode::assumption, what) {}
};

class GeometryError : public AssumptionError {
 public:
  explicit GeometryError(const std::string& what) : AssumptionError(what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::numerical, what) {}
};

}  // namespace maxfb
