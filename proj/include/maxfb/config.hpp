#pragma once

/// @file config.hpp
/// @brief Sectioned `key = value` configuration: strict parsing, resolved echo and numeric
/// overrides for parameter sweeps.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maxfb/solver.hpp"

namespace maxfb {

struct LabSettings {
  int M = 16;
  long pairs = 1000;
  std::uint64_t seed = 1;
  double b = 2.0;
};

struct Config {
  Scenario scenario;
  double slack_dissipation = 1.05;
  double slack_observability = 1.10;
  std::optional<double> observability_T;  // empty: the run's final time
  std::string output_dir = "out";
  std::string table_file;  // source of scenario.law.table when kind = table
  LabSettings lab;
};

/// Parses the sectioned format: `[section]` headers, `key = value` lines, `#` comments,
/// decimal numbers only. Relative file paths are resolved against base_dir. Throws
/// ConfigError with the line number for unknown sections or keys, duplicates (citing both
/// lines), malformed or non-finite numbers, out-of-range values and missing required keys
/// (domain.nx/ny/nz, feedback.gamma1/gamma2, run.t_end or run.steps).
Config parse_config(const std::string& text, const std::string& base_dir = "");
Config load_config(const std::string& path);

/// Fully resolved config in the parse format, numbers with 17 significant digits.
/// parse_config(echo_config(c)) reproduces c.
std::string echo_config(const Config& config);

/// Sets a numeric leaf such as `feedback.gamma2`. Throws ConfigError when the path does not
/// name a numeric key or the value is out of range.
void set_numeric(Config& config, const std::string& path, double value);

/// Paths accepted by set_numeric.
std::vector<std::string> numeric_paths();

}  // namespace maxfb
