#pragma once

/// @file trace.hpp
/// @brief Energy time series produced by the stepper and consumed by the analyzers.

#include <iosfwd>
#include <string>
#include <vector>

namespace maxfb {

struct EnergyRow {
  double t = 0.0;
  double E_weighted = 0.0;
  double E_plain = 0.0;
  double E_xi = 0.0;
  double D = 0.0;
  double flux = 0.0;
};

struct EnergyTrace {
  std::vector<EnergyRow> rows;
  double xi = 0.0;
  double dt = 0.0;
  int N = 0;
  std::string digest;

  /// Throws ContractError when t is not strictly increasing or a value is negative or not finite.
  void validate() const;
};

/// Boundary integrands recorded at every step, for the dissipation identity.
/// work = sum A G(Z0, Z1) . Z0 and sqdiff = sum A (|Z0|^2 - |Z1|^2).
struct StepSeries {
  std::vector<double> t;
  std::vector<double> work;
  std::vector<double> sqdiff;
  double xi = 0.0;
};

/// `# key = value` metadata lines (xi, dt, N, digest), then the header
/// `t,E_weighted,E_plain,E_xi,D,flux` and one row per record, 17 significant digits.
void write_energy_csv(std::ostream& out, const EnergyTrace& trace);
/// Reads the schema written by write_energy_csv. Metadata lines starting with `#` are
/// parsed for `xi`, `dt`, `N` and `digest`.
EnergyTrace read_energy_csv(std::istream& in);

}  // namespace maxfb
