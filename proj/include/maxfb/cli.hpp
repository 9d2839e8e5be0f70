#pragma once

/// @file cli.hpp
/// @brief Subcommand dispatch, decay certificates for a recorded run and parameter sweeps.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "maxfb/analysis.hpp"
#include "maxfb/config.hpp"

namespace maxfb {

struct CertificateReport {
  bool eligible = false;
  std::string note;  // why no certificate, when not eligible
  DissipationConstants k;
  PairCheck lemma31;
  ObservabilityConstants oc;
  Lemma32Report lemma32;
  std::optional<AppendixReport> appendix;
  std::string appendix_note;
  double max_increase = 0.0;

  /// Eligible and every check that ran passed.
  bool pass() const;
};

/// Two-sided dissipation check, observability integral and the segment certificate for a
/// trace recorded with xi = trace.xi. Nothing is checked when the decay hypothesis fails.
CertificateReport certify(const Config& config, const EnergyTrace& trace, const MaterialReport& report);
/// key = value lines, 17 significant digits.
std::string format_certificate(const CertificateReport& cert);

struct Classification {
  double lambda_hat = 0.0;
  double r2 = 0.0;
  std::string label;  // decaying | non-decaying | unstable
};

/// unstable when E_xi(t_end) > 10 E_xi(0) or the run failed, decaying when the post-transient
/// fit gives lambda_hat > 0, non-decaying otherwise.
Classification classify(const EnergyTrace& trace);

struct SweepRow {
  double value = 0.0;
  Classification result;
  bool certificate_eligible = false;
  std::string note;
  std::string dir;
};

/// One run per value, each in its own subdirectory of out_dir, then sweep_summary.csv with
/// columns value,lambda_hat,r2,classification. When xi is automatic and the hypothesis fails
/// for a value, that run uses xi = gamma1 c1 / 2 and carries no certificate. Runs execute on
/// `jobs` threads; the output does not depend on jobs.
std::vector<SweepRow> run_sweep(const Config& base, const std::string& path, const std::vector<double>& values,
                                int jobs, const std::string& out_dir);

/// Runs the command line (args excludes the program name) and returns the exit code:
/// 0 ok, 2 config, 3 assumption, 4 numerical, 5 failed check under --assert.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace maxfb
