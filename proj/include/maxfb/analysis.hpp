#pragma once

/// @file analysis.hpp
/// @brief Energies, dissipation and observability constants, inequality checks on energy
/// traces, decay fits and the segment-wise decay certificate.

#include <cstdint>
#include <string>
#include <vector>

#include "maxfb/delay_line.hpp"
#include "maxfb/discrete.hpp"
#include "maxfb/feedback.hpp"
#include "maxfb/solver.hpp"
#include "maxfb/trace.hpp"

namespace maxfb {

struct EnergyValues {
  double weighted = 0.0;
  double plain = 0.0;
  double xi_energy = 0.0;
  double D = 0.0;
};

/// Field energies, E_xi = field part (per weighting) + xi tau sum A s_quadrature, and
/// D = sum A (|Z0|^2 + |Z1|^2).
EnergyValues energies(const Discretization& disc, const EMState& state, const DelayRing& ring, double xi,
                      Weighting weighting = Weighting::weighted);

struct BoundaryIntegrals {
  double work = 0.0;    // sum A G(Z0, Z1) . Z0
  double sqdiff = 0.0;  // sum A (|Z0|^2 - |Z1|^2)
  double D = 0.0;
};

BoundaryIntegrals boundary_integrals(const YeeGrid& grid, const FeedbackLaw& law, const DelayRing& ring);

struct DissipationConstants {
  double xi = 0.0;
  double c1E = 0.0;
  double c2E = 0.0;
  double lo = 0.0;  // admissible interval (lo, hi)
  double hi = 0.0;
  bool admissible = false;
};

/// Midpoint of (gamma2 c2 / 2, gamma1 c1 - gamma2 c2 / 2). Throws AssumptionError when
/// gamma1 c1 <= gamma2 c2 (no admissible xi).
DissipationConstants xi_default(double gamma1, double gamma2, double c1, double c2);
/// Constants for an explicit xi; admissible reports interval membership.
DissipationConstants dissipation_constants(double gamma1, double gamma2, double c1, double c2, double xi);

struct PairCheck {
  bool pass = true;
  bool upper_pass = true;
  bool lower_pass = true;
  double worst_upper = 0.0;  // min over pairs of the upper-side margin (>= 0 passes)
  double worst_lower = 0.0;
  double upper_t1 = 0.0, upper_t2 = 0.0;
  double lower_t1 = 0.0, lower_t2 = 0.0;
  long pairs = 0;
  long floor_pairs = 0;  // pairs that hold only because of abs_tol
  double slack = 1.0;
  double abs_tol = 0.0;
};

/// Checks -(c1E/slack) int D + tol >= E(t2) - E(t1) >= -slack c2E int D - tol over all consecutive
/// pairs plus seeded random pairs, at most max_pairs in total. int D by the trapezoid rule.
PairCheck two_sided_check(const std::vector<double>& t, const std::vector<double>& E, const std::vector<double>& D,
                          double c1E, double c2E, double slack, long max_pairs = 10000, std::uint64_t seed = 1,
                          double abs_tol = 1e-12);
PairCheck lemma31_check(const EnergyTrace& trace, const DissipationConstants& k, double slack = 1.05,
                        long max_pairs = 10000, std::uint64_t seed = 1, double abs_tol = 1e-12);

/// Largest increase of E_xi between consecutive records (<= 0 for a non-increasing trace).
double max_increase(const EnergyTrace& trace);

struct ObservabilityConstants {
  double delta = 0.0;
  double c = 0.0;
  double c_T = 0.0;
  double kappa = 1.0;
  bool weighted = true;
  double alpha = 0.0, d1 = 0.0, beta = 0.0, m_sup = 0.0;
  double lambda_max_eps = 0.0, lambda_max_mu = 0.0;
};

/// delta = beta alpha / (m_sup^2 max(lmax eps^2, lmax mu^2)), c = m_sup lmax eps lmax mu / (d1 alpha),
/// c_T = (1/(2 delta) + c2^2 max(gamma1^2, gamma2^2)/delta) / (d1 alpha) + xi tau; c and c_T are
/// scaled by kappa = max(lmax eps, lmax mu, 1) for weighted energies. Throws AssumptionError
/// when d1 <= 0 or beta <= 0.
ObservabilityConstants observability_constants(const MaterialReport& report, const DissipationConstants& k,
                                               const FeedbackLaw& law, double c2, double tau,
                                               Weighting weighting = Weighting::weighted);

struct Lemma32Report {
  bool pass = true;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  double T = 0.0;
  double slack = 1.0;
};

/// int_0^T E_xi <= slack (c (E_xi(0) + E_xi(T)) + c_T int_0^T D), trapezoid in time.
Lemma32Report lemma32_check(const EnergyTrace& trace, const ObservabilityConstants& oc, double T,
                            double slack = 1.10);

struct DecayFit {
  double lambda = 0.0;
  double C = 0.0;
  double r2 = 0.0;
  int points = 0;
};

/// Least squares of ln E_xi against t on [t_a, t_b]. Throws ContractError when the window holds
/// fewer than two rows or a non-positive value.
DecayFit fit_decay(const EnergyTrace& trace, double t_a, double t_b);
DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& E, double t_a, double t_b,
                   double E0);

struct FitWindow {
  double t_a = 0.0;
  double t_b = 0.0;
  bool reached_start = false;
  bool reached_end = false;
};

/// Post-transient window: from the first record with E_xi < start E_xi(0) to the first with
/// E_xi < end E_xi(0). Falls back to [t_end / 2, t_end] when the start level is never reached
/// and ends at t_end when the end level is not.
FitWindow post_transient_window(const EnergyTrace& trace, double start = 1e-2, double end = 1e-6);

struct AppendixReport {
  double c_tilde = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double T = 0.0;
  PairCheck a1;
  bool a2_pass = true;
  int segments = 0;
  double worst_a2_ratio = 0.0;
  bool decay_pass = true;
  double worst_decay_ratio = 0.0;
  bool certificate = false;
};

/// Checks the two-sided hypothesis on pairs and the integral hypothesis on every full segment
/// [mT, (m+1)T] (slack each), then E(t) <= e^{-lambda t} E(0) / gamma at every sample with
/// c~ = (c_T + c c2E)/c1E, gamma = c~/(c~ + T/2), lambda = -ln(gamma)/T.
/// Throws AssumptionError unless T > 4c.
AppendixReport appendix_analyze(const std::vector<double>& t, const std::vector<double>& E,
                                const std::vector<double>& D, double c1E, double c2E, double c, double c_T,
                                double T, double slack = 1.05, long max_pairs = 10000, std::uint64_t seed = 1);

/// gamma and lambda alone.
void appendix_rate(double c_tilde, double T, double& gamma, double& lambda);

struct DissipationResidual {
  double max_relative = 0.0;
  double t1 = 0.0, t2 = 0.0;
};

/// Compares E_xi(t2) - E_xi(t1) with -int work + xi int sqdiff (trapezoid over the per-step
/// series) for consecutive records, normalized by E_xi(t1).
DissipationResidual dissipation_residual(const EnergyTrace& trace, const StepSeries& series);

}  // namespace maxfb
