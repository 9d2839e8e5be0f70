#pragma once

/// @file feedback.hpp
/// @brief Boundary feedback law g, its monotonicity constants and the per-sample boundary solve.

#include <string>
#include <utility>
#include <vector>

#include "maxfb/domain.hpp"

namespace maxfb {

enum class FeedbackKind { linear, saturating, table };

const char* kind_name(FeedbackKind k);
FeedbackKind parse_kind(const std::string& name);

/// Radial law g(v) = phi(|v|) v / |v| with phi(0) = 0.
///
/// linear: phi(r) = a r. saturating: phi(r) = a r + b r / (1 + r).
/// table: phi interpolated linearly through (r, g(r)) pairs, extended by the last slope.
struct FeedbackLaw {
  FeedbackKind kind = FeedbackKind::linear;
  double a = 1.0;
  double b = 0.0;
  double gamma1 = 1.0;
  double gamma2 = 0.0;
  double tau = 0.25;
  std::vector<std::pair<double, double>> table;

  /// Both gains zero: the conservative control with H x nu = 0 on the boundary.
  bool pmc() const { return gamma1 == 0.0 && gamma2 == 0.0; }
  /// Throws ConfigError on out-of-range parameters.
  void validate() const;
  double radial(double r) const;
};

enum class Provenance { analytic, sampled };

struct MonotonicityConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  Provenance provenance = Provenance::analytic;
};

Vec3 eval_g(const FeedbackLaw& law, const Vec3& v);
/// phi(r) / r, so that g(v) = secant_slope(|v|) v; the limit slope at r = 0.
double secant_slope(const FeedbackLaw& law, double r);

/// Analytic constants for the shipped laws; for tables a quasi-random estimate over
/// pairs in the ball |v| <= 10. Throws AssumptionError when c1 <= 0.
MonotonicityConstants constants(const FeedbackLaw& law, int sample_pairs = 100000);

/// Parses `r g(r)` lines into a table law (a, b unused).
std::vector<std::pair<double, double>> parse_table_text(const std::string& text);
std::vector<std::pair<double, double>> read_table_file(const std::string& path);

constexpr double kTangentialTol = 1e-12;

/// Throws ContractError if |v . nu| exceeds kTangentialTol (scaled by max(1, |v|)).
void require_tangential(const Vec3& v, const Vec3& nu, const char* what);

/// G = gamma1 g(w_now) + gamma2 g(w_delayed): the total feedback vector.
Vec3 feedback_vector(const FeedbackLaw& law, const Vec3& w_now, const Vec3& w_delayed);

/// h = H x nu demanded by the boundary relation: h = -gamma1 g(w_now) x nu - gamma2 g(w_delayed) x nu.
Vec3 required_H_trace(const FeedbackLaw& law, const Vec3& w_now, const Vec3& w_delayed, const Vec3& nu);

/// Per-sample coefficients of the boundary trace update. self[c] multiplied by dt is the
/// change of the averaged edge component c per unit of h[c] supplied at this sample.
struct BoundaryMetrics {
  Vec3 self = Vec3::Zero();
};

enum class ClosureMode { centered, explicit_lag };

struct BoundaryUpdateResult {
  Vec3 w;
  int iterations = 0;
  double residual = 0.0;
};

/// Solves w = p - T(G((w_old + w)/2, w_delayed)) for the new tangential trace w, where
/// T(G) = (dt * self o (nu x G)) x nu and p is the trace predicted without this sample's
/// own feedback. Damped fixed point to `tol` per component (at most 1e-12), or to the round-off
/// level of the terms when that is larger, 50 iterations.
/// Each component is relaxed by the secant slope of g; the damping halves whenever the
/// residual grows.
/// In explicit-lag mode G is evaluated at w_old and no iteration is needed.
BoundaryUpdateResult implicit_boundary_update(const FeedbackLaw& law, const Vec3& p, const Vec3& w_old,
                                              const Vec3& w_delayed, const Vec3& nu, double dt,
                                              const BoundaryMetrics& metrics,
                                              ClosureMode mode = ClosureMode::centered, int sample = -1,
                                              double tol = 1e-12);

}  // namespace maxfb
