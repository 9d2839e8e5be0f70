#pragma once

/// @file solver.hpp
/// @brief Leapfrog stepper with the delayed nonlinear boundary closure, time step control,
/// initial data and the scenario driver.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "maxfb/delay_line.hpp"
#include "maxfb/discrete.hpp"
#include "maxfb/domain.hpp"
#include "maxfb/feedback.hpp"
#include "maxfb/trace.hpp"

namespace maxfb {

/// E at level n, H at n+1/2 and H_prev at n-1/2.
struct EMState {
  VecX E;
  VecX H;
  VecX H_prev;
  long step = 0;
  double t = 0.0;
};

struct TimeStep {
  double dt = 0.0;
  double dt_raw = 0.0;
  int N = 0;
};

/// dt_raw = safety / (c_max sqrt(sum 1/h^2)) with c_max = 1/sqrt(lmin eps lmin mu);
/// N = ceil(tau / dt_raw) and dt = tau / N.
TimeStep compute_dt(const YeeGrid& grid, const TensorField& eps, const TensorField& mu, double cfl_safety,
                    double tau);

struct ProjectionReport {
  double div_before = 0.0;
  double div_after = 0.0;
  int iterations = 0;
};

/// Removes the discrete gradient part: E0 = E_raw - grad phi with div_eps grad phi = div_eps E_raw
/// on interior nodes and phi = 0 on the boundary. Throws NumericalError unless
/// max |div_eps E0| <= tol.
VecX project_div_free(const VecX& E_raw, const Discretization& disc, double tol = 1e-10,
                      ProjectionReport* report = nullptr);

enum class InitialPreset { off, gaussian, file };

const char* initial_name(InitialPreset p);
InitialPreset parse_initial(const std::string& name);

struct InitialSpec {
  InitialPreset preset = InitialPreset::gaussian;
  Vec3 center{0.5, 0.5, 0.5};
  double width = 0.15;
  double amplitude = 1.0;
  Vec3 polarization{0.0, 0.0, 1.0};
  bool project = true;
  std::string file;
};

/// amp * p_f * exp(-|x - c|^2 / w^2) sampled at every edge midpoint.
VecX gaussian_pulse(const YeeGrid& grid, const InitialSpec& spec);
/// One value per edge, in edge index order, whitespace separated.
VecX read_edge_field(const YeeGrid& grid, const std::string& path);
/// Raw initial field for a spec (projection is applied by the caller).
VecX initial_field(const Discretization& disc, const InitialSpec& spec);

struct StepStats {
  int sweeps = 0;
  int max_local_iterations = 0;
};

class Stepper {
 public:
  Stepper(const Discretization& disc, const FeedbackLaw& law, double dt, ClosureMode mode = ClosureMode::centered);

  /// Leapfrog bootstrap: H at -dt/2 and +dt/2 from H0 by half steps.
  EMState initial_state(const VecX& E0, const VecX& H0) const;

  /// Advances E to n+1 (with the boundary solve), pushes the new trace into the ring and
  /// advances H to n+3/2. Throws NumericalError on non-finite values or a failed solve.
  StepStats step(EMState& state, DelayRing& ring);

  double dt() const { return dt_; }
  /// H trace h = H x nu imposed during the last step.
  const std::vector<Vec3>& last_h() const { return h_; }

 private:
  const Discretization& disc_;
  FeedbackLaw law_;
  double dt_;
  ClosureMode mode_;
  std::vector<Vec3> h_;
  SpMat lift_;   // dt eps^-1 W_e^-1 B: stacked h to the E increment
  SpMat sweep_;  // boundary_average() * lift_
};

enum class Weighting { weighted, plain };

const char* weighting_name(Weighting w);
Weighting parse_weighting(const std::string& name);

struct RunControls {
  double t_end = 1.0;
  long steps = -1;  // overrides t_end when >= 0
  double cfl_safety = 0.95;
  int record_every = 1;
};

struct Scenario {
  BoxDomain domain;
  TensorSpec eps;
  TensorSpec mu;
  FeedbackLaw law;
  HistorySpec history;
  InitialSpec initial;
  RunControls run;
  Weighting weighting = Weighting::weighted;
  std::optional<double> xi;  // empty: automatic
  ClosureMode closure = ClosureMode::centered;
  bool unsafe = false;
  /// Allows cfl_safety above 1 (negative controls only).
  bool allow_unstable_cfl = false;
};

struct RunOutput {
  EnergyTrace trace;
  StepSeries series;
  EMState state;
  DelayRing ring;
  TimeStep time_step;
  MaterialReport report;
  double xi = 0.0;
  /// True when the decay hypothesis gamma1 c1 > gamma2 c2 holds and xi is admissible.
  bool certificate_eligible = false;
  std::string xi_note;
  /// max over steps of |div_eps E^n - div_eps E^0| relative to the stencil term scale at n = 0.
  double div_eps_drift = 0.0;
  double div_mu_drift = 0.0;
  double projection_residual = 0.0;
  long steps = 0;
};

struct RunOptions {
  bool track_divergence = false;
  /// Called after every record with the step index and the ring (trace dumps).
  std::function<void(long, const DelayRing&)> on_record;
};

/// Runs a scenario to t_end. Throws AssumptionError when checks fail (unless unsafe), when
/// xi is automatic and no admissible value exists; NumericalError annotated with step and time.
RunOutput run(const Scenario& scenario, const RunOptions& options = {});

/// Stable short hex digest of the resolved scenario values.
std::string scenario_digest(const Scenario& scenario);

}  // namespace maxfb
