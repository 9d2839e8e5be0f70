#include "maxfb/solver.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "maxfb/analysis.hpp"
#include "maxfb/errors.hpp"

namespace maxfb {

TimeStep compute_dt(const YeeGrid& grid, const TensorField& eps, const TensorField& mu, double cfl_safety,
                    double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("time step: tau must be positive");
  if (!(cfl_safety > 0.0) || !std::isfinite(cfl_safety)) throw ConfigError("time step: cfl_safety must be positive");
  if (!(eps.lambda_min() > 0.0) || !(mu.lambda_min() > 0.0)) {
    throw AssumptionError("time step: materials are not positive definite");
  }
  const double c_max = 1.0 / std::sqrt(eps.lambda_min() * mu.lambda_min());
  double inv2 = 0.0;
  for (int a = 0; a < 3; ++a) inv2 += 1.0 / (grid.h(a) * grid.h(a));
  TimeStep ts;
  ts.dt_raw = cfl_safety / (c_max * std::sqrt(inv2));
  // A ratio that is an integer up to round-off must not round up to the next one.
  const double ratio = tau / ts.dt_raw;
  ts.N = std::max(1, static_cast<int>(std::ceil(ratio * (1.0 - 1e-12))));
  ts.dt = tau / ts.N;
  return ts;
}

VecX project_div_free(const VecX& E_raw, const Discretization& disc, double tol, ProjectionReport* report) {
  const VecX div0 = disc.div_eps() * E_raw;
  ProjectionReport rep;
  rep.div_before = div0.size() ? div0.cwiseAbs().maxCoeff() : 0.0;
  if (div0.size() == 0 || rep.div_before == 0.0) {
    if (report) *report = rep;
    return E_raw;
  }
  // K = -div_eps grad is symmetric positive definite for symmetric edge tensors.
  SpMat K = -(disc.div_eps() * disc.grad());
  K.makeCompressed();
  const VecX rhs = -div0;
  VecX phi;
  if (disc.eps().diagonal()) {
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-15);
    cg.setMaxIterations(10 * static_cast<int>(K.rows()));
    cg.compute(K);
    phi = cg.solve(rhs);
    rep.iterations = static_cast<int>(cg.iterations());
  } else {
    Eigen::BiCGSTAB<SpMat> bicg;
    bicg.setTolerance(1e-15);
    bicg.setMaxIterations(10 * static_cast<int>(K.rows()));
    bicg.compute(K);
    phi = bicg.solve(rhs);
    rep.iterations = static_cast<int>(bicg.iterations());
  }
  VecX E0 = E_raw - disc.grad() * phi;
  rep.div_after = (disc.div_eps() * E0).cwiseAbs().maxCoeff();
  if (report) *report = rep;
  if (!(rep.div_after <= tol)) {
    std::ostringstream os;
    os.precision(17);
    os << "divergence projection did not reach tolerance: max |div(eps E)| = " << rep.div_after << " after "
       << rep.iterations << " iterations";
    throw NumericalError(os.str());
  }
  return E0;
}

const char* initial_name(InitialPreset p) {
  switch (p) {
    case InitialPreset::off: return "off";
    case InitialPreset::gaussian: return "gaussian";
    case InitialPreset::file: return "file";
  }
  return "?";
}

InitialPreset parse_initial(const std::string& name) {
  for (auto p : {InitialPreset::off, InitialPreset::gaussian, InitialPreset::file}) {
    if (name == initial_name(p)) return p;
  }
  throw ConfigError("unknown initial preset '" + name + "'");
}

VecX gaussian_pulse(const YeeGrid& grid, const InitialSpec& spec) {
  if (!(spec.width > 0.0)) throw ConfigError("initial: gaussian width must be positive");
  VecX E(grid.edge_total());
  const double w2 = spec.width * spec.width;
  for (int e = 0; e < grid.edge_total(); ++e) {
    const Vec3 x = grid.edge_position(e);
    E[e] = spec.amplitude * spec.polarization[grid.edge_family(e)] * std::exp(-(x - spec.center).squaredNorm() / w2);
  }
  return E;
}

VecX read_edge_field(const YeeGrid& grid, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open initial field file '" + path + "'");
  VecX E(grid.edge_total());
  for (int e = 0; e < grid.edge_total(); ++e) {
    if (!(f >> E[e]) || !std::isfinite(E[e])) {
      throw ConfigError("initial field file: expected " + std::to_string(grid.edge_total()) + " finite values");
    }
  }
  double extra;
  if (f >> extra) throw ConfigError("initial field file: more values than edges");
  return E;
}

VecX initial_field(const Discretization& disc, const InitialSpec& spec) {
  switch (spec.preset) {
    case InitialPreset::off: return VecX::Zero(disc.edges());
    case InitialPreset::gaussian: return gaussian_pulse(disc.grid(), spec);
    case InitialPreset::file: return read_edge_field(disc.grid(), spec.file);
  }
  return VecX::Zero(disc.edges());
}

Stepper::Stepper(const Discretization& disc, const FeedbackLaw& law, double dt, ClosureMode mode)
    : disc_(disc), law_(law), dt_(dt), mode_(mode), h_(disc.grid().sample_count(), Vec3::Zero()) {
  if (!(dt_ > 0.0)) throw ConfigError("stepper: dt must be positive");
  lift_ = dt_ * (disc_.eps_inv() * disc_.boundary_lift());
  sweep_ = disc_.boundary_average() * lift_;
}

EMState Stepper::initial_state(const VecX& E0, const VecX& H0) const {
  EMState s;
  s.E = E0;
  const VecX half = 0.5 * dt_ * (disc_.mu_inv() * (disc_.curl() * E0));
  s.H = H0 - half;
  s.H_prev = H0 + half;
  return s;
}

namespace {

bool all_finite(const VecX& v) { return v.allFinite(); }

}  // namespace

StepStats Stepper::step(EMState& state, DelayRing& ring) {
  const auto& grid = disc_.grid();
  const int S = grid.sample_count();
  const int N = ring.depth();
  StepStats stats;

  VecX E_star = state.E + dt_ * (disc_.eps_inv() * (disc_.curl_adjoint() * state.H));
  auto stacked = [](std::vector<Vec3>& v) { return Eigen::Map<VecX>(v[0].data(), 3 * v.size()); };

  if (law_.pmc()) {
    std::fill(h_.begin(), h_.end(), Vec3::Zero());
    state.E = std::move(E_star);
  } else {
    const std::vector<Vec3> w_old = disc_.trace(state.E);
    std::vector<Vec3> z_bar(S);
    for (int s = 0; s < S; ++s) z_bar[s] = 0.5 * (ring.slot(s, N - 1) + ring.slot(s, N));

    if (mode_ == ClosureMode::explicit_lag) {
      for (int s = 0; s < S; ++s) {
        h_[s] = grid.samples()[s].normal.cross(feedback_vector(law_, w_old[s], z_bar[s]));
      }
    } else {
      const std::vector<Vec3> P = disc_.edge_average(E_star);
      const auto& metrics = disc_.boundary_metrics();
      constexpr int max_sweeps = 2000;
      constexpr double sweep_tol = 1e-13;
      std::vector<Vec3> h_new(S), AL(S);
      double diff = 0.0;
      for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        stacked(AL) = sweep_ * stacked(h_);
        double hmax = 0.0;
        diff = 0.0;
        for (int s = 0; s < S; ++s) {
          const Vec3& nu = grid.samples()[s].normal;
          // Trace predicted with every neighbour's feedback but without this sample's own.
          const Vec3 Q = AL[s] + dt_ * metrics[s].self.cwiseProduct(h_[s]);
          const Vec3 p = (P[s] + Q).cross(nu);
          // Relative accuracy keeps the sweep test meaningful for small boundary fields.
          const double scale = std::max({p.cwiseAbs().maxCoeff(), w_old[s].cwiseAbs().maxCoeff(),
                                         z_bar[s].cwiseAbs().maxCoeff()});
          const double tol = std::max(1e-15 * scale, 1e-300);
          const auto res = implicit_boundary_update(law_, p, w_old[s], z_bar[s], nu, dt_, metrics[s],
                                                    ClosureMode::centered, s, tol);
          stats.max_local_iterations = std::max(stats.max_local_iterations, res.iterations);
          h_new[s] = nu.cross(feedback_vector(law_, 0.5 * (w_old[s] + res.w), z_bar[s]));
          diff = std::max(diff, (h_new[s] - h_[s]).cwiseAbs().maxCoeff());
          hmax = std::max(hmax, h_new[s].cwiseAbs().maxCoeff());
        }
        h_.swap(h_new);
        stats.sweeps = sweep;
        if (diff <= sweep_tol * hmax) break;
        if (sweep == max_sweeps) {
          std::ostringstream os;
          os.precision(17);
          os << "boundary sweep did not converge in " << max_sweeps << " sweeps, last change " << diff;
          throw NumericalError(os.str());
        }
      }
    }
    state.E = E_star + lift_ * stacked(h_);
  }

  if (!all_finite(state.E)) throw NumericalError("non-finite field values at step " + std::to_string(state.step + 1));
  ring.advance(disc_.trace(state.E));
  state.H_prev.swap(state.H);
  state.H = state.H_prev - dt_ * (disc_.mu_inv() * (disc_.curl() * state.E));
  state.step += 1;
  state.t = state.step * dt_;
  if (!all_finite(state.H)) {
    throw NumericalError("non-finite field values at step " + std::to_string(state.step));
  }
  return stats;
}

const char* weighting_name(Weighting w) { return w == Weighting::weighted ? "weighted" : "plain"; }

Weighting parse_weighting(const std::string& name) {
  if (name == "weighted") return Weighting::weighted;
  if (name == "plain") return Weighting::plain;
  throw ConfigError("unknown energy weighting '" + name + "'");
}

std::string scenario_digest(const Scenario& sc) {
  std::ostringstream os;
  os << std::setprecision(17);
  const auto& d = sc.domain;
  os << d.lengths.transpose() << '|' << d.cells[0] << ' ' << d.cells[1] << ' ' << d.cells[2] << '|'
     << d.x0.transpose() << '|';
  for (const auto* t : {&sc.eps, &sc.mu}) {
    os << preset_name(t->preset) << ':';
    for (double p : t->params) os << p << ' ';
    os << t->file << '|';
  }
  const auto& l = sc.law;
  os << kind_name(l.kind) << ' ' << l.a << ' ' << l.b << ' ' << l.gamma1 << ' ' << l.gamma2 << ' ' << l.tau << '|';
  for (const auto& [r, g] : l.table) os << r << ':' << g << ' ';
  os << history_name(sc.history.kind) << ' ' << sc.history.value.transpose() << ' ' << sc.history.file << '|';
  const auto& in = sc.initial;
  os << initial_name(in.preset) << ' ' << in.center.transpose() << ' ' << in.width << ' ' << in.amplitude << ' '
     << in.polarization.transpose() << ' ' << in.project << ' ' << in.file << '|';
  os << sc.run.t_end << ' ' << sc.run.steps << ' ' << sc.run.cfl_safety << ' ' << sc.run.record_every << '|';
  os << weighting_name(sc.weighting) << ' ' << (sc.xi ? *sc.xi : -1.0) << ' ' << static_cast<int>(sc.closure);
  // FNV-1a, 64 bit.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

RunOutput run(const Scenario& sc, const RunOptions& options) {
  if (!(sc.run.t_end >= 0.0) || !std::isfinite(sc.run.t_end)) throw ConfigError("run: t_end must be >= 0");
  if (!(sc.run.cfl_safety > 0.0) || (sc.run.cfl_safety > 1.0 && !sc.allow_unstable_cfl)) {
    throw ConfigError("run: cfl_safety must lie in (0, 1]");
  }
  if (sc.run.record_every < 1) throw ConfigError("run: record_every must be >= 1");
  sc.law.validate();

  const YeeGrid grid = build_grid(sc.domain);
  const TensorField eps = make_tensor_field(grid, sc.eps);
  const TensorField mu = make_tensor_field(grid, sc.mu);
  const MultiplierField m = multiplier_field(grid, sc.domain.x0);

  RunOutput out;
  out.report = check_all(eps, mu, m);
  if (!out.report.pass() && !sc.unsafe) {
    throw AssumptionError("material or geometry assumptions violated\n" + out.report.summary());
  }

  const MonotonicityConstants mc = constants(sc.law);
  DissipationConstants k;
  if (sc.law.pmc()) {
    k = dissipation_constants(0.0, 0.0, mc.c1, mc.c2, 0.0);
    out.xi = 0.0;
    out.certificate_eligible = false;
    out.xi_note = "PMC control (gamma1 = gamma2 = 0): xi = 0, no decay certificate";
  } else if (!sc.xi) {
    k = xi_default(sc.law.gamma1, sc.law.gamma2, mc.c1, mc.c2);
    out.xi = k.xi;
    out.certificate_eligible = true;
    out.xi_note = "xi = midpoint of the admissible interval";
  } else {
    k = dissipation_constants(sc.law.gamma1, sc.law.gamma2, mc.c1, mc.c2, *sc.xi);
    out.xi = k.xi;
    out.certificate_eligible = k.admissible;
    out.xi_note = k.admissible ? "explicit xi inside the admissible interval"
                               : "explicit xi: admissibility condition gamma2 c2 / 2 < xi < gamma1 c1 - gamma2 c2 / 2 "
                                 "fails, no decay certificate";
  }

  out.time_step = compute_dt(grid, eps, mu, sc.run.cfl_safety, sc.law.tau);
  const double dt = out.time_step.dt;
  const Discretization disc(grid, eps, mu);

  VecX E0 = initial_field(disc, sc.initial);
  if (sc.initial.project && sc.initial.preset != InitialPreset::off) {
    ProjectionReport pr;
    E0 = project_div_free(E0, disc, 1e-10, &pr);
    out.projection_residual = pr.div_after;
  }
  Stepper stepper(disc, sc.law, dt, sc.closure);
  EMState state = stepper.initial_state(E0, VecX::Zero(disc.faces()));
  const std::vector<Vec3> trace0 = disc.trace(E0);
  DelayRing ring = init_history(sc.history, out.time_step.N, dt, grid, trace0);
  // Compatibility Z(0, s=0) = E0 x nu; the history only supplies s > 0.
  for (int s = 0; s < ring.sample_count(); ++s) ring.slot(s, 0) = trace0[s];

  long nsteps = sc.run.steps;
  if (nsteps < 0) nsteps = static_cast<long>(std::ceil(sc.run.t_end / dt * (1.0 - 1e-12)));
  out.steps = nsteps;

  out.trace.xi = out.xi;
  out.trace.dt = dt;
  out.trace.N = out.time_step.N;
  out.trace.digest = scenario_digest(sc);
  out.series.xi = out.xi;

  VecX div_e0, div_h0;
  double scale_e = 1.0, scale_h = 1.0;
  if (options.track_divergence) {
    div_e0 = disc.div_eps() * state.E;
    div_h0 = disc.div_mu() * state.H;
    const SpMat abs_e = disc.div_eps().cwiseAbs();
    const SpMat abs_h = disc.div_mu().cwiseAbs();
    scale_e = (abs_e * state.E.cwiseAbs()).maxCoeff();
    scale_h = (abs_h * state.H.cwiseAbs()).maxCoeff();
    if (!(scale_e > 0.0)) scale_e = 1.0;
    if (!(scale_h > 0.0)) scale_h = 1.0;
  }

  auto record_series = [&]() {
    const auto bi = boundary_integrals(grid, sc.law, ring);
    out.series.t.push_back(state.t);
    out.series.work.push_back(bi.work);
    out.series.sqdiff.push_back(bi.sqdiff);
    return bi;
  };
  auto record_row = [&](const BoundaryIntegrals& bi) {
    const auto ev = energies(disc, state, ring, out.xi, sc.weighting);
    EnergyRow row;
    row.t = state.t;
    row.E_weighted = ev.weighted;
    row.E_plain = ev.plain;
    row.E_xi = ev.xi_energy;
    row.D = ev.D;
    row.flux = bi.work;
    out.trace.rows.push_back(row);
    if (options.on_record) options.on_record(state.step, ring);
  };

  record_row(record_series());
  for (long n = 1; n <= nsteps; ++n) {
    try {
      stepper.step(state, ring);
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os.precision(17);
      os << e.what() << " (step " << n << ", t = " << n * dt << ")";
      throw NumericalError(os.str());
    }
    const auto bi = record_series();
    if (n % sc.run.record_every == 0 || n == nsteps) record_row(bi);
    if (options.track_divergence) {
      out.div_eps_drift =
          std::max(out.div_eps_drift, (disc.div_eps() * state.E - div_e0).cwiseAbs().maxCoeff() / scale_e);
      out.div_mu_drift = std::max(out.div_mu_drift, (disc.div_mu() * state.H - div_h0).cwiseAbs().maxCoeff() / scale_h);
    }
  }
  out.state = std::move(state);
  out.ring = std::move(ring);
  return out;
}

}  // namespace maxfb
