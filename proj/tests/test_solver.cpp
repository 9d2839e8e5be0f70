#include <doctest.h>

#include <cmath>

#include "maxfb/errors.hpp"
#include "maxfb/solver.hpp"
#include "support.hpp"

using namespace maxfb;
using test::Lattice;

namespace {

Scenario small_scenario(int n, long steps) {
  Scenario sc;
  sc.domain = BoxDomain::unit_cube(n);
  sc.law.gamma1 = 1.0;
  sc.law.gamma2 = 0.5;
  sc.initial.center = Vec3(0.45, 0.55, 0.5);
  sc.initial.width = 0.2;
  sc.initial.polarization = Vec3(0.3, 0.5, 1.0);
  sc.run.steps = steps;
  sc.xi = 0.5;
  return sc;
}

}  // namespace

TEST_CASE("time step from the CFL limit") {
  const Lattice lat(32);
  TimeStep ts = compute_dt(lat.grid, lat.eps, lat.mu, 0.95, 0.25);
  CHECK(ts.N == 15);
  CHECK(ts.dt == doctest::Approx(1.0 / 60.0).epsilon(1e-15));
  CHECK(ts.dt_raw == doctest::Approx(0.95 / (32.0 * std::sqrt(3.0))));
  ts = compute_dt(lat.grid, lat.eps, lat.mu, 1.0, 0.25);
  CHECK(ts.N == 14);
  CHECK(ts.dt <= ts.dt_raw);

  TensorSpec four;
  four.params = {4.0};
  const Lattice slow(8, four);
  // c_max = 1/2 doubles the raw step.
  const TimeStep t2 = compute_dt(slow.grid, slow.eps, slow.mu, 0.5, 1.0);
  CHECK(t2.dt_raw == doctest::Approx(1.0 / (8.0 * std::sqrt(3.0))));
  CHECK(t2.N == 14);
  CHECK_THROWS_AS(compute_dt(lat.grid, lat.eps, lat.mu, 0.0, 0.25), ConfigError);
}

TEST_CASE("divergence projection") {
  TensorSpec ramp;
  ramp.preset = TensorPreset::diagonal_ramp;
  const Lattice lat(8, ramp);
  std::mt19937_64 rng(1);
  const VecX raw = test::random_vec(rng, lat.disc.edges());
  ProjectionReport rep;
  const VecX E0 = project_div_free(raw, lat.disc, 1e-10, &rep);
  CHECK(rep.div_after <= 1e-10);
  CHECK((lat.disc.div_eps() * E0).cwiseAbs().maxCoeff() <= 1e-10);
  const VecX again = project_div_free(E0, lat.disc);
  CHECK((again - E0).cwiseAbs().maxCoeff() <= 1e-9);

  const VecX phi = test::random_vec(rng, lat.disc.interior());
  const VecX grad = lat.disc.grad() * phi;
  CHECK(project_div_free(grad, lat.disc).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("stepper keeps the zero state") {
  const Lattice lat(4);
  FeedbackLaw law;
  law.gamma2 = 0.5;
  Stepper st(lat.disc, law, 0.05);
  EMState s = st.initial_state(VecX::Zero(lat.disc.edges()), VecX::Zero(lat.disc.faces()));
  DelayRing ring = init_history({}, 5, 0.05, lat.grid);
  for (int n = 0; n < 10; ++n) st.step(s, ring);
  CHECK(s.E.isZero());
  CHECK(s.H.isZero());
  CHECK(s.step == 10);
  CHECK(s.t == doctest::Approx(0.5));
}

TEST_CASE("ring slot 0 holds the trace of E") {
  const Lattice lat(6);
  FeedbackLaw law = [] {
    FeedbackLaw l;
    l.kind = FeedbackKind::saturating;
    l.b = 2.0;
    l.gamma2 = 0.5;
    return l;
  }();
  std::mt19937_64 rng(3);
  const VecX E0 = project_div_free(test::random_vec(rng, lat.disc.edges()), lat.disc);
  Stepper st(lat.disc, law, 0.02);
  EMState s = st.initial_state(E0, VecX::Zero(lat.disc.faces()));
  DelayRing ring = init_history({}, 4, 0.02, lat.grid);
  for (int n = 0; n < 8; ++n) {
    st.step(s, ring);
    const auto w = lat.disc.trace(s.E);
    for (int k = 0; k < ring.sample_count(); ++k) CHECK((ring.z0(k) - w[k]).norm() <= 1e-12);
    // The imposed H trace satisfies the boundary relation with the centred trace.
    for (int k = 0; k < ring.sample_count(); ++k) CHECK(st.last_h()[k].dot(ring.normal(k)) == doctest::Approx(0.0));
  }
}

TEST_CASE("zero-length run records the initial state only") {
  Scenario sc = small_scenario(6, 0);
  const RunOutput out = run(sc);
  REQUIRE(out.trace.rows.size() == 1);
  CHECK(out.trace.rows[0].t == 0.0);
  CHECK(out.trace.rows[0].E_weighted > 0.0);
  CHECK(out.certificate_eligible);
}

TEST_CASE("runs are deterministic") {
  Scenario sc = small_scenario(6, 40);
  const RunOutput a = run(sc), b = run(sc);
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) CHECK(a.trace.rows[i].E_xi == b.trace.rows[i].E_xi);
  CHECK(a.trace.digest == b.trace.digest);
  sc.law.gamma2 = 0.25;
  CHECK(scenario_digest(sc) != a.trace.digest);
}

TEST_CASE("PMC control conserves energy on a short run") {
  Scenario sc = small_scenario(8, 200);
  sc.law.gamma1 = sc.law.gamma2 = 0.0;
  sc.xi.reset();
  sc.run.cfl_safety = 0.5;
  const RunOutput out = run(sc);
  CHECK_FALSE(out.certificate_eligible);
  const double e0 = out.trace.rows.front().E_weighted;
  double drift = 0.0;
  for (const auto& r : out.trace.rows) drift = std::max(drift, std::abs(r.E_weighted - e0) / e0);
  CHECK(drift <= 1e-4);
}

TEST_CASE("divergence is conserved with a graded permittivity") {
  Scenario sc = small_scenario(8, 200);
  sc.eps.preset = TensorPreset::diagonal_ramp;
  RunOptions opt;
  opt.track_divergence = true;
  const RunOutput out = run(sc, opt);
  CHECK(out.div_eps_drift <= 1e-12);
  CHECK(out.projection_residual <= 1e-10);
}

TEST_CASE("CFL above one is rejected unless allowed, and then blows up") {
  Scenario sc = small_scenario(8, 2000);
  sc.law.gamma1 = sc.law.gamma2 = 0.0;
  sc.xi.reset();
  sc.run.cfl_safety = 1.05;
  // dt = tau / ceil(tau / dt_raw): a long delay keeps the effective Courant number near 1.05.
  sc.law.tau = 4.0;
  CHECK_THROWS_AS(run(sc), ConfigError);
  sc.allow_unstable_cfl = true;
  bool diverged = false;
  try {
    const RunOutput out = run(sc);
    diverged = !(out.trace.rows.back().E_weighted <= 10.0 * out.trace.rows.front().E_weighted);
  } catch (const NumericalError&) {
    diverged = true;
  }
  CHECK(diverged);
}

TEST_CASE("assumption violations stop the run unless unsafe") {
  Scenario sc = small_scenario(8, 2);
  sc.eps.preset = TensorPreset::exponential_isotropic;
  sc.eps.params = {-10.0};
  CHECK_THROWS_AS(run(sc), AssumptionError);
  sc.unsafe = true;
  CHECK_NOTHROW(run(sc));
}
