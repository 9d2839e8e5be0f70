#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "maxfb/analysis.hpp"
#include "maxfb/errors.hpp"
#include "support.hpp"

using namespace maxfb;
using test::Lattice;

namespace {

EnergyTrace synthetic(const std::vector<double>& t, const std::vector<double>& E, const std::vector<double>& D) {
  EnergyTrace tr;
  for (std::size_t i = 0; i < t.size(); ++i) {
    EnergyRow r;
    r.t = t[i];
    r.E_xi = r.E_weighted = r.E_plain = E[i];
    r.D = D[i];
    tr.rows.push_back(r);
  }
  return tr;
}

std::vector<double> grid_t(int n, double t_end) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = t_end * i / (n - 1);
  return t;
}

}  // namespace

TEST_CASE("energies of a hand-built state") {
  const Lattice lat(4);
  EMState st;
  st.E = VecX::Zero(lat.disc.edges());
  st.E.head(lat.grid.edge_count(0)).setOnes();
  st.H = st.H_prev = VecX::Zero(lat.disc.faces());
  DelayRing ring = init_history({}, 4, 0.0625, lat.grid);
  for (int s = 0; s < ring.sample_count(); ++s)
    for (int j = 0; j <= 4; ++j) ring.slot(s, j) = ring.normal(s).unitOrthogonal();
  const EnergyValues v = energies(lat.disc, st, ring, 0.5);
  CHECK(v.weighted == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(v.plain == doctest::Approx(0.5).epsilon(1e-14));
  // 0.5 * tau * area * |Z|^2 = 0.5 * 0.25 * 6.
  CHECK(v.xi_energy == doctest::Approx(1.25).epsilon(1e-14));
  CHECK(v.D == doctest::Approx(12.0).epsilon(1e-14));
}

TEST_CASE("admissible xi") {
  DissipationConstants k = xi_default(1.0, 0.5, 1.0, 1.0);
  CHECK(k.xi == 0.5);
  CHECK(k.lo == 0.25);
  CHECK(k.hi == 0.75);
  CHECK(k.c1E == 0.25);
  CHECK(k.c2E == 1.75);
  CHECK(k.admissible);
  k = xi_default(2.0, 0.0, 1.0, 3.0);
  CHECK(k.xi == 1.0);
  CHECK(k.c1E == 1.0);
  CHECK_THROWS_AS(xi_default(1.0, 1.0, 1.0, 1.0), AssumptionError);
  CHECK_THROWS_AS(xi_default(1.0, 1.1, 1.0, 1.0), AssumptionError);
  CHECK_FALSE(dissipation_constants(1.0, 0.5, 1.0, 1.0, 0.8).admissible);
  CHECK_FALSE(dissipation_constants(1.0, 0.5, 1.0, 1.0, 0.25).admissible);
}

TEST_CASE("xi_default sits in the middle of the interval") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.01, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double g1 = U(rng), c1 = U(rng), c2 = c1 + U(rng);
    const double g2 = 0.99 * g1 * c1 / c2 * U(rng) / 3.0;
    const auto k = xi_default(g1, g2, c1, c2);
    CHECK(k.xi > k.lo);
    CHECK(k.xi < k.hi);
    CHECK(k.c1E > 0.0);
    CHECK(k.c1E == doctest::Approx(0.5 * (g1 * c1 - g2 * c2)));
  }
}

TEST_CASE("two-sided check") {
  const auto t = grid_t(11, 1.0);
  SUBCASE("flat trace with no dissipation passes") {
    const std::vector<double> E(11, 1.0), D(11, 0.0);
    const PairCheck r = two_sided_check(t, E, D, 0.25, 1.75, 1.05);
    CHECK(r.pass);
    CHECK(r.pairs == 55);
  }
  SUBCASE("an increase with D = 0 breaks the upper side") {
    std::vector<double> E(11, 1.0), D(11, 0.0);
    for (int i = 6; i < 11; ++i) E[i] = 1.1;
    const PairCheck r = two_sided_check(t, E, D, 0.25, 1.75, 1.05);
    CHECK_FALSE(r.upper_pass);
    CHECK(r.lower_pass);
  }
  SUBCASE("a drop faster than c2E int D breaks the lower side") {
    std::vector<double> E(11), D(11, 1.0);
    for (int i = 0; i < 11; ++i) E[i] = 10.0 - 3.0 * t[i];
    const PairCheck r = two_sided_check(t, E, D, 0.25, 1.75, 1.05);
    CHECK(r.upper_pass);
    CHECK_FALSE(r.lower_pass);
  }
  SUBCASE("exact linear decay between the bounds") {
    std::vector<double> E(11), D(11, 1.0);
    for (int i = 0; i < 11; ++i) E[i] = 10.0 - t[i];
    const PairCheck r = two_sided_check(t, E, D, 1.0, 1.0, 1.0, 10000, 1, 1e-13);
    CHECK(r.pass);
    CHECK(std::abs(r.worst_upper - 1e-13) <= 1e-13);
    CHECK(std::abs(r.worst_lower - 1e-13) <= 1e-13);
  }
  SUBCASE("pair budget") {
    const auto tt = grid_t(500, 1.0);
    const std::vector<double> E(500, 1.0), D(500, 0.0);
    CHECK(two_sided_check(tt, E, D, 1.0, 1.0, 1.0, 10000).pairs == 10000);
  }
}

TEST_CASE("two-sided check is invariant under joint scaling") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = grid_t(40, 2.0);
    std::vector<double> E(40), D(40);
    double e = 1.0;
    for (int i = 0; i < 40; ++i) {
      D[i] = U(rng);
      E[i] = e;
      e -= 0.05 * (0.2 + U(rng)) * D[i];
    }
    const double s = std::pow(10.0, 6.0 * U(rng) - 3.0);
    std::vector<double> Es(E), Ds(D);
    for (int i = 0; i < 40; ++i) {
      Es[i] *= s;
      Ds[i] *= s;
    }
    const auto a = two_sided_check(t, E, D, 0.25, 1.75, 1.05, 10000, 1, 0.0);
    const auto b = two_sided_check(t, Es, Ds, 0.25, 1.75, 1.05, 10000, 1, 0.0);
    CHECK(a.pass == b.pass);
    CHECK(b.worst_upper == doctest::Approx(s * a.worst_upper).epsilon(1e-9));
  }
}

TEST_CASE("max increase") {
  const auto tr = synthetic({0, 1, 2, 3}, {4, 3, 3.5, 1}, {0, 0, 0, 0});
  CHECK(max_increase(tr) == 0.5);
  CHECK(max_increase(synthetic({0}, {1}, {0})) == 0.0);
}

TEST_CASE("observability constants on the unit cube") {
  const Lattice lat(8);
  const MaterialReport rep = check_all(lat.eps, lat.mu, multiplier_field(lat.grid, Vec3(0.5, 0.5, 0.5)));
  FeedbackLaw law;
  law.gamma2 = 0.5;
  const auto k = xi_default(1.0, 0.5, 1.0, 1.0);
  const ObservabilityConstants oc = observability_constants(rep, k, law, 1.0, 0.25);
  CHECK(oc.delta == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(oc.c == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-14));
  CHECK(oc.c_T == doctest::Approx(2.375).epsilon(1e-14));
  CHECK(oc.kappa == 1.0);

  MaterialReport bad = rep;
  bad.d1 = 0.0;
  CHECK_THROWS_AS(observability_constants(bad, k, law, 1.0, 0.25), AssumptionError);
}

TEST_CASE("observability integral check") {
  ObservabilityConstants oc;
  oc.c = 1.0;
  oc.c_T = 2.0;
  const auto t = grid_t(101, 50.0);
  SUBCASE("zero trace") {
    const auto r = lemma32_check(synthetic(t, std::vector<double>(101, 0.0), std::vector<double>(101, 0.0)), oc, 50.0);
    CHECK(r.pass);
    CHECK(r.ratio == 0.0);
  }
  SUBCASE("undamped energy over a long window is flagged") {
    const auto r = lemma32_check(synthetic(t, std::vector<double>(101, 1.0), std::vector<double>(101, 0.0)), oc, 50.0);
    CHECK_FALSE(r.pass);
    CHECK(r.lhs == doctest::Approx(50.0));
    CHECK(r.rhs == doctest::Approx(2.0));
  }
}

TEST_CASE("decay fits") {
  const auto t = grid_t(201, 10.0);
  std::vector<double> E(201);
  for (int i = 0; i < 201; ++i) E[i] = 3.0 * std::exp(-0.7 * t[i]);
  DecayFit f = fit_decay(t, E, 2.0, 8.0, E.front());
  CHECK(f.lambda == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(f.C == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(f.r2 - 1.0) <= 1e-12);
  CHECK(f.points == 121);

  const std::vector<double> flat(201, 2.0);
  f = fit_decay(t, flat, 0.0, 10.0, 2.0);
  CHECK(f.lambda == 0.0);
  CHECK(f.r2 == 0.0);

  CHECK_THROWS_AS(fit_decay(t, E, 3.01, 3.02, 3.0), ContractError);
  std::vector<double> with_zero(E);
  with_zero[100] = 0.0;
  CHECK_THROWS_AS(fit_decay(t, with_zero, 0.0, 10.0, 3.0), ContractError);
}

TEST_CASE("post-transient window") {
  const auto t = grid_t(1001, 20.0);
  std::vector<double> E(1001);
  for (int i = 0; i < 1001; ++i) E[i] = std::exp(-t[i]);
  FitWindow w = post_transient_window(synthetic(t, E, E));
  CHECK(w.reached_start);
  CHECK(w.reached_end);
  CHECK(w.t_a == doctest::Approx(std::log(100.0)).epsilon(0.01));
  CHECK(w.t_b == doctest::Approx(std::log(1e6)).epsilon(0.01));

  const std::vector<double> slow(1001, 0.5);
  w = post_transient_window(synthetic(t, slow, slow));
  CHECK_FALSE(w.reached_start);
  CHECK(w.t_a == 10.0);
  CHECK(w.t_b == 20.0);
}

TEST_CASE("segment certificate") {
  double gamma = 0.0, lambda = 0.0;
  appendix_rate(1.0, 4.0, gamma, lambda);
  CHECK(std::abs(gamma - 1.0 / 3.0) <= 1e-16);
  CHECK(std::abs(lambda - std::log(3.0) / 4.0) <= 1e-16);

  SUBCASE("exponential decay with matching dissipation") {
    // E' = -D with D = E: both hypotheses hold with c1E = c2E = 1.
    const auto t = grid_t(2001, 40.0);
    std::vector<double> E(2001);
    for (int i = 0; i < 2001; ++i) E[i] = std::exp(-t[i]);
    const AppendixReport r = appendix_analyze(t, E, E, 1.0, 1.0, 0.5, 1.0, 4.0);
    CHECK(r.c_tilde == 1.5);
    CHECK(r.segments == 10);
    CHECK(r.a1.pass);
    CHECK(r.a2_pass);
    CHECK(r.decay_pass);
    CHECK(r.certificate);
    double g = 0.0, l = 0.0;
    appendix_rate(1.5, 4.0, g, l);
    CHECK(r.gamma == g);
    CHECK(r.lambda == l);
  }
  SUBCASE("T must exceed 4c") {
    const auto t = grid_t(11, 1.0);
    const std::vector<double> E(11, 1.0);
    CHECK_THROWS_AS(appendix_analyze(t, E, E, 1.0, 1.0, 1.0, 1.0, 4.0), AssumptionError);
  }
  SUBCASE("conserved energy fails") {
    const auto t = grid_t(401, 40.0);
    const std::vector<double> E(401, 1.0), D(401, 0.0);
    const AppendixReport r = appendix_analyze(t, E, D, 1.0, 1.0, 0.5, 1.0, 4.0);
    CHECK_FALSE(r.a2_pass);
    CHECK_FALSE(r.decay_pass);
    CHECK_FALSE(r.certificate);
  }
}

TEST_CASE("energy balance of simulated runs converges at second order") {
  // Closure work is dissipated at the midpoint trace while the series samples it at the steps.
  auto residual = [](int n, long steps) {
    Scenario sc;
    sc.domain = BoxDomain::unit_cube(n);
    sc.law.gamma1 = 1.0;
    sc.law.gamma2 = 0.5;
    sc.initial.polarization = Vec3(0.3, 0.5, 1.0);
    sc.initial.center = Vec3(0.45, 0.55, 0.5);
    sc.initial.width = 0.2;
    sc.run.steps = steps;
    sc.xi = 0.5;
    const RunOutput out = run(sc);
    CHECK(max_increase(out.trace) <= 1e-12);
    return dissipation_residual(out.trace, out.series).max_relative;
  };
  // dt = 1/16 and 1/32, both up to t = 6.25.
  const double coarse = residual(8, 100), fine = residual(16, 200);
  CHECK(fine <= 1e-2);
  CHECK(coarse / fine >= 3.0);

  Scenario sc;
  sc.domain = BoxDomain::unit_cube(6);
  sc.initial.preset = InitialPreset::off;
  sc.run.steps = 20;
  const RunOutput zero = run(sc);
  CHECK(dissipation_residual(zero.trace, zero.series).max_relative == 0.0);
}

TEST_CASE("energy csv round trip") {
  EnergyTrace tr = synthetic({0.0, 0.1, 0.2}, {1.0 / 3.0, 0.25, 0.125}, {2.0, 1e-300, 0.0});
  tr.xi = 0.5;
  tr.dt = 0.1;
  tr.N = 3;
  tr.digest = "00ff";
  std::ostringstream out;
  write_energy_csv(out, tr);
  std::istringstream in(out.str());
  const EnergyTrace back = read_energy_csv(in);
  REQUIRE(back.rows.size() == 3);
  CHECK(back.rows[0].E_xi == tr.rows[0].E_xi);
  CHECK(back.rows[1].D == 1e-300);
  CHECK(back.xi == 0.5);
  CHECK(back.N == 3);
  CHECK(back.digest == "00ff");

  std::istringstream bad("t,E_weighted,E_plain,E_xi,D,flux\n0,1,1,1,1,0\n0,1,1,1,1,0\n");
  CHECK_THROWS_AS(read_energy_csv(bad).validate(), ContractError);
}
