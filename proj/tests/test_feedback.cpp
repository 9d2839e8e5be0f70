#include <doctest.h>

#include <cmath>
#include <random>

#include "maxfb/errors.hpp"
#include "maxfb/feedback.hpp"
#include "support.hpp"

using namespace maxfb;

namespace {

FeedbackLaw saturating(double a, double b) {
  FeedbackLaw law;
  law.kind = FeedbackKind::saturating;
  law.a = a;
  law.b = b;
  return law;
}

Vec3 random_ball(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(U(rng), U(rng), U(rng));
  } while (v.squaredNorm() > 1.0);
  return radius * v;
}

}  // namespace

TEST_CASE("feedback law values") {
  FeedbackLaw lin;
  lin.a = 2.0;
  CHECK(eval_g(lin, Vec3(1, -2, 0.5)).isApprox(Vec3(2, -4, 1)));

  const FeedbackLaw sat = saturating(1.0, 1.0);
  // |v| = 1: slope 1 + 1/2.
  CHECK(eval_g(sat, Vec3(0, 1, 0)).isApprox(Vec3(0, 1.5, 0)));
  CHECK(eval_g(sat, Vec3::Zero()).isZero());
  CHECK(secant_slope(sat, 0.0) == 2.0);

  FeedbackLaw tab;
  tab.kind = FeedbackKind::table;
  tab.table = {{0.0, 0.0}, {1.0, 2.0}, {2.0, 3.0}};
  CHECK(tab.radial(0.5) == doctest::Approx(1.0));
  CHECK(tab.radial(1.5) == doctest::Approx(2.5));
  CHECK(tab.radial(4.0) == doctest::Approx(5.0));
  CHECK(eval_g(tab, Vec3(0, 0, 3)).isApprox(Vec3(0, 0, 4)));
}

TEST_CASE("monotonicity constants") {
  FeedbackLaw lin;
  lin.a = 3.0;
  auto k = constants(lin);
  CHECK(k.c1 == 3.0);
  CHECK(k.c2 == 3.0);
  CHECK(k.provenance == Provenance::analytic);

  k = constants(saturating(1.0, 0.5));
  CHECK(k.c1 == 1.0);
  CHECK(k.c2 == 1.5);

  FeedbackLaw tab;
  tab.kind = FeedbackKind::table;
  tab.table = {{0.0, 0.0}, {1.0, 1.0}, {20.0, 20.0}};
  k = constants(tab, 20000);
  CHECK(k.provenance == Provenance::sampled);
  CHECK(k.c1 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(k.c2 == doctest::Approx(1.0).epsilon(1e-9));

  FeedbackLaw flat = tab;
  flat.table = {{0.0, 0.0}, {1.0, 2.0}, {3.0, 0.5}, {20.0, 9.0}};
  CHECK_THROWS_AS(constants(flat, 20000), AssumptionError);
}

TEST_CASE("law validation") {
  FeedbackLaw law;
  law.gamma1 = -1.0;
  CHECK_THROWS_AS(law.validate(), ConfigError);
  law.gamma1 = 0.0;
  law.gamma2 = 0.0;
  CHECK_NOTHROW(law.validate());
  CHECK(law.pmc());
  law.tau = 0.0;
  CHECK_THROWS_AS(law.validate(), ConfigError);

  FeedbackLaw tab;
  tab.kind = FeedbackKind::table;
  tab.table = {{0.0, 0.0}, {2.0, 1.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(tab.validate(), ConfigError);
  CHECK_THROWS_AS(parse_table_text("0 0\n1\n"), ConfigError);
  const auto parsed = parse_table_text("# r g\n0 0\n1 2.5\n");
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[1].second == 2.5);
}

TEST_CASE("required H trace") {
  FeedbackLaw law;
  law.gamma1 = 1.0;
  law.gamma2 = 0.5;
  const Vec3 nu(0, 0, 1);
  // G = (1, 0, 0) + 0.5 (0, 2, 0); h = -G x nu.
  const Vec3 h = required_H_trace(law, Vec3(1, 0, 0), Vec3(0, 2, 0), nu);
  CHECK(h.isApprox(Vec3(-1, 1, 0)));
  CHECK(h.dot(nu) == 0.0);
  CHECK_THROWS_AS(required_H_trace(law, Vec3(1, 0, 1e-6), Vec3::Zero(), nu), ContractError);
}

TEST_CASE("h is tangential for random tangential traces") {
  std::mt19937_64 rng(11);
  const FeedbackLaw law = [] {
    FeedbackLaw l = saturating(1.0, 2.0);
    l.gamma2 = 0.4;
    return l;
  }();
  for (int i = 0; i < 1000; ++i) {
    const Vec3 nu = Vec3::Unit(i % 3) * (i % 2 ? 1.0 : -1.0);
    const Vec3 h = required_H_trace(law, test::random_tangential(rng, nu, 5.0), test::random_tangential(rng, nu, 5.0), nu);
    CHECK(std::abs(h.dot(nu)) <= 1e-15 * std::max(1.0, h.norm()));
  }
}

TEST_CASE("g is strongly monotone and Lipschitz with its constants") {
  std::mt19937_64 rng(3);
  for (const FeedbackLaw& law : {FeedbackLaw{}, saturating(0.5, 2.0)}) {
    const auto k = constants(law);
    double worst_mono = INFINITY, worst_lip = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const Vec3 u = random_ball(rng, 10.0), v = random_ball(rng, 10.0);
      const Vec3 dg = eval_g(law, u) - eval_g(law, v), du = u - v;
      const double n2 = du.squaredNorm();
      if (n2 == 0.0) continue;
      worst_mono = std::min(worst_mono, dg.dot(du) / n2);
      worst_lip = std::max(worst_lip, dg.norm() / std::sqrt(n2));
    }
    CHECK(worst_mono >= k.c1 * (1.0 - 1e-12));
    CHECK(worst_lip <= k.c2 * (1.0 + 1e-12));
  }
}

TEST_CASE("boundary update") {
  const Vec3 nu(0, 0, 1);
  BoundaryMetrics m;
  m.self = Vec3(0.7, 1.3, 0.0);
  const double dt = 0.05;

  SUBCASE("zero data stays zero") {
    FeedbackLaw law;
    const auto r = implicit_boundary_update(law, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), nu, dt, m);
    CHECK(r.w.isZero());
    CHECK(r.iterations == 0);
  }

  SUBCASE("linear law matches the closed form") {
    FeedbackLaw law;
    law.a = 1.5;
    law.gamma1 = 1.0;
    law.gamma2 = 0.5;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
      const Vec3 p = test::random_tangential(rng, nu, 2.0);
      const Vec3 wo = test::random_tangential(rng, nu, 2.0);
      const Vec3 wd = test::random_tangential(rng, nu, 2.0);
      const auto r = implicit_boundary_update(law, p, wo, wd, nu, dt, m);
      // For nu = e_z the correction is diagonal with gains (dt s_y, dt s_x).
      const Vec3 d(dt * m.self[1], dt * m.self[0], 0.0);
      for (int c = 0; c < 2; ++c) {
        const double ga = law.gamma1 * law.a;
        const double exact = (p[c] - d[c] * (0.5 * ga * wo[c] + law.gamma2 * law.a * wd[c])) / (1.0 + 0.5 * d[c] * ga);
        CHECK(std::abs(r.w[c] - exact) <= 1e-12 * std::max(1.0, std::abs(exact)));
      }
      CHECK(r.w[2] == 0.0);
    }
  }

  SUBCASE("saturating law converges on random samples") {
    FeedbackLaw law = saturating(1.0, 5.0);
    law.gamma2 = 0.5;
    std::mt19937_64 rng(7);
    BoundaryMetrics big;
    big.self = Vec3(8.0, 8.0, 8.0);
    int worst = 0;
    for (int i = 0; i < 10000; ++i) {
      const Vec3 n = Vec3::Unit(i % 3);
      const Vec3 p = test::random_tangential(rng, n, 10.0);
      const Vec3 wo = test::random_tangential(rng, n, 10.0);
      const Vec3 wd = test::random_tangential(rng, n, 10.0);
      const auto r = implicit_boundary_update(law, p, wo, wd, n, dt, big);
      CHECK(r.residual <= 1e-12);
      worst = std::max(worst, r.iterations);
    }
    CHECK(worst < 50);
  }

  SUBCASE("explicit lag uses the old trace") {
    FeedbackLaw law;
    const Vec3 p(1, 0, 0), wo(2, 0, 0);
    const auto r = implicit_boundary_update(law, p, wo, Vec3::Zero(), nu, dt, m, ClosureMode::explicit_lag);
    CHECK(r.w[0] == doctest::Approx(1.0 - dt * m.self[1] * 2.0));
  }
}
