#include <doctest.h>

#include <cmath>

#include "maxfb/errors.hpp"
#include "maxfb/operator_lab.hpp"
#include "support.hpp"

using namespace maxfb;
using test::Lattice;

namespace {

FeedbackLaw linear_law() {
  FeedbackLaw law;
  law.gamma2 = 0.5;
  return law;
}

FeedbackLaw saturating_law() {
  FeedbackLaw law;
  law.kind = FeedbackKind::saturating;
  law.b = 1.0;
  law.gamma2 = 0.5;
  return law;
}

/// Sets Z(s_0) to the trace of E so the state lies in the domain.
void close_domain(const OperatorLab& lab, ExtState& v) {
  const auto w = lab.disc().trace(v.E);
  for (int s = 0; s < lab.samples(); ++s) lab.z(v, s, 0) = w[s];
}

}  // namespace

TEST_CASE("generator constants") {
  GeneratorConstants k = generator_constants(1.0, 0.5, 1.0, 1.0, 0.25);
  CHECK(k.xi_op == 1.0);
  CHECK(k.c_weight == 0.0);
  CHECK(k.C_shift == 1.0);
  k = generator_constants(1.0, 2.0, 1.0, 1.0, 0.25);
  CHECK(k.c_weight == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  CHECK(k.C_shift == doctest::Approx(4.0 * std::log(2.0) + 1.0).epsilon(1e-15));
  CHECK_THROWS_AS(generator_constants(0.0, 0.5, 1.0, 1.0, 0.25), ContractError);
  CHECK_THROWS_AS(generator_constants(1.0, 0.5, 1.0, 1.0, 0.0), ContractError);
}

TEST_CASE("s-derivative is exact on quadratics") {
  const Lattice lat(4);
  const OperatorLab lab(lat.disc, linear_law(), 8);
  std::vector<Vec3> z(9), out(9);
  const Vec3 a(1, -2, 0.5), b(0.3, 0.1, -1), c(2, 0, 1);
  for (int j = 0; j <= 8; ++j) {
    const double s = j / 8.0;
    z[j] = a + s * b + s * s * c;
  }
  lab.ds(z.data(), out.data());
  for (int j = 0; j <= 8; ++j) CHECK((out[j] - (b + 2.0 * (j / 8.0) * c)).norm() <= 1e-12);
}

TEST_CASE("generator on simple states") {
  const Lattice lat(6);
  const OperatorLab lab(lat.disc, linear_law(), 8);
  const ExtState zero = lab.zero();
  const ExtState a0 = lab.apply_generator(zero);
  CHECK(a0.E.isZero());
  CHECK(a0.H.isZero());
  for (const auto& v : a0.Z) CHECK(v.isZero());

  SUBCASE("H part is the scaled curl of E") {
    ExtState v = lab.zero();
    for (int e = 0; e < lat.grid.edge_count(0); ++e) v.E[e] = lat.grid.edge_position(e)[1];
    close_domain(lab, v);
    for (int s = 0; s < lab.samples(); ++s)
      for (int j = 1; j <= 8; ++j) lab.z(v, s, j) = lab.z(v, s, 0);
    const ExtState a = lab.apply_generator(v);
    for (int f = 0; f < lat.disc.faces(); ++f)
      CHECK(a.H[f] == doctest::Approx(lat.grid.face_family(f) == 2 ? -1.0 : 0.0).epsilon(1e-12));
    // Constant history in s has no s-derivative.
    for (const auto& z : a.Z) CHECK(z.norm() <= 1e-12);
  }

  SUBCASE("constant E moves only boundary edges") {
    ExtState v = lab.zero();
    v.E.head(lat.grid.edge_count(0)).setOnes();
    close_domain(lab, v);
    const ExtState a = lab.apply_generator(v);
    for (int e = 0; e < lat.disc.edges(); ++e) {
      if (lat.grid.edge_samples(e).empty()) CHECK(a.E[e] == doctest::Approx(0.0));
    }
    CHECK(a.E.cwiseAbs().maxCoeff() > 0.0);
  }

  SUBCASE("Z part") {
    ExtState v = lab.zero();
    for (int s = 0; s < lab.samples(); ++s) {
      const Vec3 t = lat.grid.samples()[s].normal.unitOrthogonal();
      for (int j = 0; j <= 8; ++j) lab.z(v, s, j) = (j / 8.0) * t;
    }
    const ExtState a = lab.apply_generator(v);
    for (int s = 0; s < lab.samples(); ++s) {
      const Vec3 t = lat.grid.samples()[s].normal.unitOrthogonal();
      for (int j = 0; j <= 8; ++j) CHECK((lab.z(a, s, j) - t / lab.tau()).norm() <= 1e-12);
    }
  }
}

TEST_CASE("domain check and boundary relation") {
  const Lattice lat(4);
  const OperatorLab lab(lat.disc, saturating_law(), 8);
  std::mt19937_64 rng(6);
  ExtState v = lab.random_state(rng, 1.0);
  CHECK_NOTHROW(lab.check_domain(v));
  const auto h = lab.boundary_h(v);
  CHECK(lab.boundary_relation_residual(v, h) <= 1e-15);
  ExtState bad = v;
  lab.z(bad, 3, 0) += 1e-6 * lat.grid.samples()[3].normal.unitOrthogonal();
  CHECK_THROWS_AS(lab.check_domain(bad), ContractError);
  bad = v;
  lab.z(bad, 3, 4) += lat.grid.samples()[3].normal;
  CHECK_THROWS_AS(lab.check_domain(bad), ContractError);
}

TEST_CASE("weighted inner product") {
  const Lattice lat(4);
  const OperatorLab lab(lat.disc, linear_law(), 8);
  const auto k = generator_constants(1.0, 2.0, 1.0, 1.0, 0.25);
  std::mt19937_64 rng(12);
  for (int i = 0; i < 20; ++i) {
    const ExtState u = lab.random_state(rng, 1.0), v = lab.random_state(rng, 1.0);
    CHECK(lab.inner(u, v, k) == doctest::Approx(lab.inner(v, u, k)).epsilon(1e-13));
    CHECK(lab.inner(u, u, k) > 0.0);
    const ExtState w = OperatorLab::axpy(2.0, u, v);
    CHECK(lab.inner(w, v, k) == doctest::Approx(2.0 * lab.inner(u, v, k) + lab.inner(v, v, k)).epsilon(1e-12));
  }
}

TEST_CASE("shifted generator is monotone") {
  const Lattice lat(6);
  for (const FeedbackLaw& law : {linear_law(), saturating_law()}) {
    const OperatorLab lab(lat.disc, law, 16);
    const auto c = constants(law);
    const auto k = generator_constants(law.gamma1, law.gamma2, c.c1, c.c2, law.tau);
    const MonotonicityReport r = monotonicity_test(lab, 200, 1, k, true);
    CHECK(r.pass);
    CHECK(r.min_normalized >= -1e-10);
    CHECK(r.negative == 0);
    CHECK(r.rows.size() == 200);
    const MonotonicityReport again = monotonicity_test(lab, 200, 1, k);
    CHECK(again.min_normalized == r.min_normalized);
  }
}

TEST_CASE("without the shift the weighted pairing goes negative") {
  const Lattice lat(6);
  const OperatorLab lab(lat.disc, linear_law(), 16);
  GeneratorConstants k = generator_constants(1.0, 2.0, 1.0, 1.0, 0.25);
  k.C_shift = 0.0;
  const MonotonicityReport r = monotonicity_test(lab, 200, 1, k);
  CHECK(r.negative > 0);
  CHECK_FALSE(r.pass);
}

TEST_CASE("resolvent of zero data is zero") {
  const Lattice lat(4);
  const OperatorLab lab(lat.disc, saturating_law(), 8);
  const ResolventResult r = resolvent_solve(lab, lab.zero(), 2.0);
  CHECK(r.V.E.isZero());
  CHECK(r.V.H.isZero());
  CHECK(r.residual == 0.0);
  CHECK_THROWS_AS(resolvent_solve(lab, lab.zero(), 0.0), ContractError);
}

TEST_CASE("resolvent with the linear law") {
  const Lattice lat(6);
  const OperatorLab lab(lat.disc, linear_law(), 16);
  const ExtState F = lab.random_data(5);
  const double b = 2.0;
  const ResolventResult r = resolvent_solve(lab, F, b);
  CHECK(r.residual <= 1e-8);
  CHECK(r.residual_E <= 1e-8);
  CHECK(r.residual_H <= 1e-8);
  CHECK(r.div_ok);
  CHECK(r.relation_residual <= 1e-12);
  CHECK_NOTHROW(lab.check_domain(r.V));

  // Independent reconstruction of the history by trapezoid integration.
  const double tau = lab.tau();
  const auto w = lat.disc.trace(r.V.E);
  double worst = 0.0;
  for (int s = 0; s < lab.samples(); ++s) {
    Vec3 integral = Vec3::Zero();
    for (int j = 0; j <= 16; ++j) {
      const double sj = j / 16.0;
      if (j > 0) {
        const double sp = (j - 1) / 16.0;
        integral += 0.5 / 16.0 *
                    (std::exp(tau * b * sp) * lab.z(F, s, j - 1) + std::exp(tau * b * sj) * lab.z(F, s, j));
      }
      const Vec3 expect = std::exp(-tau * b * sj) * (w[s] + tau * integral);
      worst = std::max(worst, (lab.z(r.V, s, j) - expect).cwiseAbs().maxCoeff());
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("resolvent with the saturating law") {
  const Lattice lat(6);
  const OperatorLab lab(lat.disc, saturating_law(), 16);
  const ResolventResult r = resolvent_solve(lab, lab.random_data(9), 2.0);
  CHECK(r.residual <= 1e-8);
  CHECK(r.outer_iterations < 100);
  CHECK(r.outer_iterations > 1);
}

TEST_CASE("history error halves at least when the s-grid is refined") {
  // F3 = cos(3 s) t on every sample; the exact history at s = 1 follows from the trace.
  const Lattice lat(4);
  const double b = 2.0;
  auto error_at = [&](int M) {
    const OperatorLab lab(lat.disc, linear_law(), M);
    ExtState F = lab.zero();
    for (int s = 0; s < lab.samples(); ++s) {
      const Vec3 t = lat.grid.samples()[s].normal.unitOrthogonal();
      for (int j = 0; j <= M; ++j) lab.z(F, s, j) = std::cos(3.0 * j / M) * t;
    }
    const ResolventResult r = resolvent_solve(lab, F, b);
    const double tau = lab.tau(), kk = tau * b;
    auto prim = [&](double x) { return std::exp(kk * x) * (kk * std::cos(3 * x) + 3 * std::sin(3 * x)) / (kk * kk + 9); };
    const double I = prim(1.0) - prim(0.0);
    const auto w = lat.disc.trace(r.V.E);
    double err = 0.0;
    for (int s = 0; s < lab.samples(); ++s) {
      const Vec3 t = lat.grid.samples()[s].normal.unitOrthogonal();
      const Vec3 exact = std::exp(-kk) * (w[s] + tau * I * t);
      err = std::max(err, (lab.z(r.V, s, M) - exact).norm());
    }
    return err;
  };
  const double e16 = error_at(16), e32 = error_at(32);
  CHECK(e32 > 0.0);
  CHECK(e16 / e32 >= 2.0);
}

TEST_CASE("W_eps norm") {
  const Lattice lat(8);
  CHECK(wepsilon_norm(lat.disc, VecX::Zero(lat.disc.edges())) == 0.0);
  VecX E = VecX::Zero(lat.disc.edges());
  E.head(lat.grid.edge_count(0)).setOnes();
  // |E|^2 = 1 and four unit faces see a tangential unit trace.
  CHECK(wepsilon_norm(lat.disc, E) == doctest::Approx(5.0).epsilon(1e-13));
  std::mt19937_64 rng(1);
  const VecX a = test::random_vec(rng, lat.disc.edges());
  CHECK(wepsilon_norm(lat.disc, 3.0 * a) == doctest::Approx(9.0 * wepsilon_norm(lat.disc, a)).epsilon(1e-13));
}

TEST_CASE("curl-curl form is strongly monotone") {
  const Lattice lat(4);
  const OperatorLab lab(lat.disc, saturating_law(), 8);
  const StrongMonotonicity m = strong_monotonicity(lab, lab.random_data(2), 2.0, 100, 4);
  CHECK(m.pairs == 100);
  CHECK(m.c_star > 0.0);
}
