#include <doctest.h>

#include <sstream>

#include "maxfb/delay_line.hpp"
#include "maxfb/errors.hpp"
#include "support.hpp"

using namespace maxfb;

namespace {

std::vector<Vec3> tagged_traces(const DelayRing& ring, double tag) {
  std::vector<Vec3> out;
  for (int s = 0; s < ring.sample_count(); ++s) {
    const Vec3& n = ring.normal(s);
    out.push_back(tag * Vec3(1, 1, 1) - tag * Vec3(1, 1, 1).dot(n) * n);
  }
  return out;
}

}  // namespace

TEST_CASE("history initialisation") {
  const YeeGrid g = build_grid(BoxDomain::unit_cube(4));
  const DelayRing zero = init_history({}, 4, 0.0625, g);
  CHECK(zero.depth() == 4);
  CHECK(zero.tau() == 0.25);
  CHECK(zero.sample_count() == g.sample_count());
  for (int s = 0; s < zero.sample_count(); ++s)
    for (int j = 0; j <= 4; ++j) CHECK(zero.slot(s, j).isZero());

  HistorySpec c;
  c.kind = HistoryKind::constant;
  c.value = Vec3(1, 0, 0);
  CHECK_THROWS_AS(init_history(c, 4, 0.1, g), ContractError);

  HistorySpec t;
  t.kind = HistoryKind::tangent;
  t.value = Vec3(1, 2, 3);
  const DelayRing tr = init_history(t, 3, 0.1, g);
  for (int s = 0; s < tr.sample_count(); ++s) {
    CHECK(tr.slot(s, 2).isApprox(Vec3(1, 2, 3).cross(tr.normal(s))));
  }

  HistorySpec rp;
  rp.kind = HistoryKind::replay;
  CHECK_THROWS_AS(init_history(rp, 3, 0.1, g), ContractError);
}

TEST_CASE("shift register order") {
  const YeeGrid g = build_grid(BoxDomain::unit_cube(4));
  DelayRing ring = init_history({}, 3, 0.1, g);
  for (int n = 1; n <= 5; ++n) ring.advance(tagged_traces(ring, n));
  for (int s = 0; s < ring.sample_count(); s += 7) {
    for (int j = 0; j <= 3; ++j) {
      const Vec3 v = tagged_traces(ring, 5 - j)[s];
      CHECK(ring.slot(s, j).isApprox(v));
    }
    CHECK(ring.z1(s).isApprox(tagged_traces(ring, 2)[s]));
  }
  std::vector<Vec3> bad = tagged_traces(ring, 1);
  bad[0] += ring.normal(0);
  CHECK_THROWS_AS(ring.advance(bad), ContractError);
  CHECK_THROWS_AS(ring.advance({}), ContractError);
}

TEST_CASE("s quadrature is the trapezoid rule") {
  const YeeGrid g = build_grid(BoxDomain::unit_cube(4));
  DelayRing ring = init_history({}, 4, 0.1, g);
  const Vec3 n = ring.normal(0);
  const Vec3 t = n.unitOrthogonal();
  for (int j = 0; j <= 4; ++j) ring.slot(0, j) = (j / 4.0) * t;
  CHECK(ring.s_quadrature(0) == doctest::Approx(0.34375).epsilon(1e-15));
  CHECK(ring.s_quadrature(1) == 0.0);
}

TEST_CASE("transport residual") {
  const YeeGrid g = build_grid(BoxDomain::unit_cube(4));
  std::mt19937_64 rng(2);
  DelayRing ring = init_history({}, 6, 0.05, g);
  std::vector<DelayRing> snaps{ring};
  for (int n = 0; n < 10; ++n) {
    std::vector<Vec3> tr;
    for (int s = 0; s < ring.sample_count(); ++s) tr.push_back(test::random_tangential(rng, ring.normal(s)));
    ring.advance(tr);
    snaps.push_back(ring);
  }
  CHECK(transport_residual(snaps).max <= 1e-14);

  snaps[4].slot(3, 2) += 1e-3 * ring.normal(3).unitOrthogonal();
  const auto r = transport_residual(snaps);
  CHECK(r.max >= 1e-3);
  CHECK(r.sample == 3);
  CHECK_THROWS_AS(transport_residual(std::vector<DelayRing>{ring}), ContractError);
}

TEST_CASE("trace csv round trip") {
  const YeeGrid g = build_grid(BoxDomain::unit_cube(4));
  std::mt19937_64 rng(9);
  DelayRing ring = init_history({}, 3, 0.1, g);
  for (int s = 0; s < ring.sample_count(); ++s)
    for (int j = 0; j <= 3; ++j) ring.slot(s, j) = test::random_tangential(rng, ring.normal(s));
  std::ostringstream out;
  write_trace_csv(out, 7, ring, true);
  DelayRing back = init_history({}, 3, 0.1, g);
  std::istringstream in(out.str());
  load_history_csv(in, back);
  for (int s = 0; s < ring.sample_count(); ++s)
    for (int j = 0; j <= 3; ++j) CHECK(back.slot(s, j) == ring.slot(s, j));

  std::istringstream partial("0,0,0,0,0,0\n");
  DelayRing p = init_history({}, 3, 0.1, g);
  CHECK_THROWS_AS(load_history_csv(partial, p), ConfigError);
}
