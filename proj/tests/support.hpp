#pragma once

#include <random>
#include <string>

#include "maxfb/discrete.hpp"

namespace maxfb::test {

/// Grid, materials and lattice operators on a box, kept together so references stay valid.
struct Lattice {
  YeeGrid grid;
  TensorField eps;
  TensorField mu;
  Discretization disc;

  explicit Lattice(const BoxDomain& d, const TensorSpec& e = {}, const TensorSpec& m = {})
      : grid(build_grid(d)), eps(make_tensor_field(grid, e)), mu(make_tensor_field(grid, m)), disc(grid, eps, mu) {}
  explicit Lattice(int n, const TensorSpec& e = {}, const TensorSpec& m = {})
      : Lattice(BoxDomain::unit_cube(n), e, m) {}
};

inline VecX random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * U(rng);
  return v;
}

inline Vec3 random_tangential(std::mt19937_64& rng, const Vec3& nu, double scale = 1.0) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Vec3 v(U(rng), U(rng), U(rng));
  v -= v.dot(nu) * nu;
  return scale * v;
}

/// Fresh scratch directory under the build tree.
std::string scratch_dir(const std::string& name);

}  // namespace maxfb::test
