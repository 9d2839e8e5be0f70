#pragma once

/// @file operator_lab.hpp
/// @brief Semi-discrete extended generator on (E, H, Z), its monotonicity under the
/// e^{cs}-weighted product, and the resolvent solve by elimination of H and Z.

#include <cstdint>
#include <random>
#include <vector>

#include "maxfb/discrete.hpp"
#include "maxfb/feedback.hpp"

namespace maxfb {

/// Element of the extended space. Z holds S x (M+1) tangential vectors, sample-major, with
/// node j at s_j = j / M.
struct ExtState {
  VecX E;
  VecX H;
  std::vector<Vec3> Z;
};

struct GeneratorConstants {
  double xi_op = 0.0;
  double c_weight = 0.0;
  double C_shift = 0.0;
};

/// xi_op = gamma1 c1, c_weight = max(0, 2 ln(gamma2 c2 / (2 sqrt((gamma1 c1 - xi_op/2) xi_op/2)))),
/// C_shift = c_weight / (2 tau) + 1. Throws ContractError unless gamma1 c1 > 0 and tau > 0.
GeneratorConstants generator_constants(double gamma1, double gamma2, double c1, double c2, double tau);

/// Discrete operator context: lattice operators, feedback law, delay and the s-grid.
class OperatorLab {
 public:
  OperatorLab(const Discretization& disc, const FeedbackLaw& law, int M = 16);

  const Discretization& disc() const { return disc_; }
  const FeedbackLaw& law() const { return law_; }
  int M() const { return M_; }
  int samples() const { return disc_.grid().sample_count(); }
  double tau() const { return law_.tau; }

  Vec3& z(ExtState& v, int s, int j) const { return v.Z[static_cast<std::size_t>(s) * (M_ + 1) + j]; }
  const Vec3& z(const ExtState& v, int s, int j) const { return v.Z[static_cast<std::size_t>(s) * (M_ + 1) + j]; }

  ExtState zero() const;
  /// Throws ContractError unless Z is tangential and Z(s_0) = E x nu at every sample (1e-12).
  void check_domain(const ExtState& v) const;
  /// h = H x nu demanded by the boundary relation, from Z(s_0) and Z(s_M).
  std::vector<Vec3> boundary_h(const ExtState& v) const;
  /// max |h + gamma1 g(Z0) x nu + gamma2 g(ZM) x nu| over samples.
  double boundary_relation_residual(const ExtState& v, const std::vector<Vec3>& h) const;

  /// (-eps^-1 curl_h(H, h), mu^-1 curl E, tau^-1 d_s Z). d_s is second order: forward
  /// 3-point at s = 0, central at s_1, upwind (BDF2) for j >= 2.
  ExtState apply_generator(const ExtState& v) const;
  /// d_s on one sample's nodes.
  void ds(const Vec3* z, Vec3* out) const;

  /// (eps E, E')_W + (mu H, H')_W + xi tau sum A sum_j w_j e^{c s_j} Z_j . Z'_j (trapezoid w_j).
  double inner(const ExtState& u, const ExtState& v, const GeneratorConstants& k) const;

  /// Random element of the discrete domain: uniform E and H of size `scale`, Z(s_0) = E x nu
  /// and, for j >= 1, Z(s_j) = Z(s_0) + sum_{m=1..4} c_m sin(m pi s_j / 2) + tangential nodal
  /// noise. Each c_m has its own log-uniform size in scale * [10^-1.5, 10^1.5], the noise in
  /// scale * [10^-2, 1].
  ExtState random_state(std::mt19937_64& rng, double scale) const;
  /// Random data F: F1 projected div_eps-free, uniform F2, independent tangential F3 at every node.
  ExtState random_data(std::uint64_t seed) const;

  static ExtState axpy(double a, const ExtState& x, const ExtState& y);

 private:
  const Discretization& disc_;
  FeedbackLaw law_;
  int M_;
};

struct PairRow {
  long pair_id = 0;
  double pairing = 0.0;
  double norm2 = 0.0;
  double normalized = 0.0;
};

struct MonotonicityReport {
  long pairs = 0;
  double min_normalized = 0.0;
  long worst_pair = -1;
  long negative = 0;
  bool pass = false;  // min_normalized >= -1e-10
  GeneratorConstants constants;
  std::vector<PairRow> rows;
};

/// <(C + A)v - (C + A)v', v - v'> / |v - v'|^2 over random domain pairs. Half of the pairs are
/// independent draws, half are perturbations of size 1e-3; amplitudes vary over 1e-2..10.
/// Pair i draws from a generator seeded by (seed, i).
MonotonicityReport monotonicity_test(const OperatorLab& lab, long n_pairs, std::uint64_t seed,
                                     const GeneratorConstants& k, bool keep_rows = false);

struct ResolventOptions {
  double outer_tol = 1e-10;
  int max_outer = 100;
  double krylov_tol = 1e-12;
  double penalty = 1.0;
  int max_doublings = 10;
  double div_tol = 1e-8;
};

struct ResolventResult {
  ExtState V;
  double residual = 0.0;    // max of the three parts below and of the Z(s_0) mismatch
  double residual_E = 0.0;  // b E - eps^-1 curl_h(H, h) - F1, h from the boundary relation
  double residual_H = 0.0;  // b H + mu^-1 curl E - F2
  double residual_Z = 0.0;  // cell-integrated s-equation, see resolvent_solve
  double residual_Z_fd = 0.0;  // b Z + tau^-1 d_s Z - F3 with the finite-difference d_s
  double relation_residual = 0.0;
  int outer_iterations = 0;
  std::vector<double> history;
  int krylov_iterations = 0;
  double penalty = 0.0;
  int doublings = 0;
  double div_max = 0.0;
  bool div_ok = true;
};

/// Solves (b id + A) V = F. E from the curl-curl problem
///   (b^2 W eps + C^T W_f mu^-1 C + s V div^T div) E + b avg^T A h(E) = b W eps F1 + C^T W_f F2,
/// the boundary term frozen at the secant slope of g from the previous iterate (Kacanov)
/// and relaxed by a damped update until the relative change is below outer_tol. H = (F2 -
/// mu^-1 curl E) / b and Z(s_j) = e^{-tau b s_j} (E x nu + tau int_0^{s_j} F3 e^{tau b r} dr),
/// trapezoid over the s-nodes. The Z residual is that recursion checked cell by cell.
/// If max |div(eps E)| > div_tol the penalty s doubles (at most max_doublings times).
/// Throws ContractError for b <= 0 or non-finite F, NumericalError if the outer loop stalls.
ResolventResult resolvent_solve(const OperatorLab& lab, const ExtState& F, double b,
                                const ResolventOptions& options = {});

/// |E|^2 + |curl E|^2 + |div(eps E)|^2 integrated over the grid plus sum A |E x nu|^2: the
/// squared W_eps norm.
double wepsilon_norm(const Discretization& disc, const VecX& E);

struct StrongMonotonicity {
  double c_star = 0.0;
  long pairs = 0;
};

/// Minimum over random pairs of <B E - B E', E - E'> / |E - E'|^2_{W_eps}, B the nonlinear
/// curl-curl form of resolvent_solve with data F3 and penalty s.
StrongMonotonicity strong_monotonicity(const OperatorLab& lab, const ExtState& F, double b, long n_pairs,
                                       std::uint64_t seed, double penalty = 1.0);

}  // namespace maxfb
