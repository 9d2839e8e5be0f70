#include "maxfb/operator_lab.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "maxfb/errors.hpp"
#include "maxfb/solver.hpp"

namespace maxfb {

namespace {

Vec3 tangential(const Vec3& v, const Vec3& nu) { return v - v.dot(nu) * nu; }

bool all_finite(const ExtState& v) {
  if (!v.E.allFinite() || !v.H.allFinite()) return false;
  return std::all_of(v.Z.begin(), v.Z.end(), [](const Vec3& z) { return z.allFinite(); });
}

double max_abs(const VecX& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

GeneratorConstants generator_constants(double gamma1, double gamma2, double c1, double c2, double tau) {
  if (!(gamma1 * c1 > 0.0)) throw ContractError("generator constants: gamma1 c1 must be positive");
  if (!(tau > 0.0)) throw ContractError("generator constants: tau must be positive");
  GeneratorConstants k;
  k.xi_op = gamma1 * c1;
  const double reach = 2.0 * std::sqrt((gamma1 * c1 - 0.5 * k.xi_op) * 0.5 * k.xi_op);
  k.c_weight = gamma2 * c2 > reach ? 2.0 * std::log(gamma2 * c2 / reach) : 0.0;
  k.C_shift = k.c_weight / (2.0 * tau) + 1.0;
  return k;
}

OperatorLab::OperatorLab(const Discretization& disc, const FeedbackLaw& law, int M)
    : disc_(disc), law_(law), M_(M) {
  if (M_ < 2) throw ConfigError("operator lab: M must be at least 2");
  law_.validate();
}

ExtState OperatorLab::zero() const {
  ExtState v;
  v.E = VecX::Zero(disc_.edges());
  v.H = VecX::Zero(disc_.faces());
  v.Z.assign(static_cast<std::size_t>(samples()) * (M_ + 1), Vec3::Zero());
  return v;
}

void OperatorLab::check_domain(const ExtState& v) const {
  if (v.E.size() != disc_.edges() || v.H.size() != disc_.faces() ||
      v.Z.size() != static_cast<std::size_t>(samples()) * (M_ + 1)) {
    throw ContractError("extended state: sizes do not match the lattice");
  }
  const auto w = disc_.trace(v.E);
  for (int s = 0; s < samples(); ++s) {
    const Vec3& nu = disc_.grid().samples()[s].normal;
    for (int j = 0; j <= M_; ++j) require_tangential(z(v, s, j), nu, "Z");
    const double gap = (z(v, s, 0) - w[s]).cwiseAbs().maxCoeff();
    if (gap > 1e-12 * std::max(1.0, w[s].cwiseAbs().maxCoeff())) {
      std::ostringstream os;
      os << "extended state: Z(s=0) differs from E x nu by " << gap << " at sample " << s;
      throw ContractError(os.str());
    }
  }
}

std::vector<Vec3> OperatorLab::boundary_h(const ExtState& v) const {
  std::vector<Vec3> h(samples());
  for (int s = 0; s < samples(); ++s) {
    const Vec3& nu = disc_.grid().samples()[s].normal;
    h[s] = nu.cross(feedback_vector(law_, z(v, s, 0), z(v, s, M_)));
  }
  return h;
}

double OperatorLab::boundary_relation_residual(const ExtState& v, const std::vector<Vec3>& h) const {
  double r = 0.0;
  for (int s = 0; s < samples(); ++s) {
    const Vec3& nu = disc_.grid().samples()[s].normal;
    const Vec3 G = feedback_vector(law_, z(v, s, 0), z(v, s, M_));
    r = std::max(r, (h[s] + G.cross(nu)).cwiseAbs().maxCoeff());
  }
  return r;
}

void OperatorLab::ds(const Vec3* zs, Vec3* out) const {
  const double c = 0.5 * M_;  // 1 / (2 h)
  out[0] = c * (-3.0 * zs[0] + 4.0 * zs[1] - zs[2]);
  out[1] = c * (zs[2] - zs[0]);
  for (int j = 2; j <= M_; ++j) out[j] = c * (3.0 * zs[j] - 4.0 * zs[j - 1] + zs[j - 2]);
}

ExtState OperatorLab::apply_generator(const ExtState& v) const {
  check_domain(v);
  ExtState out;
  out.E = -(disc_.eps_inv() * disc_.curl_h(v.H, boundary_h(v)));
  out.H = disc_.mu_inv() * (disc_.curl() * v.E);
  out.Z.resize(v.Z.size());
  for (int s = 0; s < samples(); ++s) {
    const std::size_t base = static_cast<std::size_t>(s) * (M_ + 1);
    ds(&v.Z[base], &out.Z[base]);
    for (int j = 0; j <= M_; ++j) out.Z[base + j] /= law_.tau;
  }
  return out;
}

double OperatorLab::inner(const ExtState& u, const ExtState& v, const GeneratorConstants& k) const {
  double r = disc_.edge_dot(disc_.eps_h() * u.E, v.E) + disc_.face_dot(disc_.mu_h() * u.H, v.H);
  std::vector<double> rho(M_ + 1);
  for (int j = 0; j <= M_; ++j) {
    const double w = (j == 0 || j == M_ ? 0.5 : 1.0) / M_;
    rho[j] = w * std::exp(k.c_weight * j / M_);
  }
  double zsum = 0.0;
  for (int s = 0; s < samples(); ++s) {
    double acc = 0.0;
    for (int j = 0; j <= M_; ++j) acc += rho[j] * z(u, s, j).dot(z(v, s, j));
    zsum += disc_.grid().samples()[s].area * acc;
  }
  return r + k.xi_op * law_.tau * zsum;
}

ExtState OperatorLab::random_state(std::mt19937_64& rng, double scale) const {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  ExtState v = zero();
  for (int e = 0; e < v.E.size(); ++e) v.E[e] = scale * U(rng);
  for (int f = 0; f < v.H.size(); ++f) v.H[f] = scale * U(rng);
  const auto w = disc_.trace(v.E);
  // Each s-mode and the nodal noise get their own amplitude, so that states dominated by a
  // single profile (or by the delay line altogether) are drawn as well.
  std::array<double, 4> amp;
  for (double& a : amp) a = scale * std::pow(10.0, 1.5 * U(rng));
  const double noise = scale * std::pow(10.0, U(rng) - 1.0);
  for (int s = 0; s < samples(); ++s) {
    const Vec3& nu = disc_.grid().samples()[s].normal;
    std::array<Vec3, 4> c;
    for (int m = 0; m < 4; ++m) c[m] = tangential(amp[m] * Vec3(U(rng), U(rng), U(rng)), nu);
    z(v, s, 0) = w[s];
    for (int j = 1; j <= M_; ++j) {
      const double sj = static_cast<double>(j) / M_;
      Vec3 zj = w[s] + tangential(noise * Vec3(U(rng), U(rng), U(rng)), nu);
      for (int m = 1; m <= 4; ++m) zj += c[m - 1] * std::sin(m * std::numbers::pi * sj / 2.0);
      z(v, s, j) = zj;
    }
  }
  return v;
}

ExtState OperatorLab::random_data(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  ExtState F = zero();
  VecX F1(disc_.edges());
  for (int e = 0; e < F1.size(); ++e) F1[e] = U(rng);
  F.E = project_div_free(F1, disc_);
  for (int f = 0; f < F.H.size(); ++f) F.H[f] = U(rng);
  for (int s = 0; s < samples(); ++s) {
    const Vec3& nu = disc_.grid().samples()[s].normal;
    for (int j = 0; j <= M_; ++j) z(F, s, j) = tangential(Vec3(U(rng), U(rng), U(rng)), nu);
  }
  return F;
}

ExtState OperatorLab::axpy(double a, const ExtState& x, const ExtState& y) {
  ExtState r;
  r.E = a * x.E + y.E;
  r.H = a * x.H + y.H;
  r.Z.resize(x.Z.size());
  for (std::size_t i = 0; i < x.Z.size(); ++i) r.Z[i] = a * x.Z[i] + y.Z[i];
  return r;
}

MonotonicityReport monotonicity_test(const OperatorLab& lab, long n_pairs, std::uint64_t seed,
                                     const GeneratorConstants& k, bool keep_rows) {
  MonotonicityReport rep;
  rep.constants = k;
  rep.min_normalized = std::numeric_limits<double>::infinity();
  auto shifted = [&](const ExtState& v) { return OperatorLab::axpy(k.C_shift, v, lab.apply_generator(v)); };
  for (long i = 0; i < n_pairs; ++i) {
    std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    std::mt19937_64 rng(sq);
    std::uniform_real_distribution<double> logamp(-2.0, 1.0);
    const double amp = std::pow(10.0, logamp(rng));
    const ExtState v = lab.random_state(rng, amp);
    ExtState v2;
    if (i % 2 == 0) {
      v2 = lab.random_state(rng, std::pow(10.0, logamp(rng)));
    } else {
      v2 = OperatorLab::axpy(1.0, v, lab.random_state(rng, 1e-3 * amp));
    }
    const ExtState d = OperatorLab::axpy(-1.0, v2, v);
    const ExtState dA = OperatorLab::axpy(-1.0, shifted(v2), shifted(v));
    PairRow row;
    row.pair_id = i;
    row.pairing = lab.inner(dA, d, k);
    row.norm2 = lab.inner(d, d, k);
    row.normalized = row.norm2 > 0.0 ? row.pairing / row.norm2 : 0.0;
    if (row.normalized < rep.min_normalized) {
      rep.min_normalized = row.normalized;
      rep.worst_pair = i;
    }
    if (row.normalized < 0.0) ++rep.negative;
    if (keep_rows) rep.rows.push_back(row);
    ++rep.pairs;
  }
  if (rep.pairs == 0) rep.min_normalized = 0.0;
  rep.pass = rep.min_normalized >= -1e-10;
  return rep;
}

namespace {

/// Pieces of the resolvent system that do not change across outer iterations.
struct ResolventSystem {
  const OperatorLab& lab;
  double b;
  SpMat base;           // b^2 W eps + C^T W_f mu^-1 C + s V div^T div
  VecX rhs_base;        // b W eps F1 + C^T W_f F2
  std::vector<Vec3> J;  // tau int_0^1 F3 e^{tau b r} dr per sample
  VecX area3;           // sample area repeated per component
  double decay;         // e^{-tau b}

  ResolventSystem(const OperatorLab& l, const ExtState& F, double b_, double penalty) : lab(l), b(b_) {
    const auto& d = lab.disc();
    const SpMat WE = d.edge_w().asDiagonal() * d.eps_h();
    const SpMat WFmu = d.face_w().asDiagonal() * d.mu_inv();
    const SpMat Ct = d.curl().transpose();
    base = b * b * WE + Ct * WFmu * d.curl();
    if (penalty > 0.0) {
      const SpMat divT = d.div_eps().transpose();
      const SpMat dd = divT * d.div_eps();
      base += (penalty * d.node_volume()) * dd;
    }
    base.makeCompressed();
    rhs_base = b * (WE * F.E) + Ct * (d.face_w().asDiagonal() * F.H);

    const int S = lab.samples(), M = lab.M();
    const double tau = lab.tau(), h = 1.0 / M;
    decay = std::exp(-tau * b);
    J.assign(S, Vec3::Zero());
    area3.resize(3 * S);
    for (int s = 0; s < S; ++s) {
      Vec3 I = Vec3::Zero();
      for (int j = 1; j <= M; ++j) {
        I += 0.5 * h *
             (std::exp(tau * b * (j - 1) * h) * lab.z(F, s, j - 1) + std::exp(tau * b * j * h) * lab.z(F, s, j));
      }
      J[s] = tau * I;
      area3.segment<3>(3 * s).setConstant(d.grid().samples()[s].area);
    }
  }

  Vec3 z_end(const Vec3& w, int s) const { return decay * (w + J[s]); }

  /// b avg^T A h(E) with the exact nonlinear h.
  VecX boundary_form(const VecX& E) const {
    const auto& d = lab.disc();
    const auto w = d.trace(E);
    VecX hs(3 * lab.samples());
    for (int s = 0; s < lab.samples(); ++s) {
      const Vec3& nu = d.grid().samples()[s].normal;
      hs.segment<3>(3 * s) = nu.cross(feedback_vector(lab.law(), w[s], z_end(w[s], s)));
    }
    return b * (d.boundary_average().transpose() * area3.cwiseProduct(hs));
  }
};

}  // namespace

ResolventResult resolvent_solve(const OperatorLab& lab, const ExtState& F, double b, const ResolventOptions& opt) {
  if (!(b > 0.0) || !std::isfinite(b)) throw ContractError("resolvent: b must be positive and finite");
  if (F.E.size() != lab.disc().edges() || F.H.size() != lab.disc().faces() ||
      F.Z.size() != static_cast<std::size_t>(lab.samples()) * (lab.M() + 1)) {
    throw ContractError("resolvent: data sizes do not match the lattice");
  }
  if (!all_finite(F)) throw ContractError("resolvent: data must be finite");

  const auto& d = lab.disc();
  const auto& law = lab.law();
  const int S = lab.samples(), M = lab.M();
  const double tau = lab.tau();
  const SpMat avgT = d.boundary_average().transpose();

  ResolventResult res;
  double penalty = opt.penalty;
  VecX E;
  for (int attempt = 0;; ++attempt) {
    const ResolventSystem sys(lab, F, b, penalty);
    res.history.clear();
    res.krylov_iterations = 0;
    E = VecX::Zero(d.edges());
    double theta = 1.0, prev = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int it = 1; it <= opt.max_outer; ++it) {
      // Kacanov step: g frozen at its secant slope on the current iterate.
      const auto w = d.trace(E);
      VecX coef(3 * S), known(3 * S);
      for (int s = 0; s < S; ++s) {
        const Vec3& nu = d.grid().samples()[s].normal;
        const double k1 = secant_slope(law, w[s].norm());
        const double k2 = secant_slope(law, sys.z_end(w[s], s).norm());
        coef.segment<3>(3 * s).setConstant(law.gamma1 * k1 + law.gamma2 * k2 * sys.decay);
        known.segment<3>(3 * s) = law.gamma2 * k2 * sys.decay * nu.cross(sys.J[s]);
      }
      const SpMat weighted = sys.area3.cwiseProduct(coef).asDiagonal() * d.boundary_average();
      const SpMat bd = avgT * weighted;
      SpMat K = sys.base + b * bd;
      K.makeCompressed();
      const VecX rhs = sys.rhs_base - b * (avgT * sys.area3.cwiseProduct(known));
      VecX Ehat;
      bool ok;
      if (d.diagonal()) {
        Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(opt.krylov_tol);
        cg.setMaxIterations(10 * static_cast<int>(K.rows()));
        cg.compute(K);
        Ehat = cg.solveWithGuess(rhs, E);
        ok = cg.info() == Eigen::Success;
        res.krylov_iterations += static_cast<int>(cg.iterations());
      } else {
        Eigen::BiCGSTAB<SpMat> bicg;
        bicg.setTolerance(opt.krylov_tol);
        bicg.setMaxIterations(10 * static_cast<int>(K.rows()));
        bicg.compute(K);
        Ehat = bicg.solveWithGuess(rhs, E);
        ok = bicg.info() == Eigen::Success;
        res.krylov_iterations += static_cast<int>(bicg.iterations());
      }
      if (!ok) throw NumericalError("resolvent: Krylov solve did not reach its tolerance");
      const VecX step = theta * (Ehat - E);
      E += step;
      const double change = step.norm() / std::max(E.norm(), std::numeric_limits<double>::min());
      res.history.push_back(change);
      res.outer_iterations = it;
      if (change <= opt.outer_tol) {
        converged = true;
        break;
      }
      if (change > prev) theta *= 0.5;
      prev = change;
    }
    if (!converged) {
      std::ostringstream os;
      os.precision(6);
      os << "resolvent: outer iteration did not converge in " << opt.max_outer << " iterations; change history:";
      for (double h : res.history) os << ' ' << h;
      throw NumericalError(os.str());
    }
    res.div_max = max_abs(d.div_eps() * E);
    res.penalty = penalty;
    res.doublings = attempt;
    res.div_ok = res.div_max <= opt.div_tol;
    if (res.div_ok || attempt >= opt.max_doublings) break;
    penalty *= 2.0;
  }

  // Elimination of H and the exponential formula for Z.
  ExtState V = lab.zero();
  V.E = E;
  V.H = (F.H - d.mu_inv() * (d.curl() * E)) / b;
  const auto w = d.trace(E);
  const double h = 1.0 / M;
  for (int s = 0; s < S; ++s) {
    Vec3 I = Vec3::Zero();
    lab.z(V, s, 0) = w[s];
    for (int j = 1; j <= M; ++j) {
      I += 0.5 * h *
           (std::exp(tau * b * (j - 1) * h) * lab.z(F, s, j - 1) + std::exp(tau * b * j * h) * lab.z(F, s, j));
      lab.z(V, s, j) = std::exp(-tau * b * j * h) * (w[s] + tau * I);
    }
  }

  const auto hV = lab.boundary_h(V);
  res.relation_residual = lab.boundary_relation_residual(V, hV);
  res.residual_E = max_abs(b * V.E - d.eps_inv() * d.curl_h(V.H, hV) - F.E);
  res.residual_H = max_abs(b * V.H + d.mu_inv() * (d.curl() * V.E) - F.H);
  std::vector<Vec3> dz(M + 1);
  for (int s = 0; s < S; ++s) {
    lab.ds(&lab.z(V, s, 0), dz.data());
    for (int j = 1; j <= M; ++j) {
      const double ej = std::exp(tau * b * j * h), em = std::exp(tau * b * (j - 1) * h);
      const Vec3 cell = (ej * lab.z(V, s, j) - em * lab.z(V, s, j - 1)) -
                        tau * 0.5 * h * (em * lab.z(F, s, j - 1) + ej * lab.z(F, s, j));
      res.residual_Z = std::max(res.residual_Z, cell.cwiseAbs().maxCoeff() / (h * ej));
      const Vec3 fd = b * lab.z(V, s, j) + dz[j] / tau - lab.z(F, s, j);
      res.residual_Z_fd = std::max(res.residual_Z_fd, fd.cwiseAbs().maxCoeff());
    }
  }
  res.residual = std::max({res.residual_E, res.residual_H, res.residual_Z});
  res.V = std::move(V);
  return res;
}

double wepsilon_norm(const Discretization& disc, const VecX& E) {
  const VecX cE = disc.curl() * E;
  const VecX dv = disc.div_eps() * E;
  const auto w = disc.trace(E);
  double bnd = 0.0;
  for (int s = 0; s < disc.grid().sample_count(); ++s) bnd += disc.grid().samples()[s].area * w[s].squaredNorm();
  return disc.edge_dot(E, E) + disc.face_dot(cE, cE) + disc.node_volume() * dv.squaredNorm() + bnd;
}

StrongMonotonicity strong_monotonicity(const OperatorLab& lab, const ExtState& F, double b, long n_pairs,
                                       std::uint64_t seed, double penalty) {
  const ResolventSystem sys(lab, F, b, penalty);
  auto form = [&](const VecX& E) { return VecX(sys.base * E + sys.boundary_form(E)); };
  StrongMonotonicity out;
  out.c_star = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0), logamp(-2.0, 1.0);
  const int n = lab.disc().edges();
  for (long i = 0; i < n_pairs; ++i) {
    const double a1 = std::pow(10.0, logamp(rng)), a2 = std::pow(10.0, logamp(rng));
    VecX E1(n), E2(n);
    for (int e = 0; e < n; ++e) E1[e] = a1 * U(rng);
    for (int e = 0; e < n; ++e) E2[e] = a2 * U(rng);
    const VecX dE = E1 - E2;
    const double ratio = (form(E1) - form(E2)).dot(dE) / wepsilon_norm(lab.disc(), dE);
    out.c_star = std::min(out.c_star, ratio);
    ++out.pairs;
  }
  if (out.pairs == 0) out.c_star = 0.0;
  return out;
}

}  // namespace maxfb
