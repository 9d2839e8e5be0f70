#include "maxfb/discrete.hpp"

#include <algorithm>
#include <cmath>

#include "maxfb/errors.hpp"

namespace maxfb {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SpMat from_triplets(int rows, int cols, const Triplets& t) {
  SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace

Discretization::Discretization(const YeeGrid& grid, const TensorField& eps, const TensorField& mu)
    : grid_(grid), eps_(eps), mu_(mu) {
  for (int a = 0; a < 3; ++a) {
    if (eps_.dims()[a] != grid_.n(a) || mu_.dims()[a] != grid_.n(a)) {
      throw ContractError("discretization: material fields are sampled on a different grid");
    }
  }
  edge_w_ = Eigen::Map<const VecX>(grid_.edge_weights().data(), grid_.edge_total());
  face_w_ = Eigen::Map<const VecX>(grid_.face_weights().data(), grid_.face_total());
  build_curl();
  build_materials();
  build_grad();
  build_metrics();
  build_boundary();
}

void Discretization::build_curl() {
  Triplets t;
  t.reserve(4 * faces());
  for (int f = 0; f < faces(); ++f) {
    const int fam = grid_.face_family(f);
    const int a = (fam + 1) % 3, b = (fam + 2) % 3;
    const auto idx = grid_.face_ijk(f);
    auto edge = [&](int family, int shift_axis) {
      auto q = idx;
      if (shift_axis >= 0) q[shift_axis] += 1;
      return grid_.edge_index(family, q[0], q[1], q[2]);
    };
    // (curl E)_f = d_a E_b - d_b E_a
    t.emplace_back(f, edge(b, a), 1.0 / grid_.h(a));
    t.emplace_back(f, edge(b, -1), -1.0 / grid_.h(a));
    t.emplace_back(f, edge(a, b), -1.0 / grid_.h(b));
    t.emplace_back(f, edge(a, -1), 1.0 / grid_.h(b));
  }
  curl_ = from_triplets(faces(), edges(), t);
  SpMat ct = curl_.transpose();
  curl_adj_ = edge_w_.cwiseInverse().asDiagonal() * ct * face_w_.asDiagonal();
  curl_adj_.makeCompressed();
}

Mat3 Discretization::edge_tensor(const TensorField& t, int e) const {
  const int fam = grid_.edge_family(e);
  const auto idx = grid_.edge_ijk(e);
  const int a = (fam + 1) % 3, b = (fam + 2) % 3;
  Mat3 sum = Mat3::Zero();
  int count = 0;
  for (int da = -1; da <= 0; ++da) {
    for (int db = -1; db <= 0; ++db) {
      auto c = idx;
      c[a] += da;
      c[b] += db;
      if (c[a] < 0 || c[a] >= grid_.n(a) || c[b] < 0 || c[b] >= grid_.n(b)) continue;
      sum += t.at(c[0], c[1], c[2]);
      ++count;
    }
  }
  return sum / count;
}

Mat3 Discretization::face_tensor(const TensorField& t, int f) const {
  const int fam = grid_.face_family(f);
  const auto idx = grid_.face_ijk(f);
  Mat3 sum = Mat3::Zero();
  int count = 0;
  for (int d = -1; d <= 0; ++d) {
    auto c = idx;
    c[fam] += d;
    if (c[fam] < 0 || c[fam] >= grid_.n(fam)) continue;
    sum += t.at(c[0], c[1], c[2]);
    ++count;
  }
  return sum / count;
}

SpMat Discretization::collocated_edges(const std::vector<Mat3>& per_edge) const {
  Triplets t;
  for (int e = 0; e < edges(); ++e) {
    const int f = grid_.edge_family(e);
    const auto idx = grid_.edge_ijk(e);
    t.emplace_back(e, e, per_edge[e](f, f));
    for (int g = 0; g < 3; ++g) {
      if (g == f || per_edge[e](f, g) == 0.0) continue;
      // Nearest g-edges: the two lattice planes bracketing e along f, the two g-cells around it.
      std::vector<int> nb;
      for (int df = 0; df <= 1; ++df) {
        for (int dg = -1; dg <= 0; ++dg) {
          auto q = idx;
          q[f] += df;
          q[g] += dg;
          if (q[g] < 0 || q[g] >= grid_.n(g)) continue;
          nb.push_back(grid_.edge_index(g, q[0], q[1], q[2]));
        }
      }
      for (int n : nb) t.emplace_back(e, n, per_edge[e](f, g) / static_cast<double>(nb.size()));
    }
  }
  return from_triplets(edges(), edges(), t);
}

SpMat Discretization::collocated_faces(const std::vector<Mat3>& per_face) const {
  Triplets t;
  for (int fc = 0; fc < faces(); ++fc) {
    const int f = grid_.face_family(fc);
    const auto idx = grid_.face_ijk(fc);
    t.emplace_back(fc, fc, per_face[fc](f, f));
    for (int g = 0; g < 3; ++g) {
      if (g == f || per_face[fc](f, g) == 0.0) continue;
      std::vector<int> nb;
      for (int df = -1; df <= 0; ++df) {
        for (int dg = 0; dg <= 1; ++dg) {
          auto q = idx;
          q[f] += df;
          q[g] += dg;
          if (q[f] < 0 || q[f] >= grid_.n(f)) continue;
          nb.push_back(grid_.face_index(g, q[0], q[1], q[2]));
        }
      }
      for (int n : nb) t.emplace_back(fc, n, per_face[fc](f, g) / static_cast<double>(nb.size()));
    }
  }
  return from_triplets(faces(), faces(), t);
}

void Discretization::build_materials() {
  std::vector<Mat3> ee(edges()), ei(edges()), mf(faces()), mi(faces());
  for (int e = 0; e < edges(); ++e) {
    ee[e] = edge_tensor(eps_, e);
    ei[e] = ee[e].inverse();
  }
  for (int f = 0; f < faces(); ++f) {
    mf[f] = face_tensor(mu_, f);
    mi[f] = mf[f].inverse();
  }
  eps_h_ = collocated_edges(ee);
  eps_inv_ = collocated_edges(ei);
  mu_h_ = collocated_faces(mf);
  mu_inv_ = collocated_faces(mi);
}

void Discretization::build_grad() {
  Triplets t;
  for (int e = 0; e < edges(); ++e) {
    const int f = grid_.edge_family(e);
    const auto idx = grid_.edge_ijk(e);
    const int lo = grid_.interior_slot(grid_.node_index(idx[0], idx[1], idx[2]));
    auto hi_idx = idx;
    hi_idx[f] += 1;
    const int hi = grid_.interior_slot(grid_.node_index(hi_idx[0], hi_idx[1], hi_idx[2]));
    if (hi >= 0) t.emplace_back(e, hi, 1.0 / grid_.h(f));
    if (lo >= 0) t.emplace_back(e, lo, -1.0 / grid_.h(f));
  }
  grad_ = from_triplets(edges(), interior(), t);
  SpMat gt = grad_.transpose();
  div_plain_ = (-1.0 / node_volume()) * gt * edge_w_.asDiagonal();
  div_plain_.makeCompressed();
  div_eps_ = div_plain_ * eps_h_;
  div_eps_.makeCompressed();

  Triplets d;
  for (int f = 0; f < faces(); ++f) {
    const int fam = grid_.face_family(f);
    const auto idx = grid_.face_ijk(f);
    // A face at plane p is the high side of cell p-1 and the low side of cell p.
    auto lo = idx, hi = idx;
    lo[fam] -= 1;
    if (lo[fam] >= 0) d.emplace_back(grid_.cell_index(lo[0], lo[1], lo[2]), f, 1.0 / grid_.h(fam));
    if (hi[fam] < grid_.n(fam)) d.emplace_back(grid_.cell_index(hi[0], hi[1], hi[2]), f, -1.0 / grid_.h(fam));
  }
  div_mu_ = from_triplets(grid_.cell_count(), faces(), d) * mu_h_;
  div_mu_.makeCompressed();
}

void Discretization::build_metrics() {
  metrics_.assign(grid_.sample_count(), {});
  for (int s = 0; s < grid_.sample_count(); ++s) {
    const auto& smp = grid_.samples()[s];
    Vec3 self = Vec3::Zero();
    for (int q = 0; q < 4; ++q) {
      const int e = smp.edges[q];
      self[smp.edge_axis[q]] += 0.25 * smp.area * eps_inv_.coeff(e, e) / edge_w_[e];
    }
    metrics_[s].self = self;
  }
}

void Discretization::build_boundary() {
  const int S = grid_.sample_count();
  std::vector<Eigen::Triplet<double>> lift, avg;
  for (int s = 0; s < S; ++s) {
    const auto& smp = grid_.samples()[s];
    for (int q = 0; q < 4; ++q) {
      const int e = smp.edges[q];
      const int c = 3 * s + smp.edge_axis[q];
      lift.emplace_back(e, c, -0.5 * smp.area / edge_w_[e]);
      avg.emplace_back(c, e, 0.5);
    }
  }
  lift_.resize(edges(), 3 * S);
  lift_.setFromTriplets(lift.begin(), lift.end());
  avg_.resize(3 * S, edges());
  avg_.setFromTriplets(avg.begin(), avg.end());
}

std::vector<Vec3> Discretization::edge_average(const VecX& E) const {
  std::vector<Vec3> out(grid_.sample_count(), Vec3::Zero());
  for (int s = 0; s < grid_.sample_count(); ++s) {
    const auto& smp = grid_.samples()[s];
    for (int q = 0; q < 4; ++q) out[s][smp.edge_axis[q]] += 0.5 * E[smp.edges[q]];
  }
  return out;
}

std::vector<Vec3> Discretization::trace(const VecX& E) const {
  auto out = edge_average(E);
  for (int s = 0; s < grid_.sample_count(); ++s) out[s] = out[s].cross(grid_.samples()[s].normal);
  return out;
}

VecX Discretization::boundary_term(const std::vector<Vec3>& h) const {
  VecX B = VecX::Zero(edges());
  for (int s = 0; s < grid_.sample_count(); ++s) {
    const auto& smp = grid_.samples()[s];
    for (int q = 0; q < 4; ++q) B[smp.edges[q]] -= 0.5 * smp.area * h[s][smp.edge_axis[q]];
  }
  return B;
}

VecX Discretization::curl_h(const VecX& H, const std::vector<Vec3>& h) const {
  VecX out = curl_adj_ * H;
  out += boundary_term(h).cwiseQuotient(edge_w_);
  return out;
}

double Discretization::weighted_energy(const VecX& E, const VecX& Ha, const VecX& Hb) const {
  return 0.5 * edge_dot(eps_h_ * E, E) + 0.5 * face_dot(mu_h_ * Ha, Hb);
}

double Discretization::plain_energy(const VecX& E, const VecX& Ha, const VecX& Hb) const {
  return 0.5 * edge_dot(E, E) + 0.5 * face_dot(Ha, Hb);
}

double Discretization::boundary_dot(const std::vector<Vec3>& a, const std::vector<Vec3>& b) const {
  double s = 0.0;
  for (int i = 0; i < grid_.sample_count(); ++i) s += grid_.samples()[i].area * a[i].dot(b[i]);
  return s;
}

double Discretization::green_residual(const VecX& E, const VecX& H, const std::vector<Vec3>& h) const {
  const double t1 = face_dot(curl_ * E, H);
  const double t2 = edge_dot(curl_h(H, h), E);
  const double t3 = boundary_dot(h, edge_average(E));
  const double scale = std::max({std::abs(t1), std::abs(t2), std::abs(t3), 1e-300});
  return std::abs(t1 - t2 - t3) / scale;
}

}  // namespace maxfb
