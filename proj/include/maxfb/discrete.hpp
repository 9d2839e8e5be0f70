#pragma once

/// @file discrete.hpp
/// @brief Sparse lattice operators shared by the stepper, the energies and the operator lab.

#include <Eigen/Sparse>

#include <vector>

#include "maxfb/domain.hpp"
#include "maxfb/feedback.hpp"

namespace maxfb {

using VecX = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Edge and face operators of the staggered lattice with material tensors sampled onto dofs.
///
/// Inner products are weighted by the dual volumes of the grid (edge_weight, face_weight).
/// curl_adjoint() = W_e^-1 C^T W_f is the adjoint of curl() in those products; on boundary
/// edges it is completed by boundary_term(), which feeds the H trace h = H x nu back in.
class Discretization {
 public:
  Discretization(const YeeGrid& grid, const TensorField& eps, const TensorField& mu);

  const YeeGrid& grid() const { return grid_; }
  const TensorField& eps() const { return eps_; }
  const TensorField& mu() const { return mu_; }
  bool diagonal() const { return eps_.diagonal() && mu_.diagonal(); }

  int edges() const { return grid_.edge_total(); }
  int faces() const { return grid_.face_total(); }
  int interior() const { return static_cast<int>(grid_.interior_nodes().size()); }

  /// faces x edges.
  const SpMat& curl() const { return curl_; }
  /// edges x faces, W_e^-1 C^T W_f.
  const SpMat& curl_adjoint() const { return curl_adj_; }
  const SpMat& eps_h() const { return eps_h_; }
  const SpMat& eps_inv() const { return eps_inv_; }
  const SpMat& mu_h() const { return mu_h_; }
  const SpMat& mu_inv() const { return mu_inv_; }
  /// edges x interior nodes, homogeneous Dirichlet on boundary nodes.
  const SpMat& grad() const { return grad_; }
  /// interior nodes x edges: -V^-1 G^T W_e eps_h, the discrete div(eps E).
  const SpMat& div_eps() const { return div_eps_; }
  /// interior nodes x edges: -V^-1 G^T W_e.
  const SpMat& div_plain() const { return div_plain_; }
  /// cells x faces: discrete div(mu H) at cell centers.
  const SpMat& div_mu() const { return div_mu_; }
  const VecX& edge_w() const { return edge_w_; }
  const VecX& face_w() const { return face_w_; }
  double node_volume() const { return grid_.cell_volume(); }

  /// Per-sample average of the tangential boundary edges (normal component 0).
  std::vector<Vec3> edge_average(const VecX& E) const;
  /// Tangential trace w = Ebar x nu per sample.
  std::vector<Vec3> trace(const VecX& E) const;
  /// B_e = -sum over samples containing e of (area/2) h[component of e]. Zero off the boundary.
  VecX boundary_term(const std::vector<Vec3>& h) const;
  /// Discrete curl of H including the boundary trace: curl_adjoint() H + W_e^-1 boundary_term(h).
  VecX curl_h(const VecX& H, const std::vector<Vec3>& h) const;
  /// edges x 3S: h stacked per sample to W_e^-1 boundary_term(h).
  const SpMat& boundary_lift() const { return lift_; }
  /// 3S x edges: edge_average() stacked per sample.
  const SpMat& boundary_average() const { return avg_; }
  /// Self coefficient of each sample for implicit_boundary_update (dt not included).
  const std::vector<BoundaryMetrics>& boundary_metrics() const { return metrics_; }

  /// 1/2 (eps E, E) + 1/2 (mu H_a, H_b) in the dual-volume products.
  double weighted_energy(const VecX& E, const VecX& Ha, const VecX& Hb) const;
  double plain_energy(const VecX& E, const VecX& Ha, const VecX& Hb) const;

  double edge_dot(const VecX& a, const VecX& b) const { return a.dot(edge_w_.cwiseProduct(b)); }
  double face_dot(const VecX& a, const VecX& b) const { return a.dot(face_w_.cwiseProduct(b)); }
  double boundary_dot(const std::vector<Vec3>& a, const std::vector<Vec3>& b) const;

  /// Residual of (C E, H)_f - (curl_h(H, h), E)_e - sum A h . Ebar, relative to the largest term.
  double green_residual(const VecX& E, const VecX& H, const std::vector<Vec3>& h) const;

  /// Averaged cell tensor at an edge (up to 4 cells) or a face (up to 2 cells).
  Mat3 edge_tensor(const TensorField& t, int e) const;
  Mat3 face_tensor(const TensorField& t, int f) const;

 private:
  void build_curl();
  void build_materials();
  void build_grad();
  void build_metrics();
  void build_boundary();
  SpMat collocated_edges(const std::vector<Mat3>& per_edge) const;
  SpMat collocated_faces(const std::vector<Mat3>& per_face) const;

  YeeGrid grid_;
  TensorField eps_, mu_;
  SpMat curl_, curl_adj_, eps_h_, eps_inv_, mu_h_, mu_inv_, grad_, div_eps_, div_plain_, div_mu_, lift_, avg_;
  VecX edge_w_, face_w_;
  std::vector<BoundaryMetrics> metrics_;
};

}  // namespace maxfb
