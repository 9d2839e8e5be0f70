#pragma once

/// @file domain.hpp
/// @brief Box geometry, staggered Yee lattice, multiplier field and material tensors.

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace maxfb {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct BoxDomain {
  Vec3 lengths{1.0, 1.0, 1.0};
  std::array<int, 3> cells{8, 8, 8};
  Vec3 x0{0.5, 0.5, 0.5};

  /// Throws ConfigError for bad lengths/resolution and GeometryError when x0 is not interior.
  void validate() const;

  static BoxDomain unit_cube(int n);
};

/// One quadrature point on the boundary, located at the center of a boundary face.
struct BoundarySample {
  Vec3 position;
  Vec3 normal;
  double area = 0.0;
  int axis = 0;  // normal axis
  int side = 0;  // 0 = low face, 1 = high face
  /// Tangential boundary edges of this face: two for each tangential axis.
  std::array<int, 4> edges{};
  std::array<int, 4> edge_axis{};
};

/// Staggered lattice: E on primal edges, H on primal faces.
///
/// Families are indexed by axis. An edge of family f runs along axis f and sits on
/// integer lattice coordinates in the other two axes. A face of family f has normal f.
class YeeGrid {
 public:
  explicit YeeGrid(const BoxDomain& domain);

  const BoxDomain& domain() const { return domain_; }
  int n(int axis) const { return domain_.cells[axis]; }
  double h(int axis) const { return h_[axis]; }
  double length(int axis) const { return domain_.lengths[axis]; }
  double cell_volume() const { return h_[0] * h_[1] * h_[2]; }

  std::array<int, 3> edge_dims(int fam) const;
  int edge_count(int fam) const;
  int edge_offset(int fam) const { return edge_off_[fam]; }
  int edge_total() const { return edge_off_[3]; }
  int edge_index(int fam, int i, int j, int k) const;
  /// Decodes a global edge id into its family and lattice indices.
  int edge_family(int e) const;
  std::array<int, 3> edge_ijk(int e) const;
  Vec3 edge_position(int e) const;
  /// Dual volume attached to the edge (halved per boundary plane the edge lies in).
  double edge_weight(int e) const { return edge_w_[e]; }
  const std::vector<double>& edge_weights() const { return edge_w_; }

  std::array<int, 3> face_dims(int fam) const;
  int face_count(int fam) const;
  int face_offset(int fam) const { return face_off_[fam]; }
  int face_total() const { return face_off_[3]; }
  int face_index(int fam, int i, int j, int k) const;
  int face_family(int f) const;
  std::array<int, 3> face_ijk(int f) const;
  Vec3 face_position(int f) const;
  double face_weight(int f) const { return face_w_[f]; }
  const std::vector<double>& face_weights() const { return face_w_; }

  int node_count() const { return (n(0) + 1) * (n(1) + 1) * (n(2) + 1); }
  int node_index(int i, int j, int k) const { return i + (n(0) + 1) * (j + (n(1) + 1) * k); }
  /// Nodes strictly inside the box, in lexicographic order.
  const std::vector<int>& interior_nodes() const { return interior_nodes_; }
  /// Position of a node in interior_nodes(), or -1 for boundary nodes.
  int interior_slot(int node) const { return interior_slot_[node]; }

  int cell_count() const { return n(0) * n(1) * n(2); }
  int cell_index(int i, int j, int k) const { return i + n(0) * (j + n(1) * k); }
  Vec3 cell_center(int i, int j, int k) const;

  const std::vector<BoundarySample>& samples() const { return samples_; }
  int sample_count() const { return static_cast<int>(samples_.size()); }
  /// Samples whose face contains edge e (empty for edges off the boundary planes).
  const std::vector<int>& edge_samples(int e) const { return edge_samples_[e]; }
  double boundary_area() const;

 private:
  BoxDomain domain_;
  std::array<double, 3> h_{};
  std::array<int, 4> edge_off_{};
  std::array<int, 4> face_off_{};
  std::vector<double> edge_w_;
  std::vector<double> face_w_;
  std::vector<int> interior_nodes_;
  std::vector<int> interior_slot_;
  std::vector<BoundarySample> samples_;
  std::vector<std::vector<int>> edge_samples_;
};

YeeGrid build_grid(const BoxDomain& domain);

struct MultiplierField {
  Vec3 x0;
  std::vector<Vec3> at_samples;
  std::vector<Vec3> at_cells;
  double beta = 0.0;
  double m_sup = 0.0;
};

/// m(x) = x - x0. Throws GeometryError unless x0 is strictly inside the box.
MultiplierField multiplier_field(const YeeGrid& grid, const Vec3& x0);

/// Per-cell 3x3 material tensor on the lattice of a grid.
class TensorField {
 public:
  TensorField() = default;
  TensorField(const YeeGrid& grid, std::vector<Mat3> cells);

  const Mat3& at(int i, int j, int k) const { return cells_[i + dims_[0] * (j + dims_[1] * k)]; }
  const Mat3& at(int cell) const { return cells_[cell]; }
  const std::vector<Mat3>& cells() const { return cells_; }
  std::array<int, 3> dims() const { return dims_; }
  double h(int axis) const { return h_[axis]; }

  /// Minimum / maximum eigenvalue over all cells (symmetric part).
  double lambda_min() const { return lmin_; }
  double lambda_max() const { return lmax_; }
  bool diagonal() const { return diagonal_; }

 private:
  std::array<int, 3> dims_{};
  std::array<double, 3> h_{};
  std::vector<Mat3> cells_;
  double lmin_ = 0.0;
  double lmax_ = 0.0;
  bool diagonal_ = true;
};

enum class TensorPreset {
  constant_isotropic,
  constant_diagonal,
  diagonal_ramp,
  exponential_isotropic,
  constant_symmetric,
};

const char* preset_name(TensorPreset p);
TensorPreset parse_preset(const std::string& name);

struct TensorSpec {
  TensorPreset preset = TensorPreset::constant_isotropic;
  std::vector<double> params;  // preset dependent, empty means defaults
  std::string file;            // non-empty: ingest from file instead of preset
};

/// Samples a tensor-valued function at the cell centers.
TensorField tensor_from_function(const YeeGrid& grid, const std::function<Mat3(const Vec3&)>& f);
TensorField make_tensor_field(const YeeGrid& grid, const TensorSpec& spec);
/// Parses lines `i j k e11 e22 e33 [e12 e13 e23]`; every cell must appear once.
TensorField parse_tensor_text(const YeeGrid& grid, const std::string& text);
TensorField read_tensor_file(const YeeGrid& grid, const std::string& path);

struct AssumptionCheck {
  std::string name;
  bool pass = true;
  double value = 0.0;
  std::string location;
};

struct MaterialReport {
  double alpha = 0.0;
  double d1 = 0.0;
  double beta = 0.0;
  double m_sup = 0.0;
  double lambda_min_eps = 0.0, lambda_max_eps = 0.0;
  double lambda_min_mu = 0.0, lambda_max_mu = 0.0;
  bool materials_checked = false;
  bool geometry_checked = false;
  std::vector<AssumptionCheck> checks;
  std::vector<std::string> notes;

  bool pass() const;
  std::string summary() const;
};

/// Symmetry, uniform definiteness and the floor alpha = min(lmin eps, lmin mu).
MaterialReport check_assumption_materials(const TensorField& eps, const TensorField& mu);

/// Adds d1, beta and m_sup to a report. d1 is the smallest generalized eigenvalue of
/// (T + (m.grad)T) against T over cell centers and boundary face centers, for T = eps, mu.
void check_assumption_geometry(const TensorField& eps, const TensorField& mu, const MultiplierField& m,
                               MaterialReport& report);

MaterialReport check_all(const TensorField& eps, const TensorField& mu, const MultiplierField& m);

}  // namespace maxfb
