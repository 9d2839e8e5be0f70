#include "maxfb/domain.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "maxfb/errors.hpp"

namespace maxfb {

namespace {

std::string cell_label(int i, int j, int k) {
  std::ostringstream os;
  os << "cell (" << i << "," << j << "," << k << ")";
  return os.str();
}

double max_asymmetry(const Mat3& a) { return (a - a.transpose()).cwiseAbs().maxCoeff(); }

bool is_diagonal(const Mat3& a) {
  return a(0, 1) == 0.0 && a(0, 2) == 0.0 && a(1, 2) == 0.0 && a(1, 0) == 0.0 && a(2, 0) == 0.0 &&
         a(2, 1) == 0.0;
}

}  // namespace

void BoxDomain::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(lengths[a] > 0.0) || !std::isfinite(lengths[a])) {
      throw ConfigError("domain: box lengths must be positive and finite");
    }
    if (cells[a] < 4) {
      throw ConfigError("domain: resolution must be at least 4 cells per axis");
    }
  }
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(x0[a]) || !(x0[a] > 0.0) || !(x0[a] < lengths[a])) {
      throw GeometryError("domain: x0 must lie strictly inside the box (m.nu > 0 on every face)");
    }
  }
}

BoxDomain BoxDomain::unit_cube(int n) {
  BoxDomain d;
  d.cells = {n, n, n};
  return d;
}

YeeGrid::YeeGrid(const BoxDomain& domain) : domain_(domain) {
  domain_.validate();
  for (int a = 0; a < 3; ++a) h_[a] = domain_.lengths[a] / domain_.cells[a];

  edge_off_[0] = 0;
  face_off_[0] = 0;
  for (int f = 0; f < 3; ++f) {
    edge_off_[f + 1] = edge_off_[f] + edge_count(f);
    face_off_[f + 1] = face_off_[f] + face_count(f);
  }

  edge_w_.resize(edge_total());
  for (int e = 0; e < edge_total(); ++e) {
    const int fam = edge_family(e);
    const auto idx = edge_ijk(e);
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
      double l = h_[a];
      if (a != fam && (idx[a] == 0 || idx[a] == n(a))) l *= 0.5;
      w *= l;
    }
    edge_w_[e] = w;
  }

  face_w_.resize(face_total());
  for (int f = 0; f < face_total(); ++f) {
    const int fam = face_family(f);
    const auto idx = face_ijk(f);
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
      double l = h_[a];
      if (a == fam && (idx[a] == 0 || idx[a] == n(a))) l *= 0.5;
      w *= l;
    }
    face_w_[f] = w;
  }

  interior_slot_.assign(node_count(), -1);
  for (int k = 1; k < n(2); ++k)
    for (int j = 1; j < n(1); ++j)
      for (int i = 1; i < n(0); ++i) {
        const int id = node_index(i, j, k);
        interior_slot_[id] = static_cast<int>(interior_nodes_.size());
        interior_nodes_.push_back(id);
      }

  edge_samples_.assign(edge_total(), {});
  for (int axis = 0; axis < 3; ++axis) {
    const int ta = (axis + 1) % 3;
    const int tb = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const int plane = side == 0 ? 0 : n(axis);
      for (int q = 0; q < n(tb); ++q) {
        for (int p = 0; p < n(ta); ++p) {
          BoundarySample s;
          s.axis = axis;
          s.side = side;
          s.normal = Vec3::Zero();
          s.normal[axis] = side == 0 ? -1.0 : 1.0;
          s.area = h_[ta] * h_[tb];
          s.position[axis] = side == 0 ? 0.0 : domain_.lengths[axis];
          s.position[ta] = (p + 0.5) * h_[ta];
          s.position[tb] = (q + 0.5) * h_[tb];
          // Edges along ta at tb = q and q+1; edges along tb at ta = p and p+1.
          std::array<int, 3> idx{};
          idx[axis] = plane;
          idx[ta] = p;
          for (int d = 0; d < 2; ++d) {
            idx[tb] = q + d;
            s.edges[d] = edge_index(ta, idx[0], idx[1], idx[2]);
            s.edge_axis[d] = ta;
          }
          idx[tb] = q;
          for (int d = 0; d < 2; ++d) {
            idx[ta] = p + d;
            s.edges[2 + d] = edge_index(tb, idx[0], idx[1], idx[2]);
            s.edge_axis[2 + d] = tb;
          }
          const int sid = static_cast<int>(samples_.size());
          for (int e : s.edges) edge_samples_[e].push_back(sid);
          samples_.push_back(s);
        }
      }
    }
  }
}

std::array<int, 3> YeeGrid::edge_dims(int fam) const {
  std::array<int, 3> d{};
  for (int a = 0; a < 3; ++a) d[a] = a == fam ? n(a) : n(a) + 1;
  return d;
}

int YeeGrid::edge_count(int fam) const {
  const auto d = edge_dims(fam);
  return d[0] * d[1] * d[2];
}

int YeeGrid::edge_index(int fam, int i, int j, int k) const {
  const auto d = edge_dims(fam);
  return edge_off_[fam] + i + d[0] * (j + d[1] * k);
}

int YeeGrid::edge_family(int e) const {
  if (e < edge_off_[1]) return 0;
  if (e < edge_off_[2]) return 1;
  return 2;
}

std::array<int, 3> YeeGrid::edge_ijk(int e) const {
  const int fam = edge_family(e);
  const auto d = edge_dims(fam);
  int r = e - edge_off_[fam];
  std::array<int, 3> idx{};
  idx[0] = r % d[0];
  r /= d[0];
  idx[1] = r % d[1];
  idx[2] = r / d[1];
  return idx;
}

Vec3 YeeGrid::edge_position(int e) const {
  const int fam = edge_family(e);
  const auto idx = edge_ijk(e);
  Vec3 p;
  for (int a = 0; a < 3; ++a) p[a] = (idx[a] + (a == fam ? 0.5 : 0.0)) * h_[a];
  return p;
}

std::array<int, 3> YeeGrid::face_dims(int fam) const {
  std::array<int, 3> d{};
  for (int a = 0; a < 3; ++a) d[a] = a == fam ? n(a) + 1 : n(a);
  return d;
}

int YeeGrid::face_count(int fam) const {
  const auto d = face_dims(fam);
  return d[0] * d[1] * d[2];
}

int YeeGrid::face_index(int fam, int i, int j, int k) const {
  const auto d = face_dims(fam);
  return face_off_[fam] + i + d[0] * (j + d[1] * k);
}

int YeeGrid::face_family(int f) const {
  if (f < face_off_[1]) return 0;
  if (f < face_off_[2]) return 1;
  return 2;
}

std::array<int, 3> YeeGrid::face_ijk(int f) const {
  const int fam = face_family(f);
  const auto d = face_dims(fam);
  int r = f - face_off_[fam];
  std::array<int, 3> idx{};
  idx[0] = r % d[0];
  r /= d[0];
  idx[1] = r % d[1];
  idx[2] = r / d[1];
  return idx;
}

Vec3 YeeGrid::face_position(int f) const {
  const int fam = face_family(f);
  const auto idx = face_ijk(f);
  Vec3 p;
  for (int a = 0; a < 3; ++a) p[a] = (idx[a] + (a == fam ? 0.0 : 0.5)) * h_[a];
  return p;
}

Vec3 YeeGrid::cell_center(int i, int j, int k) const {
  return Vec3((i + 0.5) * h_[0], (j + 0.5) * h_[1], (k + 0.5) * h_[2]);
}

double YeeGrid::boundary_area() const {
  double s = 0.0;
  for (const auto& b : samples_) s += b.area;
  return s;
}

YeeGrid build_grid(const BoxDomain& domain) { return YeeGrid(domain); }

MultiplierField multiplier_field(const YeeGrid& grid, const Vec3& x0) {
  const auto& dom = grid.domain();
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(x0[a]) || !(x0[a] > 0.0) || !(x0[a] < dom.lengths[a])) {
      throw GeometryError("multiplier: x0 on or outside the boundary gives m.nu <= 0 on a face");
    }
  }
  MultiplierField m;
  m.x0 = x0;
  m.beta = std::numeric_limits<double>::infinity();
  for (const auto& s : grid.samples()) {
    const Vec3 v = s.position - x0;
    m.at_samples.push_back(v);
    m.beta = std::min(m.beta, v.dot(s.normal));
  }
  m.at_cells.reserve(grid.cell_count());
  for (int k = 0; k < grid.n(2); ++k)
    for (int j = 0; j < grid.n(1); ++j)
      for (int i = 0; i < grid.n(0); ++i) m.at_cells.push_back(grid.cell_center(i, j, k) - x0);
  // |m| is convex, so its maximum over the closed box is attained at a corner.
  m.m_sup = 0.0;
  for (int c = 0; c < 8; ++c) {
    Vec3 corner;
    for (int a = 0; a < 3; ++a) corner[a] = (c >> a) & 1 ? dom.lengths[a] : 0.0;
    m.m_sup = std::max(m.m_sup, (corner - x0).norm());
  }
  if (!(m.beta > 0.0)) throw GeometryError("multiplier: beta = min m.nu must be positive");
  return m;
}

TensorField::TensorField(const YeeGrid& grid, std::vector<Mat3> cells)
    : dims_{grid.n(0), grid.n(1), grid.n(2)}, cells_(std::move(cells)) {
  for (int a = 0; a < 3; ++a) h_[a] = grid.h(a);
  if (static_cast<int>(cells_.size()) != grid.cell_count()) {
    throw ConfigError("tensor field: cell count does not match the grid");
  }
  lmin_ = std::numeric_limits<double>::infinity();
  lmax_ = -std::numeric_limits<double>::infinity();
  diagonal_ = true;
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  for (const auto& c : cells_) {
    if (!c.allFinite()) throw ConfigError("tensor field: non-finite entry");
    const Mat3 sym = 0.5 * (c + c.transpose());
    es.computeDirect(sym, Eigen::EigenvaluesOnly);
    lmin_ = std::min(lmin_, es.eigenvalues()[0]);
    lmax_ = std::max(lmax_, es.eigenvalues()[2]);
    diagonal_ = diagonal_ && is_diagonal(c);
  }
}

const char* preset_name(TensorPreset p) {
  switch (p) {
    case TensorPreset::constant_isotropic: return "constant_isotropic";
    case TensorPreset::constant_diagonal: return "constant_diagonal";
    case TensorPreset::diagonal_ramp: return "diagonal_ramp";
    case TensorPreset::exponential_isotropic: return "exponential_isotropic";
    case TensorPreset::constant_symmetric: return "constant_symmetric";
  }
  return "?";
}

TensorPreset parse_preset(const std::string& name) {
  for (auto p : {TensorPreset::constant_isotropic, TensorPreset::constant_diagonal, TensorPreset::diagonal_ramp,
                 TensorPreset::exponential_isotropic, TensorPreset::constant_symmetric}) {
    if (name == preset_name(p)) return p;
  }
  throw ConfigError("unknown material preset '" + name + "'");
}

TensorField tensor_from_function(const YeeGrid& grid, const std::function<Mat3(const Vec3&)>& f) {
  std::vector<Mat3> cells;
  cells.reserve(grid.cell_count());
  for (int k = 0; k < grid.n(2); ++k)
    for (int j = 0; j < grid.n(1); ++j)
      for (int i = 0; i < grid.n(0); ++i) cells.push_back(f(grid.cell_center(i, j, k)));
  return TensorField(grid, std::move(cells));
}

TensorField make_tensor_field(const YeeGrid& grid, const TensorSpec& spec) {
  if (!spec.file.empty()) return read_tensor_file(grid, spec.file);
  const auto& p = spec.params;
  auto need = [&](std::size_t count, std::vector<double> defaults) {
    if (p.empty()) return defaults;
    if (p.size() != count) {
      throw ConfigError(std::string("material preset ") + preset_name(spec.preset) + " expects " +
                        std::to_string(count) + " parameter(s)");
    }
    return p;
  };
  switch (spec.preset) {
    case TensorPreset::constant_isotropic: {
      const double v = need(1, {1.0})[0];
      return tensor_from_function(grid, [v](const Vec3&) { return Mat3(v * Mat3::Identity()); });
    }
    case TensorPreset::constant_diagonal: {
      const auto d = need(3, {1.0, 1.0, 1.0});
      return tensor_from_function(grid, [d](const Vec3&) { return Mat3(Vec3(d[0], d[1], d[2]).asDiagonal()); });
    }
    case TensorPreset::diagonal_ramp: {
      const double s = need(1, {1.0})[0];
      return tensor_from_function(grid, [s](const Vec3& x) { return Mat3(Vec3(1.0 + s * x[0], 1.0, 1.0).asDiagonal()); });
    }
    case TensorPreset::exponential_isotropic: {
      const double s = need(1, {1.0})[0];
      return tensor_from_function(grid, [s](const Vec3& x) { return Mat3(std::exp(s * x[0]) * Mat3::Identity()); });
    }
    case TensorPreset::constant_symmetric: {
      const auto v = need(6, {1.0, 1.0, 1.0, 0.0, 0.0, 0.0});
      Mat3 m;
      m << v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2];
      return tensor_from_function(grid, [m](const Vec3&) { return m; });
    }
  }
  throw ConfigError("unknown material preset");
}

TensorField parse_tensor_text(const YeeGrid& grid, const std::string& text) {
  std::vector<Mat3> cells(grid.cell_count(), Mat3::Zero());
  std::vector<int> seen(grid.cell_count(), 0);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError("material file line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (v.empty()) continue;
    if (v.size() != 6 && v.size() != 9) {
      throw ConfigError("material file line " + std::to_string(lineno) + ": expected 6 or 9 fields");
    }
    const int i = static_cast<int>(v[0]), j = static_cast<int>(v[1]), k = static_cast<int>(v[2]);
    if (i != v[0] || j != v[1] || k != v[2] || i < 0 || j < 0 || k < 0 || i >= grid.n(0) || j >= grid.n(1) ||
        k >= grid.n(2)) {
      throw ConfigError("material file line " + std::to_string(lineno) + ": cell index out of range");
    }
    const double e12 = v.size() == 9 ? v[6] : 0.0;
    const double e13 = v.size() == 9 ? v[7] : 0.0;
    const double e23 = v.size() == 9 ? v[8] : 0.0;
    const int c = grid.cell_index(i, j, k);
    if (seen[c]++) throw ConfigError("material file line " + std::to_string(lineno) + ": duplicate cell");
    cells[c] << v[3], e12, e13, e12, v[4], e23, e13, e23, v[5];
  }
  for (int c = 0; c < grid.cell_count(); ++c) {
    if (!seen[c]) throw ConfigError("material file: missing cell " + std::to_string(c));
  }
  return TensorField(grid, std::move(cells));
}

TensorField read_tensor_file(const YeeGrid& grid, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open material file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_tensor_text(grid, ss.str());
}

bool MaterialReport::pass() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  if (materials_checked && !(alpha > 0.0)) return false;
  if (geometry_checked && (!(d1 > 0.0) || !(beta > 0.0))) return false;
  return true;
}

std::string MaterialReport::summary() const {
  std::ostringstream os;
  os.precision(17);
  os << "alpha = " << alpha << "\n";
  os << "lambda_min_eps = " << lambda_min_eps << "\nlambda_max_eps = " << lambda_max_eps << "\n";
  os << "lambda_min_mu = " << lambda_min_mu << "\nlambda_max_mu = " << lambda_max_mu << "\n";
  if (geometry_checked) {
    os << "d1 = " << d1 << "\nbeta = " << beta << "\nm_sup = " << m_sup << "\n";
  }
  for (const auto& c : checks) {
    os << "check " << c.name << ": " << (c.pass ? "pass" : "FAIL") << " value=" << c.value;
    if (!c.location.empty()) os << " at " << c.location;
    os << "\n";
  }
  for (const auto& n : notes) os << "note: " << n << "\n";
  os << "overall: " << (pass() ? "pass" : "FAIL") << "\n";
  return os.str();
}

namespace {

struct SpectralScan {
  double lmin = std::numeric_limits<double>::infinity();
  double lmax = -std::numeric_limits<double>::infinity();
  double asym = 0.0;
  std::string lmin_at, asym_at;
};

SpectralScan scan(const TensorField& t) {
  SpectralScan r;
  const auto d = t.dims();
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const Mat3& a = t.at(i, j, k);
        const double as = max_asymmetry(a);
        if (as > r.asym) {
          r.asym = as;
          r.asym_at = cell_label(i, j, k);
        }
        es.computeDirect(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
        if (es.eigenvalues()[0] < r.lmin) {
          r.lmin = es.eigenvalues()[0];
          r.lmin_at = cell_label(i, j, k);
        }
        r.lmax = std::max(r.lmax, es.eigenvalues()[2]);
      }
  return r;
}

constexpr double kSymmetryTol = 1e-12;

}  // namespace

MaterialReport check_assumption_materials(const TensorField& eps, const TensorField& mu) {
  MaterialReport rep;
  rep.materials_checked = true;
  const auto se = scan(eps);
  const auto sm = scan(mu);
  rep.lambda_min_eps = se.lmin;
  rep.lambda_max_eps = se.lmax;
  rep.lambda_min_mu = sm.lmin;
  rep.lambda_max_mu = sm.lmax;
  rep.alpha = std::min(se.lmin, sm.lmin);
  rep.checks.push_back({"eps symmetric", se.asym <= kSymmetryTol, se.asym, se.asym_at});
  rep.checks.push_back({"mu symmetric", sm.asym <= kSymmetryTol, sm.asym, sm.asym_at});
  rep.checks.push_back({"eps positive definite", se.lmin > 0.0, se.lmin, se.lmin_at});
  rep.checks.push_back({"mu positive definite", sm.lmin > 0.0, sm.lmin, sm.lmin_at});
  rep.notes.push_back("box domain: the boundary has edges and corners, the continuous results assume a C2 boundary");
  return rep;
}

namespace {

/// Derivative of a per-cell tensor along one axis: central inside, one-sided second order
/// at the two outermost layers.
Mat3 axis_derivative(const TensorField& t, int axis, int i, int j, int k) {
  const auto d = t.dims();
  std::array<int, 3> idx{i, j, k};
  auto at = [&](int shift) {
    auto q = idx;
    q[axis] += shift;
    return t.at(q[0], q[1], q[2]);
  };
  const double h = t.h(axis);
  const int n = d[axis];
  const int p = idx[axis];
  if (p == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  if (p == n - 1) return (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h);
  return (at(1) - at(-1)) / (2.0 * h);
}

double generalized_min(const Mat3& lhs, const Mat3& rhs) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat3> ges(0.5 * (lhs + lhs.transpose()), 0.5 * (rhs + rhs.transpose()),
                                                     Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  return ges.eigenvalues()[0];
}

struct D1Scan {
  double d1 = std::numeric_limits<double>::infinity();
  std::string at;
};

void d1_scan(const TensorField& t, const Vec3& x0, D1Scan& out) {
  const auto d = t.dims();
  const int total = d[0] * d[1] * d[2];
  std::vector<std::array<Mat3, 3>> deriv(total);
  auto center = [&](int i, int j, int k) { return Vec3((i + 0.5) * t.h(0), (j + 0.5) * t.h(1), (k + 0.5) * t.h(2)); };
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const int c = i + d[0] * (j + d[1] * k);
        for (int a = 0; a < 3; ++a) deriv[c][a] = axis_derivative(t, a, i, j, k);
        const Vec3 m = center(i, j, k) - x0;
        const Mat3 md = m[0] * deriv[c][0] + m[1] * deriv[c][1] + m[2] * deriv[c][2];
        const double v = generalized_min(t.at(c) + md, t.at(c));
        if (v < out.d1) {
          out.d1 = v;
          out.at = cell_label(i, j, k);
        }
      }
  // Boundary face centers: quadratic extrapolation from the three innermost layers.
  constexpr double w0 = 1.875, w1 = -1.25, w2 = 0.375;
  for (int axis = 0; axis < 3; ++axis) {
    const int ta = (axis + 1) % 3, tb = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      for (int q = 0; q < d[tb]; ++q)
        for (int p = 0; p < d[ta]; ++p) {
          std::array<int, 3> layer[3];
          for (int l = 0; l < 3; ++l) {
            layer[l][axis] = side == 0 ? l : d[axis] - 1 - l;
            layer[l][ta] = p;
            layer[l][tb] = q;
          }
          auto cid = [&](const std::array<int, 3>& x) { return x[0] + d[0] * (x[1] + d[1] * x[2]); };
          const int c0 = cid(layer[0]), c1 = cid(layer[1]), c2 = cid(layer[2]);
          const Mat3 tf = w0 * t.at(c0) + w1 * t.at(c1) + w2 * t.at(c2);
          Vec3 pos = center(layer[0][0], layer[0][1], layer[0][2]);
          pos[axis] = side == 0 ? 0.0 : d[axis] * t.h(axis);
          const Vec3 m = pos - x0;
          Mat3 md = Mat3::Zero();
          for (int a = 0; a < 3; ++a) md += m[a] * (w0 * deriv[c0][a] + w1 * deriv[c1][a] + w2 * deriv[c2][a]);
          const double v = generalized_min(tf + md, tf);
          if (v < out.d1) {
            std::ostringstream os;
            os << "boundary face axis " << axis << (side == 0 ? " low" : " high") << " near "
               << cell_label(layer[0][0], layer[0][1], layer[0][2]);
            out.d1 = v;
            out.at = os.str();
          }
        }
    }
  }
}

}  // namespace

void check_assumption_geometry(const TensorField& eps, const TensorField& mu, const MultiplierField& m,
                               MaterialReport& report) {
  report.geometry_checked = true;
  report.beta = m.beta;
  report.m_sup = m.m_sup;
  D1Scan s;
  d1_scan(eps, m.x0, s);
  d1_scan(mu, m.x0, s);
  report.d1 = s.d1;
  report.checks.push_back({"star-shaped (beta > 0)", m.beta > 0.0, m.beta, ""});
  report.checks.push_back({"multiplier condition (d1 > 0)", s.d1 > 0.0, s.d1, s.at});
}

MaterialReport check_all(const TensorField& eps, const TensorField& mu, const MultiplierField& m) {
  MaterialReport r = check_assumption_materials(eps, mu);
  check_assumption_geometry(eps, mu, m, r);
  return r;
}

}  // namespace maxfb
