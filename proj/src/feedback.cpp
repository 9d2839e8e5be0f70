#include "maxfb/feedback.hpp"

#include <boost/random/sobol.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "maxfb/errors.hpp"

namespace maxfb {

const char* kind_name(FeedbackKind k) {
  switch (k) {
    case FeedbackKind::linear: return "linear";
    case FeedbackKind::saturating: return "saturating";
    case FeedbackKind::table: return "table";
  }
  return "?";
}

FeedbackKind parse_kind(const std::string& name) {
  for (auto k : {FeedbackKind::linear, FeedbackKind::saturating, FeedbackKind::table}) {
    if (name == kind_name(k)) return k;
  }
  throw ConfigError("unknown feedback kind '" + name + "'");
}

void FeedbackLaw::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(a) || !finite(b) || !finite(gamma1) || !finite(gamma2) || !finite(tau)) {
    throw ConfigError("feedback: parameters must be finite");
  }
  if (!(tau > 0.0)) throw ConfigError("feedback: tau must be positive");
  if (gamma2 < 0.0) throw ConfigError("feedback: gamma2 must be non-negative");
  if (!pmc() && !(gamma1 > 0.0)) {
    throw ConfigError("feedback: gamma1 must be positive (gamma1 = gamma2 = 0 selects the PMC control)");
  }
  switch (kind) {
    case FeedbackKind::linear:
      if (!(a > 0.0)) throw ConfigError("feedback: a must be positive");
      break;
    case FeedbackKind::saturating:
      if (!(a > 0.0)) throw ConfigError("feedback: a must be positive");
      if (b < 0.0) throw ConfigError("feedback: b must be non-negative");
      break;
    case FeedbackKind::table: {
      if (table.empty()) throw ConfigError("feedback: table law needs at least one (r, g) pair");
      double prev = -1.0;
      for (const auto& [r, g] : table) {
        if (!finite(r) || !finite(g)) throw ConfigError("feedback: non-finite table entry");
        if (!(r > prev)) throw ConfigError("feedback: table radii must be strictly increasing");
        if (r < 0.0) throw ConfigError("feedback: table radii must be non-negative");
        if (r == 0.0 && g != 0.0) throw ConfigError("feedback: table must satisfy g(0) = 0");
        prev = r;
      }
      break;
    }
  }
}

double FeedbackLaw::radial(double r) const {
  switch (kind) {
    case FeedbackKind::linear: return a * r;
    case FeedbackKind::saturating: return a * r + b * r / (1.0 + r);
    case FeedbackKind::table: {
      // Nodes are (0, 0) followed by the table; beyond the last node the last slope continues.
      double r0 = 0.0, g0 = 0.0;
      std::size_t i = 0;
      if (!table.empty() && table[0].first == 0.0) i = 1;
      for (; i < table.size(); ++i) {
        const auto [r1, g1] = table[i];
        if (r <= r1 || i + 1 == table.size()) return g0 + (g1 - g0) * (r - r0) / (r1 - r0);
        r0 = r1;
        g0 = g1;
      }
      return g0;
    }
  }
  return 0.0;
}

Vec3 eval_g(const FeedbackLaw& law, const Vec3& v) {
  switch (law.kind) {
    case FeedbackKind::linear: return law.a * v;
    case FeedbackKind::saturating: return (law.a + law.b / (1.0 + v.norm())) * v;
    case FeedbackKind::table: {
      const double r = v.norm();
      if (r == 0.0) return Vec3::Zero();
      return (law.radial(r) / r) * v;
    }
  }
  return Vec3::Zero();
}

double secant_slope(const FeedbackLaw& law, double r) {
  switch (law.kind) {
    case FeedbackKind::linear: return law.a;
    case FeedbackKind::saturating: return law.a + law.b / (1.0 + r);
    case FeedbackKind::table: {
      if (r > 0.0) return law.radial(r) / r;
      for (const auto& [r1, g1] : law.table) {
        if (r1 > 0.0) return g1 / r1;
      }
      return 0.0;
    }
  }
  return 0.0;
}

MonotonicityConstants constants(const FeedbackLaw& law, int sample_pairs) {
  switch (law.kind) {
    case FeedbackKind::linear: return {law.a, law.a, Provenance::analytic};
    case FeedbackKind::saturating: return {law.a, law.a + law.b, Provenance::analytic};
    case FeedbackKind::table: break;
  }
  constexpr double radius = 10.0;
  boost::random::sobol qrng(6);
  boost::random::uniform_01<double> unif;
  double c1 = std::numeric_limits<double>::infinity();
  double c2 = 0.0;
  int accepted = 0;
  while (accepted < sample_pairs) {
    Vec3 u, v;
    for (int d = 0; d < 3; ++d) u[d] = radius * (2.0 * unif(qrng) - 1.0);
    for (int d = 0; d < 3; ++d) v[d] = radius * (2.0 * unif(qrng) - 1.0);
    if (u.norm() > radius || v.norm() > radius) continue;
    const Vec3 du = u - v;
    const double n2 = du.squaredNorm();
    if (n2 < 1e-24) continue;
    const Vec3 dg = eval_g(law, u) - eval_g(law, v);
    c1 = std::min(c1, dg.dot(du) / n2);
    c2 = std::max(c2, dg.norm() / std::sqrt(n2));
    ++accepted;
  }
  if (!(c1 > 0.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "feedback table is not strongly monotone: sampled c1 = " << c1 << " <= 0";
    throw AssumptionError(os.str());
  }
  return {c1, c2, Provenance::sampled};
}

std::vector<std::pair<double, double>> parse_table_text(const std::string& text) {
  std::vector<std::pair<double, double>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double r, g;
    if (!(ls >> r)) continue;
    std::string extra;
    if (!(ls >> g) || (ls >> extra)) {
      throw ConfigError("feedback table line " + std::to_string(lineno) + ": expected `r g(r)`");
    }
    out.emplace_back(r, g);
  }
  return out;
}

std::vector<std::pair<double, double>> read_table_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open feedback table '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_table_text(ss.str());
}

void require_tangential(const Vec3& v, const Vec3& nu, const char* what) {
  const double n = std::abs(v.dot(nu));
  if (!(n <= kTangentialTol * std::max(1.0, v.norm()))) {
    std::ostringstream os;
    os << what << " is not tangential: |v . nu| = " << n;
    throw ContractError(os.str());
  }
}

Vec3 feedback_vector(const FeedbackLaw& law, const Vec3& w_now, const Vec3& w_delayed) {
  Vec3 G = Vec3::Zero();
  if (law.gamma1 != 0.0) G += law.gamma1 * eval_g(law, w_now);
  if (law.gamma2 != 0.0) G += law.gamma2 * eval_g(law, w_delayed);
  return G;
}

Vec3 required_H_trace(const FeedbackLaw& law, const Vec3& w_now, const Vec3& w_delayed, const Vec3& nu) {
  require_tangential(w_now, nu, "current trace");
  require_tangential(w_delayed, nu, "delayed trace");
  return -feedback_vector(law, w_now, w_delayed).cross(nu);
}

BoundaryUpdateResult implicit_boundary_update(const FeedbackLaw& law, const Vec3& p, const Vec3& w_old,
                                              const Vec3& w_delayed, const Vec3& nu, double dt,
                                              const BoundaryMetrics& metrics, ClosureMode mode, int sample,
                                              double tol) {
  const Vec3 s = dt * metrics.self;
  auto correction = [&](const Vec3& G) { return Vec3(s.cwiseProduct(nu.cross(G)).cross(nu)); };

  BoundaryUpdateResult res;
  if (mode == ClosureMode::explicit_lag || law.pmc()) {
    res.w = p - correction(feedback_vector(law, w_old, w_delayed));
    return res;
  }

  tol = std::min(tol, 1e-12);
  constexpr int max_iter = 50;
  auto map = [&](const Vec3& w) { return Vec3(p - correction(feedback_vector(law, 0.5 * (w_old + w), w_delayed))); };
  // Round-off level of p - T(G) - w: a residual below it cannot be reduced further.
  auto floor = [&](const Vec3& w) {
    const Vec3 t = correction(feedback_vector(law, 0.5 * (w_old + w), w_delayed));
    return 8.0 * std::numeric_limits<double>::epsilon() *
           (p.cwiseAbs().maxCoeff() + t.cwiseAbs().maxCoeff() + w.cwiseAbs().maxCoeff());
  };

  // Per-component gain of the correction, so that d o G approximates T(G) on tangential G.
  Vec3 d;
  for (int c = 0; c < 3; ++c) d[c] = correction(law.gamma1 * Vec3::Unit(c))[c];
  // Secant slope phi(r)/r of g; relaxing by 1 / (1 + d k / 2) solves the linear law in one step.
  auto slope = [&](const Vec3& v) { return secant_slope(law, v.norm()); };

  Vec3 w = p;
  double theta = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    const Vec3 step = map(w) - w;
    const double r = step.cwiseAbs().maxCoeff();
    if (r <= std::max(tol, floor(w))) {
      res.w = w;
      res.iterations = it - 1;
      res.residual = r;
      return res;
    }
    if (r > prev) theta *= 0.5;
    prev = r;
    const double k = slope(0.5 * (w_old + w));
    for (int c = 0; c < 3; ++c) w[c] += theta * step[c] / (1.0 + 0.5 * d[c] * k);
  }
  const double r = (map(w) - w).cwiseAbs().maxCoeff();
  if (r <= std::max(tol, floor(w))) {
    res.w = w;
    res.iterations = max_iter;
    res.residual = r;
    return res;
  }
  std::ostringstream os;
  os.precision(17);
  os << "boundary update did not converge in " << max_iter << " iterations at sample " << sample
     << ", residual " << r;
  throw NumericalError(os.str());
}

}  // namespace maxfb
