#include "maxfb/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include "maxfb/errors.hpp"

namespace maxfb {

EnergyValues energies(const Discretization& disc, const EMState& state, const DelayRing& ring, double xi,
                      Weighting weighting) {
  EnergyValues v;
  v.weighted = disc.weighted_energy(state.E, state.H_prev, state.H);
  v.plain = disc.plain_energy(state.E, state.H_prev, state.H);
  const auto& samples = disc.grid().samples();
  double delay = 0.0;
  for (int s = 0; s < ring.sample_count(); ++s) {
    delay += samples[s].area * ring.s_quadrature(s);
    v.D += samples[s].area * (ring.z0(s).squaredNorm() + ring.z1(s).squaredNorm());
  }
  const double field = weighting == Weighting::weighted ? v.weighted : v.plain;
  v.xi_energy = field + xi * ring.tau() * delay;
  return v;
}

BoundaryIntegrals boundary_integrals(const YeeGrid& grid, const FeedbackLaw& law, const DelayRing& ring) {
  BoundaryIntegrals b;
  const auto& samples = grid.samples();
  for (int s = 0; s < ring.sample_count(); ++s) {
    const Vec3& z0 = ring.z0(s);
    const Vec3& z1 = ring.z1(s);
    const double A = samples[s].area;
    b.work += A * feedback_vector(law, z0, z1).dot(z0);
    b.sqdiff += A * (z0.squaredNorm() - z1.squaredNorm());
    b.D += A * (z0.squaredNorm() + z1.squaredNorm());
  }
  return b;
}

DissipationConstants dissipation_constants(double gamma1, double gamma2, double c1, double c2, double xi) {
  DissipationConstants k;
  k.xi = xi;
  k.lo = gamma2 * c2 / 2.0;
  k.hi = gamma1 * c1 - gamma2 * c2 / 2.0;
  k.c1E = std::min(gamma1 * c1 - gamma2 * c2 / 2.0 - xi, xi - gamma2 * c2 / 2.0);
  k.c2E = gamma1 * c2 + gamma2 * c2 / 2.0 + xi;
  k.admissible = k.lo < xi && xi < k.hi && k.c1E > 0.0;
  return k;
}

DissipationConstants xi_default(double gamma1, double gamma2, double c1, double c2) {
  if (!(gamma1 * c1 > gamma2 * c2)) {
    std::ostringstream os;
    os.precision(17);
    os << "no admissible xi: the condition gamma1 c1 > gamma2 c2 fails (gamma1 c1 = " << gamma1 * c1
       << ", gamma2 c2 = " << gamma2 * c2 << "); the delayed term is too strong for the decay estimate";
    throw AssumptionError(os.str());
  }
  return dissipation_constants(gamma1, gamma2, c1, c2, gamma1 * c1 / 2.0);
}

namespace {

std::vector<double> cumulative_trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
  std::vector<double> c(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) c[i] = c[i - 1] + 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
  return c;
}

/// Pairs (i, j), i < j: every consecutive pair, then distinct random pairs up to max_pairs.
std::vector<std::pair<int, int>> choose_pairs(int n, long max_pairs, std::uint64_t seed) {
  std::vector<std::pair<int, int>> pairs;
  if (n < 2) return pairs;
  const long total = static_cast<long>(n) * (n - 1) / 2;
  if (total <= max_pairs) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    return pairs;
  }
  std::set<std::pair<int, int>> seen;
  for (int i = 0; i + 1 < n && static_cast<long>(pairs.size()) < max_pairs; ++i) {
    pairs.emplace_back(i, i + 1);
    seen.emplace(i, i + 1);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  while (static_cast<long>(pairs.size()) < max_pairs) {
    int i = pick(rng), j = pick(rng);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    if (seen.emplace(i, j).second) pairs.emplace_back(i, j);
  }
  return pairs;
}

void split(const EnergyTrace& trace, std::vector<double>& t, std::vector<double>& E, std::vector<double>& D) {
  t.clear();
  E.clear();
  D.clear();
  for (const auto& r : trace.rows) {
    t.push_back(r.t);
    E.push_back(r.E_xi);
    D.push_back(r.D);
  }
}

/// Integral over [a, b] of the piecewise-linear interpolant of (t, f).
double integrate_linear(const std::vector<double>& t, const std::vector<double>& f, double a, double b) {
  auto value = [&](double x) {
    auto it = std::upper_bound(t.begin(), t.end(), x);
    if (it == t.begin()) return f.front();
    if (it == t.end()) return f.back();
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
    return (1.0 - w) * f[i - 1] + w * f[i];
  };
  double sum = 0.0;
  double x0 = a, f0 = value(a);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= a) continue;
    if (t[i] >= b) break;
    sum += 0.5 * (t[i] - x0) * (f[i] + f0);
    x0 = t[i];
    f0 = f[i];
  }
  sum += 0.5 * (b - x0) * (value(b) + f0);
  return sum;
}

double interpolate(const std::vector<double>& t, const std::vector<double>& f, double x) {
  auto it = std::upper_bound(t.begin(), t.end(), x);
  if (it == t.begin()) return f.front();
  if (it == t.end()) return f.back();
  const std::size_t i = static_cast<std::size_t>(it - t.begin());
  const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
  return (1.0 - w) * f[i - 1] + w * f[i];
}

}  // namespace

PairCheck two_sided_check(const std::vector<double>& t, const std::vector<double>& E, const std::vector<double>& D,
                          double c1E, double c2E, double slack, long max_pairs, std::uint64_t seed, double abs_tol) {
  if (t.size() != E.size() || t.size() != D.size()) throw ContractError("pair check: series lengths differ");
  PairCheck r;
  r.slack = slack;
  r.abs_tol = abs_tol;
  r.worst_upper = std::numeric_limits<double>::infinity();
  r.worst_lower = std::numeric_limits<double>::infinity();
  const auto cum = cumulative_trapezoid(t, D);
  for (const auto& [i, j] : choose_pairs(static_cast<int>(t.size()), max_pairs, seed)) {
    const double dE = E[j] - E[i];
    const double I = cum[j] - cum[i];
    const double upper = -(c1E / slack) * I + abs_tol - dE;
    const double lower = dE + slack * c2E * I + abs_tol;
    if ((upper < 0.0) != (upper - abs_tol < 0.0) || (lower < 0.0) != (lower - abs_tol < 0.0)) ++r.floor_pairs;
    if (upper < r.worst_upper) {
      r.worst_upper = upper;
      r.upper_t1 = t[i];
      r.upper_t2 = t[j];
    }
    if (lower < r.worst_lower) {
      r.worst_lower = lower;
      r.lower_t1 = t[i];
      r.lower_t2 = t[j];
    }
    ++r.pairs;
  }
  if (r.pairs == 0) {
    r.worst_upper = 0.0;
    r.worst_lower = 0.0;
  }
  r.upper_pass = r.worst_upper >= 0.0;
  r.lower_pass = r.worst_lower >= 0.0;
  r.pass = r.upper_pass && r.lower_pass;
  return r;
}

PairCheck lemma31_check(const EnergyTrace& trace, const DissipationConstants& k, double slack, long max_pairs,
                        std::uint64_t seed, double abs_tol) {
  std::vector<double> t, E, D;
  split(trace, t, E, D);
  return two_sided_check(t, E, D, k.c1E, k.c2E, slack, max_pairs, seed, abs_tol);
}

double max_increase(const EnergyTrace& trace) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < trace.rows.size(); ++i) {
    worst = std::max(worst, trace.rows[i].E_xi - trace.rows[i - 1].E_xi);
  }
  return trace.rows.size() < 2 ? 0.0 : worst;
}

ObservabilityConstants observability_constants(const MaterialReport& report, const DissipationConstants& k,
                                               const FeedbackLaw& law, double c2, double tau, Weighting weighting) {
  if (!(report.d1 > 0.0)) throw AssumptionError("observability: d1 must be positive (multiplier condition)");
  if (!(report.beta > 0.0)) throw AssumptionError("observability: beta must be positive (star-shapedness)");
  if (!(report.alpha > 0.0)) throw AssumptionError("observability: alpha must be positive");
  ObservabilityConstants oc;
  oc.alpha = report.alpha;
  oc.d1 = report.d1;
  oc.beta = report.beta;
  oc.m_sup = report.m_sup;
  oc.lambda_max_eps = report.lambda_max_eps;
  oc.lambda_max_mu = report.lambda_max_mu;
  oc.weighted = weighting == Weighting::weighted;
  const double lmax2 = std::max(oc.lambda_max_eps * oc.lambda_max_eps, oc.lambda_max_mu * oc.lambda_max_mu);
  oc.delta = oc.beta * oc.alpha / (oc.m_sup * oc.m_sup * lmax2);
  oc.c = oc.m_sup * oc.lambda_max_eps * oc.lambda_max_mu / (oc.d1 * oc.alpha);
  const double g2 = std::max(law.gamma1 * law.gamma1, law.gamma2 * law.gamma2);
  oc.c_T = (1.0 / (oc.d1 * oc.alpha)) * (1.0 / (2.0 * oc.delta) + c2 * c2 * g2 / oc.delta) + k.xi * tau;
  oc.kappa = std::max({oc.lambda_max_eps, oc.lambda_max_mu, 1.0});
  if (oc.weighted) {
    oc.c *= oc.kappa;
    oc.c_T *= oc.kappa;
  }
  return oc;
}

Lemma32Report lemma32_check(const EnergyTrace& trace, const ObservabilityConstants& oc, double T, double slack) {
  Lemma32Report r;
  r.T = T;
  r.slack = slack;
  std::vector<double> t, E, D;
  split(trace, t, E, D);
  if (t.empty()) return r;
  r.lhs = integrate_linear(t, E, t.front(), T);
  r.rhs = oc.c * (E.front() + interpolate(t, E, T)) + oc.c_T * integrate_linear(t, D, t.front(), T);
  r.pass = r.lhs <= slack * r.rhs;
  r.ratio = r.rhs > 0.0 ? r.lhs / r.rhs : (r.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return r;
}

DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& E, double t_a, double t_b, double E0) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_a || t[i] > t_b) continue;
    if (!(E[i] > 0.0)) {
      std::ostringstream os;
      os << "decay fit: non-positive energy at t = " << t[i] << ", window rejected";
      throw ContractError(os.str());
    }
    x.push_back(t[i]);
    y.push_back(std::log(E[i]));
  }
  if (x.size() < 2) throw ContractError("decay fit: fewer than two samples in the window");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  DecayFit fit;
  fit.points = static_cast<int>(x.size());
  fit.lambda = -slope;
  fit.C = std::exp(intercept) / E0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (intercept + slope * x[i]);
    ss_res += e * e;
  }
  // A flat log-trace has no variance to explain.
  const double floor = 1e-24 * std::max(1.0, my * my) * n;
  fit.r2 = syy > floor ? 1.0 - ss_res / syy : 0.0;
  if (syy <= floor) fit.lambda = 0.0;
  return fit;
}

DecayFit fit_decay(const EnergyTrace& trace, double t_a, double t_b) {
  std::vector<double> t, E, D;
  split(trace, t, E, D);
  if (E.empty()) throw ContractError("decay fit: empty trace");
  return fit_decay(t, E, t_a, t_b, E.front());
}

FitWindow post_transient_window(const EnergyTrace& trace, double start, double end) {
  FitWindow w;
  if (trace.rows.empty()) throw ContractError("fit window: empty trace");
  const double E0 = trace.rows.front().E_xi;
  const double t_end = trace.rows.back().t;
  w.t_a = 0.5 * t_end;
  w.t_b = t_end;
  for (const auto& r : trace.rows) {
    if (!w.reached_start && r.E_xi < start * E0) {
      w.t_a = r.t;
      w.reached_start = true;
    }
    if (w.reached_start && r.E_xi < end * E0) {
      w.t_b = r.t;
      w.reached_end = true;
      break;
    }
  }
  return w;
}

void appendix_rate(double c_tilde, double T, double& gamma, double& lambda) {
  gamma = c_tilde / (c_tilde + T / 2.0);
  lambda = -std::log(gamma) / T;
}

AppendixReport appendix_analyze(const std::vector<double>& t, const std::vector<double>& E,
                                const std::vector<double>& D, double c1E, double c2E, double c, double c_T,
                                double T, double slack, long max_pairs, std::uint64_t seed) {
  if (!(T > 4.0 * c)) {
    std::ostringstream os;
    os.precision(17);
    os << "segment length must satisfy T > 4c (choosing T > 4c); got T = " << T << ", 4c = " << 4.0 * c;
    throw AssumptionError(os.str());
  }
  if (!(c1E > 0.0)) throw AssumptionError("appendix: c1E must be positive");
  if (t.empty() || t.size() != E.size() || t.size() != D.size()) {
    throw ContractError("appendix: samples must be non-empty and of equal length");
  }
  AppendixReport r;
  r.T = T;
  r.c_tilde = (c_T + c * c2E) / c1E;
  appendix_rate(r.c_tilde, T, r.gamma, r.lambda);

  r.a1 = two_sided_check(t, E, D, c1E, c2E, slack, max_pairs, seed);

  const double t0 = t.front();
  const double tmax = t.back();
  r.worst_a2_ratio = 0.0;
  for (int m = 0;; ++m) {
    const double a = t0 + m * T, b = t0 + (m + 1) * T;
    if (b > tmax * (1.0 + 1e-12) + 1e-300) break;
    const double lhs = integrate_linear(t, E, a, b);
    const double rhs = c * (interpolate(t, E, a) + interpolate(t, E, b)) + c_T * integrate_linear(t, D, a, b);
    const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    r.worst_a2_ratio = std::max(r.worst_a2_ratio, ratio);
    if (!(lhs <= slack * rhs)) r.a2_pass = false;
    ++r.segments;
  }
  if (r.segments == 0) r.a2_pass = false;

  const double E0 = E.front();
  r.worst_decay_ratio = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double bound = std::exp(-r.lambda * (t[i] - t0)) * E0 / r.gamma;
    if (bound > 0.0) r.worst_decay_ratio = std::max(r.worst_decay_ratio, E[i] / bound);
    if (!(E[i] <= bound * (1.0 + 1e-12))) r.decay_pass = false;
  }
  r.certificate = r.a1.pass && r.a2_pass && r.decay_pass;
  return r;
}

DissipationResidual dissipation_residual(const EnergyTrace& trace, const StepSeries& series) {
  DissipationResidual res;
  if (trace.rows.size() < 2) return res;
  const auto cw = cumulative_trapezoid(series.t, series.work);
  const auto cs = cumulative_trapezoid(series.t, series.sqdiff);
  auto locate = [&](double x) {
    auto it = std::lower_bound(series.t.begin(), series.t.end(), x - 1e-9 * std::max(1.0, std::abs(x)));
    if (it == series.t.end() || std::abs(*it - x) > 1e-9 * std::max(1.0, std::abs(x))) {
      throw ContractError("dissipation residual: record time missing from the per-step series");
    }
    return static_cast<std::size_t>(it - series.t.begin());
  };
  for (std::size_t k = 1; k < trace.rows.size(); ++k) {
    const auto& r1 = trace.rows[k - 1];
    const auto& r2 = trace.rows[k];
    const std::size_t i = locate(r1.t), j = locate(r2.t);
    const double predicted = -(cw[j] - cw[i]) + series.xi * (cs[j] - cs[i]);
    const double diff = std::abs((r2.E_xi - r1.E_xi) - predicted);
    const double rel = diff == 0.0 ? 0.0 : diff / std::max(r1.E_xi, std::numeric_limits<double>::min());
    if (rel > res.max_relative) {
      res.max_relative = rel;
      res.t1 = r1.t;
      res.t2 = r2.t;
    }
  }
  return res;
}

}  // namespace maxfb
