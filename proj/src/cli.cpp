#include "maxfb/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "maxfb/errors.hpp"
#include "maxfb/operator_lab.hpp"

namespace maxfb {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Shortest round-trip form, for directory names.
std::string short_fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

const char* yes_no(bool b) { return b ? "pass" : "FAIL"; }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

MaterialReport material_report(const Config& cfg) {
  const YeeGrid grid = build_grid(cfg.scenario.domain);
  const TensorField eps = make_tensor_field(grid, cfg.scenario.eps);
  const TensorField mu = make_tensor_field(grid, cfg.scenario.mu);
  return check_all(eps, mu, multiplier_field(grid, cfg.scenario.domain.x0));
}

bool hypothesis_holds(const FeedbackLaw& law, const MonotonicityConstants& mc) {
  return !law.pmc() && law.gamma1 * mc.c1 > law.gamma2 * mc.c2;
}

}  // namespace

bool CertificateReport::pass() const {
  if (!eligible) return false;
  bool ok = lemma31.pass && lemma32.pass;
  if (appendix) ok = ok && appendix->certificate;
  return ok;
}

CertificateReport certify(const Config& cfg, const EnergyTrace& trace, const MaterialReport& report) {
  trace.validate();
  CertificateReport c;
  const FeedbackLaw& law = cfg.scenario.law;
  const MonotonicityConstants mc = constants(law);
  c.max_increase = max_increase(trace);
  if (law.pmc()) {
    c.note = "PMC control (gamma1 = gamma2 = 0): no decay certificate";
    return c;
  }
  c.k = dissipation_constants(law.gamma1, law.gamma2, mc.c1, mc.c2, trace.xi);
  if (!hypothesis_holds(law, mc)) {
    c.note = "hypothesis gamma1 c1 > gamma2 c2 fails (gamma1 c1 = " + fmt(law.gamma1 * mc.c1) +
             ", gamma2 c2 = " + fmt(law.gamma2 * mc.c2) + "): no decay certificate";
    return c;
  }
  if (!c.k.admissible) {
    c.note = "xi = " + fmt(trace.xi) + " outside the admissible interval (" + fmt(c.k.lo) + ", " + fmt(c.k.hi) +
             "): no decay certificate";
    return c;
  }
  c.eligible = true;
  c.lemma31 = lemma31_check(trace, c.k, cfg.slack_dissipation);
  c.oc = observability_constants(report, c.k, law, mc.c2, law.tau, cfg.scenario.weighting);
  const double T = cfg.observability_T.value_or(trace.rows.back().t);
  c.lemma32 = lemma32_check(trace, c.oc, T, cfg.slack_observability);
  if (T > 4.0 * c.oc.c) {
    std::vector<double> t, E, D;
    for (const auto& r : trace.rows) {
      t.push_back(r.t);
      E.push_back(r.E_xi);
      D.push_back(r.D);
    }
    c.appendix = appendix_analyze(t, E, D, c.k.c1E, c.k.c2E, c.oc.c, c.oc.c_T, T, cfg.slack_dissipation);
  } else {
    c.appendix_note = "segment certificate needs T > 4c (T = " + fmt(T) + ", 4c = " + fmt(4.0 * c.oc.c) + ")";
  }
  return c;
}

std::string format_certificate(const CertificateReport& c) {
  std::ostringstream o;
  o << "max_increase = " << fmt(c.max_increase) << '\n';
  o << "certificate_eligible = " << (c.eligible ? "true" : "false") << '\n';
  if (!c.eligible) {
    o << "certificate = none\ncertificate_note = " << c.note << '\n';
    return o.str();
  }
  o << "xi = " << fmt(c.k.xi) << "\nc1E = " << fmt(c.k.c1E) << "\nc2E = " << fmt(c.k.c2E) << '\n';
  o << "dissipation = " << yes_no(c.lemma31.pass) << " (pairs " << c.lemma31.pairs << ", floor_pairs "
    << c.lemma31.floor_pairs << ", worst_upper " << fmt(c.lemma31.worst_upper) << ", worst_lower "
    << fmt(c.lemma31.worst_lower) << ", slack " << fmt(c.lemma31.slack) << ")\n";
  o << "observability_c = " << fmt(c.oc.c) << "\nobservability_c_T = " << fmt(c.oc.c_T) << '\n';
  o << "observability = " << yes_no(c.lemma32.pass) << " (T " << fmt(c.lemma32.T) << ", lhs " << fmt(c.lemma32.lhs)
    << ", rhs " << fmt(c.lemma32.rhs) << ", ratio " << fmt(c.lemma32.ratio) << ")\n";
  if (c.appendix) {
    const auto& a = *c.appendix;
    o << "c_tilde = " << fmt(a.c_tilde) << "\ngamma = " << fmt(a.gamma) << "\nlambda = " << fmt(a.lambda) << '\n';
    o << "segments = " << a.segments << "\nworst_segment_ratio = " << fmt(a.worst_a2_ratio)
      << "\nworst_decay_ratio = " << fmt(a.worst_decay_ratio) << '\n';
    o << "certificate = " << (a.certificate ? "pass" : "FAIL") << '\n';
  } else {
    o << "certificate = unavailable\ncertificate_note = " << c.appendix_note << '\n';
  }
  return o.str();
}

Classification classify(const EnergyTrace& trace) {
  Classification c;
  if (trace.rows.empty()) throw ContractError("classify: empty trace");
  const double E0 = trace.rows.front().E_xi, E1 = trace.rows.back().E_xi;
  if (!std::isfinite(E1) || E1 > 10.0 * E0) {
    c.label = "unstable";
    c.lambda_hat = std::numeric_limits<double>::quiet_NaN();
    c.r2 = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  const FitWindow w = post_transient_window(trace);
  try {
    const DecayFit fit = fit_decay(trace, w.t_a, w.t_b);
    c.lambda_hat = fit.lambda;
    c.r2 = fit.r2;
  } catch (const ContractError&) {
    c.label = "non-decaying";
    return c;
  }
  c.label = c.lambda_hat > 0.0 ? "decaying" : "non-decaying";
  return c;
}

std::vector<SweepRow> run_sweep(const Config& base, const std::string& path, const std::vector<double>& values,
                                int jobs, const std::string& out_dir) {
  if (values.empty()) throw ConfigError("sweep: no values");
  const fs::path root = prepare_dir(out_dir);
  std::vector<Config> configs;
  std::vector<SweepRow> rows(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    Config c = base;
    set_numeric(c, path, values[i]);
    rows[i].value = values[i];
    const MonotonicityConstants mc = constants(c.scenario.law);
    if (!c.scenario.xi && !c.scenario.law.pmc() && !hypothesis_holds(c.scenario.law, mc)) {
      c.scenario.xi = c.scenario.law.gamma1 * mc.c1 / 2.0;
      rows[i].note = "hypothesis gamma1 c1 > gamma2 c2 fails; xi = gamma1 c1 / 2, no certificate";
    }
    rows[i].dir = (root / (path + "=" + short_fmt(values[i]))).string();
    c.output_dir = rows[i].dir;
    configs.push_back(std::move(c));
  }

  auto one = [&](std::size_t i) {
    const Config& c = configs[i];
    SweepRow& row = rows[i];
    const fs::path dir = prepare_dir(row.dir);
    write_file(dir / "resolved.cfg", echo_config(c));
    std::ostringstream summary;
    try {
      const RunOutput r = run(c.scenario);
      std::ofstream csv(dir / "energy.csv", std::ios::binary);
      write_energy_csv(csv, r.trace);
      row.result = classify(r.trace);
      row.certificate_eligible = r.certificate_eligible;
      summary << "xi = " << fmt(r.xi) << "\nxi_note = " << r.xi_note << '\n';
    } catch (const NumericalError& e) {
      row.result.label = "unstable";
      row.result.lambda_hat = row.result.r2 = std::numeric_limits<double>::quiet_NaN();
      summary << "run_error = " << e.what() << '\n';
    }
    summary << "value = " << fmt(row.value) << "\nlambda_hat = " << fmt(row.result.lambda_hat)
            << "\nr2 = " << fmt(row.result.r2) << "\nclassification = " << row.result.label
            << "\ncertificate_eligible = " << (row.certificate_eligible ? "true" : "false") << '\n';
    if (!row.note.empty()) summary << "note = " << row.note << '\n';
    write_file(dir / "summary.txt", summary.str());
  };

  const int n = static_cast<int>(values.size());
  const int threads = std::clamp(jobs, 1, n);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) one(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            one(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::ostringstream csv;
  csv << "value,lambda_hat,r2,classification\n";
  for (const auto& r : rows) {
    csv << fmt(r.value) << ',' << fmt(r.result.lambda_hat) << ',' << fmt(r.result.r2) << ',' << r.result.label
        << '\n';
  }
  write_file(root / "sweep_summary.csv", csv.str());
  return rows;
}

namespace {

struct Options {
  std::string config;
  std::string out;
  bool assert_checks = false;
  // sweep
  std::string param;
  std::vector<double> values;
  int jobs = 1;
  // analyze
  std::string energy;
  // operator / resolvent
  long pairs = -1;
  long seed = -1;
  int M = -1;
  double b = -1.0;
  std::optional<double> c_shift;
};

Config load_with_overrides(const Options& o) {
  Config cfg = load_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.pairs >= 0) cfg.lab.pairs = o.pairs;
  if (o.seed >= 0) cfg.lab.seed = static_cast<std::uint64_t>(o.seed);
  if (o.M >= 0) set_numeric(cfg, "operator.M", o.M);
  if (o.b >= 0.0) set_numeric(cfg, "operator.b", o.b);
  return cfg;
}

int cmd_check(const Options& o, std::ostream& out) {
  const Config cfg = load_with_overrides(o);
  const Scenario& sc = cfg.scenario;
  const YeeGrid grid = build_grid(sc.domain);
  const TensorField eps = make_tensor_field(grid, sc.eps);
  const TensorField mu = make_tensor_field(grid, sc.mu);
  const MaterialReport report = check_all(eps, mu, multiplier_field(grid, sc.domain.x0));
  out << report.summary();
  const MonotonicityConstants mc = constants(sc.law);
  out << "feedback = " << kind_name(sc.law.kind) << "\nc1 = " << fmt(mc.c1) << "\nc2 = " << fmt(mc.c2)
      << "\nconstants = " << (mc.provenance == Provenance::analytic ? "analytic" : "sampled") << '\n';
  const TimeStep ts = compute_dt(grid, eps, mu, sc.run.cfl_safety, sc.law.tau);
  out << "dt = " << fmt(ts.dt) << "\nN = " << ts.N << '\n';
  bool ok = report.pass();
  if (sc.law.pmc()) {
    out << "xi = 0 (PMC control)\n";
  } else if (!hypothesis_holds(sc.law, mc)) {
    out << "hypothesis = FAIL: gamma1 c1 > gamma2 c2 fails (xi-admissibility)\n";
    if (!sc.xi) ok = false;
  } else {
    const DissipationConstants k = sc.xi ? dissipation_constants(sc.law.gamma1, sc.law.gamma2, mc.c1, mc.c2, *sc.xi)
                                         : xi_default(sc.law.gamma1, sc.law.gamma2, mc.c1, mc.c2);
    out << "hypothesis = pass\nxi = " << fmt(k.xi) << "\nxi_admissible = " << (k.admissible ? "true" : "false")
        << "\nc1E = " << fmt(k.c1E) << "\nc2E = " << fmt(k.c2E) << '\n';
  }
  return ok ? 0 : static_cast<int>(ExitCode::assumption);
}

int cmd_run(const Options& o, std::ostream& out) {
  const Config cfg = load_with_overrides(o);
  const fs::path dir = prepare_dir(cfg.output_dir);
  write_file(dir / "resolved.cfg", echo_config(cfg));
  RunOptions ro;
  ro.track_divergence = true;
  const auto t0 = std::chrono::steady_clock::now();
  const RunOutput r = run(cfg.scenario, ro);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::ofstream csv(dir / "energy.csv", std::ios::binary);
    write_energy_csv(csv, r.trace);
  }
  const CertificateReport cert = certify(cfg, r.trace, r.report);
  const Classification cls = classify(r.trace);
  std::ostringstream s;
  s << "digest = " << r.trace.digest << "\nsteps = " << r.steps << "\ndt = " << fmt(r.time_step.dt)
    << "\nN = " << r.time_step.N << "\nxi = " << fmt(r.xi) << "\nxi_note = " << r.xi_note
    << "\nE_xi_initial = " << fmt(r.trace.rows.front().E_xi) << "\nE_xi_final = " << fmt(r.trace.rows.back().E_xi)
    << "\ndiv_eps_drift = " << fmt(r.div_eps_drift) << "\ndiv_mu_drift = " << fmt(r.div_mu_drift)
    << "\nprojection_residual = " << fmt(r.projection_residual) << "\nlambda_hat = " << fmt(cls.lambda_hat)
    << "\nr2 = " << fmt(cls.r2) << "\nclassification = " << cls.label << "\nruntime_s = " << fmt(secs) << '\n';
  s << format_certificate(cert);
  write_file(dir / "summary.txt", s.str());
  out << s.str();
  if (o.assert_checks && cert.eligible && !cert.pass()) return static_cast<int>(ExitCode::assertion);
  return 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const Config cfg = load_with_overrides(o);
  const auto rows = run_sweep(cfg, o.param, o.values, o.jobs, cfg.output_dir);
  out << "value,lambda_hat,r2,classification\n";
  bool ok = true;
  for (const auto& r : rows) {
    out << fmt(r.value) << ',' << fmt(r.result.lambda_hat) << ',' << fmt(r.result.r2) << ',' << r.result.label
        << (r.note.empty() ? "" : "  # " + r.note) << '\n';
    if (r.certificate_eligible && r.result.label != "decaying") ok = false;
  }
  if (o.assert_checks && !ok) return static_cast<int>(ExitCode::assertion);
  return 0;
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const Config cfg = load_with_overrides(o);
  std::ifstream f(o.energy);
  if (!f) throw ConfigError("cannot open energy CSV '" + o.energy + "'");
  const EnergyTrace trace = read_energy_csv(f);
  const CertificateReport cert = certify(cfg, trace, material_report(cfg));
  std::ostringstream s;
  if (!trace.digest.empty() && trace.digest != scenario_digest(cfg.scenario)) {
    s << "note = energy CSV digest " << trace.digest << " differs from the config digest "
      << scenario_digest(cfg.scenario) << '\n';
  }
  s << format_certificate(cert);
  if (!o.out.empty()) write_file(prepare_dir(o.out) / "analysis.txt", s.str());
  out << s.str();
  if (o.assert_checks && !cert.pass()) return static_cast<int>(ExitCode::assertion);
  return 0;
}

struct LabContext {
  YeeGrid grid;
  TensorField eps, mu;
  Discretization disc;
  explicit LabContext(const Scenario& sc)
      : grid(build_grid(sc.domain)),
        eps(make_tensor_field(grid, sc.eps)),
        mu(make_tensor_field(grid, sc.mu)),
        disc(grid, eps, mu) {}
};

int cmd_operator(const Options& o, std::ostream& out) {
  const Config cfg = load_with_overrides(o);
  const FeedbackLaw& law = cfg.scenario.law;
  const LabContext ctx(cfg.scenario);
  const OperatorLab lab(ctx.disc, law, cfg.lab.M);
  const MonotonicityConstants mc = constants(law);
  GeneratorConstants k = generator_constants(law.gamma1, law.gamma2, mc.c1, mc.c2, law.tau);
  if (o.c_shift) k.C_shift = *o.c_shift;
  const auto t0 = std::chrono::steady_clock::now();
  const MonotonicityReport rep = monotonicity_test(lab, cfg.lab.pairs, cfg.lab.seed, k, true);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream s;
  s << "feedback = " << kind_name(law.kind) << "\nM = " << cfg.lab.M << "\npairs = " << rep.pairs
    << "\nseed = " << cfg.lab.seed << "\nxi_op = " << fmt(k.xi_op) << "\nc_weight = " << fmt(k.c_weight)
    << "\nC_shift = " << fmt(k.C_shift) << "\nmin_normalized = " << fmt(rep.min_normalized)
    << "\nworst_pair = " << rep.worst_pair << "\nnegative_pairs = " << rep.negative
    << "\nmonotone = " << yes_no(rep.pass) << "\nruntime_s = " << fmt(secs) << '\n';
  const fs::path dir = prepare_dir(cfg.output_dir);
  write_file(dir / "operator_report.txt", s.str());
  std::ostringstream csv;
  csv << "pair_id,pairing,norm2,normalized\n";
  for (const auto& r : rep.rows) {
    csv << r.pair_id << ',' << fmt(r.pairing) << ',' << fmt(r.norm2) << ',' << fmt(r.normalized) << '\n';
  }
  write_file(dir / "operator_pairs.csv", csv.str());
  out << s.str();
  if (o.assert_checks && !rep.pass) return static_cast<int>(ExitCode::assertion);
  return 0;
}

int cmd_resolvent(const Options& o, std::ostream& out) {
  const Config cfg = load_with_overrides(o);
  const LabContext ctx(cfg.scenario);
  const OperatorLab lab(ctx.disc, cfg.scenario.law, cfg.lab.M);
  const ExtState F = lab.random_data(cfg.lab.seed);
  const ResolventResult r = resolvent_solve(lab, F, cfg.lab.b);
  const StrongMonotonicity sm = strong_monotonicity(lab, F, cfg.lab.b, 100, cfg.lab.seed, r.penalty);
  std::ostringstream s;
  s << "feedback = " << kind_name(cfg.scenario.law.kind) << "\nM = " << cfg.lab.M << "\nb = " << fmt(cfg.lab.b)
    << "\nseed = " << cfg.lab.seed << "\nresidual = " << fmt(r.residual) << "\nresidual_E = " << fmt(r.residual_E)
    << "\nresidual_H = " << fmt(r.residual_H) << "\nresidual_Z = " << fmt(r.residual_Z)
    << "\nresidual_Z_fd = " << fmt(r.residual_Z_fd) << "\nrelation_residual = " << fmt(r.relation_residual)
    << "\nouter_iterations = " << r.outer_iterations << "\nkrylov_iterations = " << r.krylov_iterations
    << "\npenalty = " << fmt(r.penalty) << "\ndoublings = " << r.doublings << "\ndiv_max = " << fmt(r.div_max)
    << "\ndiv_ok = " << (r.div_ok ? "true" : "false") << "\nc_star = " << fmt(sm.c_star) << "\nhistory =";
  for (double h : r.history) s << ' ' << fmt(h);
  s << '\n';
  write_file(prepare_dir(cfg.output_dir) / "resolvent_report.txt", s.str());
  out << s.str();
  if (o.assert_checks && !(r.residual <= 1e-8 && r.div_ok)) return static_cast<int>(ExitCode::assertion);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Maxwell system with delayed nonlinear boundary feedback"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool config_positional) {
    if (config_positional) sub->add_option("config", o.config, "configuration file")->required();
    sub->add_option("--out", o.out, "output directory (overrides output.dir)");
    sub->add_flag("--assert", o.assert_checks, "exit 5 when a check or certificate fails");
  };
  auto* check = app.add_subcommand("check", "material, geometry and feedback assumption report");
  add_common(check, true);
  auto* runc = app.add_subcommand("run", "simulate and write energy.csv, summary.txt, resolved.cfg");
  add_common(runc, true);
  auto* sweep = app.add_subcommand("sweep", "one run per value of a numeric config key");
  add_common(sweep, true);
  sweep->add_option("--param", o.param, "numeric key, e.g. feedback.gamma2")->required();
  sweep->add_option("--values", o.values, "comma separated values")->required()->delimiter(',');
  sweep->add_option("--jobs", o.jobs, "concurrent runs")->check(CLI::PositiveNumber);
  auto* analyze = app.add_subcommand("analyze", "certificates from an energy CSV");
  analyze->add_option("energy", o.energy, "energy CSV")->required();
  analyze->add_option("--config", o.config, "configuration of the run")->required();
  add_common(analyze, false);
  auto* op = app.add_subcommand("operator", "monotonicity of the shifted generator");
  add_common(op, true);
  op->add_option("--pairs", o.pairs, "random pairs");
  op->add_option("--seed", o.seed, "seed");
  op->add_option("--M", o.M, "s-grid intervals");
  op->add_option("--c-shift", o.c_shift, "override the shift C (negative control)");
  auto* res = app.add_subcommand("resolvent", "resolvent solve on random data");
  add_common(res, true);
  res->add_option("--b", o.b, "resolvent parameter");
  res->add_option("--seed", o.seed, "seed");
  res->add_option("--M", o.M, "s-grid intervals");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    if (check->parsed()) return cmd_check(o, out);
    if (runc->parsed()) return cmd_run(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
    if (analyze->parsed()) return cmd_analyze(o, out);
    if (op->parsed()) return cmd_operator(o, out);
    if (res->parsed()) return cmd_resolvent(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::numerical);
  }
  return static_cast<int>(ExitCode::config);
}

}  // namespace maxfb
