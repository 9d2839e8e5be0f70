#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "maxfb/analysis.hpp"
#include "maxfb/cli.hpp"
#include "maxfb/config.hpp"
#include "maxfb/errors.hpp"
#include "maxfb/operator_lab.hpp"

namespace py = pybind11;
using namespace maxfb;

namespace {

py::dict trace_dict(const EnergyTrace& tr) {
  std::vector<double> t, ew, ep, ex, d, flux;
  for (const auto& r : tr.rows) {
    t.push_back(r.t);
    ew.push_back(r.E_weighted);
    ep.push_back(r.E_plain);
    ex.push_back(r.E_xi);
    d.push_back(r.D);
    flux.push_back(r.flux);
  }
  py::dict out;
  out["t"] = t;
  out["E_weighted"] = ew;
  out["E_plain"] = ep;
  out["E_xi"] = ex;
  out["D"] = d;
  out["flux"] = flux;
  out["xi"] = tr.xi;
  out["dt"] = tr.dt;
  out["N"] = tr.N;
  out["digest"] = tr.digest;
  return out;
}

FeedbackLaw make_law(const std::string& kind, double a, double b, double gamma1, double gamma2, double tau) {
  FeedbackLaw law;
  law.kind = parse_kind(kind);
  law.a = a;
  law.b = b;
  law.gamma1 = gamma1;
  law.gamma2 = gamma2;
  law.tau = tau;
  law.validate();
  return law;
}

struct LabContext {
  YeeGrid grid;
  TensorField eps, mu;
  Discretization disc;
  OperatorLab lab;

  LabContext(const Config& c)
      : grid(build_grid(c.scenario.domain)),
        eps(make_tensor_field(grid, c.scenario.eps)),
        mu(make_tensor_field(grid, c.scenario.mu)),
        disc(grid, eps, mu),
        lab(disc, c.scenario.law, c.lab.M) {}
};

Config config_from(const std::string& text, const std::string& base_dir) { return parse_config(text, base_dir); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Maxwell system with delayed nonlinear boundary feedback: simulation, certificates, operator checks";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  auto assumption = py::register_exception<AssumptionError>(m, "AssumptionError", base.ptr());
  py::register_exception<GeometryError>(m, "GeometryError", assumption.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line; returns (exit_code, stdout, stderr).");

  m.def(
      "echo_config", [](const std::string& text, const std::string& base_dir) { return echo_config(config_from(text, base_dir)); },
      py::arg("text"), py::arg("base_dir") = "", "Fully resolved config text.");

  m.def(
      "simulate",
      [](const std::string& text, const std::string& base_dir, bool track_divergence) {
        const Config c = config_from(text, base_dir);
        RunOptions opt;
        opt.track_divergence = track_divergence;
        RunOutput r;
        {
          py::gil_scoped_release release;
          r = run(c.scenario, opt);
        }
        py::dict out = trace_dict(r.trace);
        out["certificate_eligible"] = r.certificate_eligible;
        out["xi_note"] = r.xi_note;
        out["steps"] = r.steps;
        out["div_eps_drift"] = r.div_eps_drift;
        out["div_mu_drift"] = r.div_mu_drift;
        const CertificateReport cert = certify(c, r.trace, r.report);
        out["certificate"] = format_certificate(cert);
        out["certificate_pass"] = cert.pass();
        return out;
      },
      py::arg("config_text"), py::arg("base_dir") = "", py::arg("track_divergence") = false,
      "Runs a scenario given as config text; returns the energy trace and the certificate summary.");

  m.def(
      "eval_g",
      [](const Eigen::Vector3d& v, const std::string& kind, double a, double b) {
        return Eigen::Vector3d(eval_g(make_law(kind, a, b, 1.0, 0.0, 1.0), v));
      },
      py::arg("v"), py::arg("kind") = "linear", py::arg("a") = 1.0, py::arg("b") = 0.0);

  m.def(
      "monotonicity_constants",
      [](const std::string& kind, double a, double b) {
        const auto k = constants(make_law(kind, a, b, 1.0, 0.0, 1.0));
        return py::make_tuple(k.c1, k.c2);
      },
      py::arg("kind") = "linear", py::arg("a") = 1.0, py::arg("b") = 0.0, "(c1, c2) of the law.");

  m.def(
      "xi_default",
      [](double g1, double g2, double c1, double c2) {
        const auto k = xi_default(g1, g2, c1, c2);
        py::dict d;
        d["xi"] = k.xi;
        d["c1E"] = k.c1E;
        d["c2E"] = k.c2E;
        d["lo"] = k.lo;
        d["hi"] = k.hi;
        return d;
      },
      py::arg("gamma1"), py::arg("gamma2"), py::arg("c1"), py::arg("c2"));

  m.def(
      "generator_constants",
      [](double g1, double g2, double c1, double c2, double tau) {
        const auto k = generator_constants(g1, g2, c1, c2, tau);
        return py::make_tuple(k.xi_op, k.c_weight, k.C_shift);
      },
      py::arg("gamma1"), py::arg("gamma2"), py::arg("c1"), py::arg("c2"), py::arg("tau"),
      "(xi_op, c_weight, C_shift).");

  m.def(
      "two_sided_check",
      [](const std::vector<double>& t, const std::vector<double>& E, const std::vector<double>& D, double c1E, double c2E,
         double slack, long max_pairs) {
        const PairCheck r = two_sided_check(t, E, D, c1E, c2E, slack, max_pairs);
        py::dict d;
        d["pass"] = r.pass;
        d["upper_pass"] = r.upper_pass;
        d["lower_pass"] = r.lower_pass;
        d["worst_upper"] = r.worst_upper;
        d["worst_lower"] = r.worst_lower;
        d["pairs"] = r.pairs;
        return d;
      },
      py::arg("t"), py::arg("E"), py::arg("D"), py::arg("c1E"), py::arg("c2E"), py::arg("slack") = 1.05,
      py::arg("max_pairs") = 10000);

  m.def(
      "fit_decay",
      [](const std::vector<double>& t, const std::vector<double>& E, double t_a, double t_b) {
        if (E.empty()) throw ContractError("decay fit: empty trace");
        const DecayFit f = fit_decay(t, E, t_a, t_b, E.front());
        return py::make_tuple(f.lambda, f.r2);
      },
      py::arg("t"), py::arg("E"), py::arg("t_a"), py::arg("t_b"), "(lambda, R^2) of ln E against t.");

  m.def(
      "appendix_rate",
      [](double c_tilde, double T) {
        double g = 0.0, l = 0.0;
        appendix_rate(c_tilde, T, g, l);
        return py::make_tuple(g, l);
      },
      py::arg("c_tilde"), py::arg("T"), "(gamma, lambda) of the segment certificate.");

  m.def(
      "monotonicity",
      [](const std::string& text, long pairs, std::uint64_t seed, std::optional<double> c_shift) {
        const Config c = config_from(text, "");
        const LabContext ctx(c);
        const auto mc = constants(c.scenario.law);
        auto k = generator_constants(c.scenario.law.gamma1, c.scenario.law.gamma2, mc.c1, mc.c2, c.scenario.law.tau);
        if (c_shift) k.C_shift = *c_shift;
        MonotonicityReport r;
        {
          py::gil_scoped_release release;
          r = monotonicity_test(ctx.lab, pairs, seed, k);
        }
        py::dict d;
        d["pairs"] = r.pairs;
        d["min_normalized"] = r.min_normalized;
        d["negative"] = r.negative;
        d["pass"] = r.pass;
        d["c_weight"] = k.c_weight;
        d["C_shift"] = k.C_shift;
        return d;
      },
      py::arg("config_text"), py::arg("pairs") = 1000, py::arg("seed") = 1, py::arg("c_shift") = py::none(),
      "Monotonicity of the shifted generator on random domain pairs.");

  m.def(
      "resolvent",
      [](const std::string& text, double b, std::uint64_t seed) {
        const Config c = config_from(text, "");
        const LabContext ctx(c);
        const ResolventResult r = resolvent_solve(ctx.lab, ctx.lab.random_data(seed), b);
        py::dict d;
        d["residual"] = r.residual;
        d["outer_iterations"] = r.outer_iterations;
        d["div_ok"] = r.div_ok;
        d["div_max"] = r.div_max;
        return d;
      },
      py::arg("config_text"), py::arg("b") = 2.0, py::arg("seed") = 1, "Resolvent solve on random data.");
}
