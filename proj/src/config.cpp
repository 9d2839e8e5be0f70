#include "maxfb/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>

#include "maxfb/errors.hpp"

namespace maxfb {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& text) {
  static const std::regex decimal(R"([+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)");
  if (!std::regex_match(text, decimal)) throw ConfigError("'" + text + "' is not a decimal number");
  const double v = std::strtod(text.c_str(), nullptr);
  if (!std::isfinite(v)) throw ConfigError("'" + text + "' is not finite");
  return v;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(parse_number(tok));
  return out;
}

Vec3 parse_vec3(const std::string& text) {
  const auto v = parse_list(text);
  if (v.size() != 3) throw ConfigError("expected three numbers, got '" + text + "'");
  return {v[0], v[1], v[2]};
}

bool parse_bool(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("expected true or false, got '" + text + "'");
}

long as_integer(double v, const char* what) {
  if (v != std::floor(v) || std::abs(v) > 1e15) throw ConfigError(std::string(what) + " must be an integer");
  return static_cast<long>(v);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

const char* closure_name(ClosureMode m) { return m == ClosureMode::centered ? "centered" : "explicit"; }

ClosureMode parse_closure(const std::string& s) {
  if (s == "centered") return ClosureMode::centered;
  if (s == "explicit") return ClosureMode::explicit_lag;
  throw ConfigError("unknown closure '" + s + "' (centered | explicit)");
}

std::string resolve_path(const std::string& p, const std::string& base) {
  if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

struct Context {
  std::string base_dir;
};

using NumericSetter = std::function<void(Config&, double)>;
using TextSetter = std::function<void(Config&, const std::string&, const Context&)>;

struct Key {
  std::string section;
  std::string name;
  NumericSetter numeric;  // set for numeric leaves
  TextSetter text;        // everything else
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    auto num = [&](const std::string& sec, const std::string& name, NumericSetter f) { k.push_back({sec, name, std::move(f), {}}); };
    auto txt = [&](const std::string& sec, const std::string& name, TextSetter f) { k.push_back({sec, name, {}, std::move(f)}); };

    for (int a = 0; a < 3; ++a) {
      const std::string L = std::string("L") + "xyz"[a], n = std::string("n") + "xyz"[a];
      num("domain", L, [a, L](Config& c, double v) {
        require(v > 0.0, "domain." + L + " must be positive");
        c.scenario.domain.lengths[a] = v;
      });
      num("domain", n, [a, n](Config& c, double v) {
        const long i = as_integer(v, ("domain." + n).c_str());
        require(i >= 4, "domain." + n + " must be at least 4");
        c.scenario.domain.cells[a] = static_cast<int>(i);
      });
    }
    txt("domain", "x0", [](Config& c, const std::string& s, const Context&) { c.scenario.domain.x0 = parse_vec3(s); });

    for (const char* which : {"eps", "mu"}) {
      const bool is_eps = std::string(which) == "eps";
      auto spec = [is_eps](Config& c) -> TensorSpec& { return is_eps ? c.scenario.eps : c.scenario.mu; };
      txt("materials", std::string(which) + "_preset",
          [spec](Config& c, const std::string& s, const Context&) { spec(c).preset = parse_preset(s); });
      txt("materials", std::string(which) + "_params",
          [spec](Config& c, const std::string& s, const Context&) { spec(c).params = parse_list(s); });
      txt("materials", std::string(which) + "_file",
          [spec](Config& c, const std::string& s, const Context& ctx) { spec(c).file = resolve_path(s, ctx.base_dir); });
    }

    txt("feedback", "kind", [](Config& c, const std::string& s, const Context&) {
      c.scenario.law.kind = parse_kind(s == "custom-table" ? "table" : s);
    });
    num("feedback", "a", [](Config& c, double v) {
      require(v > 0.0, "feedback.a must be positive");
      c.scenario.law.a = v;
    });
    num("feedback", "b", [](Config& c, double v) {
      require(v >= 0.0, "feedback.b must be non-negative");
      c.scenario.law.b = v;
    });
    num("feedback", "gamma1", [](Config& c, double v) {
      require(v >= 0.0, "feedback.gamma1 must be positive (gamma1 > 0 required; 0 only with gamma2 = 0)");
      c.scenario.law.gamma1 = v;
    });
    num("feedback", "gamma2", [](Config& c, double v) {
      require(v >= 0.0, "feedback.gamma2 must be non-negative");
      c.scenario.law.gamma2 = v;
    });
    num("feedback", "tau", [](Config& c, double v) {
      require(v > 0.0, "feedback.tau must be positive");
      c.scenario.law.tau = v;
    });
    txt("feedback", "table", [](Config& c, const std::string& s, const Context& ctx) {
      c.table_file = resolve_path(s, ctx.base_dir);
    });

    txt("history", "kind", [](Config& c, const std::string& s, const Context&) {
      c.scenario.history.kind = parse_history(s);
    });
    txt("history", "value", [](Config& c, const std::string& s, const Context&) {
      c.scenario.history.value = parse_vec3(s);
    });
    txt("history", "file", [](Config& c, const std::string& s, const Context& ctx) {
      c.scenario.history.file = resolve_path(s, ctx.base_dir);
    });

    txt("initial", "preset", [](Config& c, const std::string& s, const Context&) {
      c.scenario.initial.preset = parse_initial(s);
    });
    txt("initial", "center", [](Config& c, const std::string& s, const Context&) {
      c.scenario.initial.center = parse_vec3(s);
    });
    num("initial", "width", [](Config& c, double v) {
      require(v > 0.0, "initial.width must be positive");
      c.scenario.initial.width = v;
    });
    num("initial", "amplitude", [](Config& c, double v) { c.scenario.initial.amplitude = v; });
    txt("initial", "polarization", [](Config& c, const std::string& s, const Context&) {
      c.scenario.initial.polarization = parse_vec3(s);
    });
    txt("initial", "project", [](Config& c, const std::string& s, const Context&) {
      c.scenario.initial.project = parse_bool(s);
    });
    txt("initial", "file", [](Config& c, const std::string& s, const Context& ctx) {
      c.scenario.initial.file = resolve_path(s, ctx.base_dir);
    });

    num("run", "t_end", [](Config& c, double v) {
      require(v >= 0.0, "run.t_end must be non-negative");
      c.scenario.run.t_end = v;
    });
    num("run", "steps", [](Config& c, double v) {
      const long n = as_integer(v, "run.steps");
      require(n >= 0, "run.steps must be non-negative");
      c.scenario.run.steps = n;
    });
    num("run", "cfl_safety", [](Config& c, double v) {
      require(v > 0.0, "run.cfl_safety must be positive");
      c.scenario.run.cfl_safety = v;
    });
    num("run", "record_every", [](Config& c, double v) {
      const long n = as_integer(v, "run.record_every");
      require(n >= 1, "run.record_every must be at least 1");
      c.scenario.run.record_every = static_cast<int>(n);
    });
    txt("run", "closure", [](Config& c, const std::string& s, const Context&) {
      c.scenario.closure = parse_closure(s);
    });
    txt("run", "unsafe", [](Config& c, const std::string& s, const Context&) { c.scenario.unsafe = parse_bool(s); });
    txt("run", "allow_unstable_cfl", [](Config& c, const std::string& s, const Context&) {
      c.scenario.allow_unstable_cfl = parse_bool(s);
    });

    txt("analysis", "weighting", [](Config& c, const std::string& s, const Context&) {
      c.scenario.weighting = parse_weighting(s);
    });
    txt("analysis", "xi", [](Config& c, const std::string& s, const Context&) {
      if (s == "auto") {
        c.scenario.xi.reset();
        return;
      }
      const double v = parse_number(s);
      require(v >= 0.0, "analysis.xi must be non-negative or auto");
      c.scenario.xi = v;
    });
    num("analysis", "slack_dissipation", [](Config& c, double v) {
      require(v >= 1.0, "analysis.slack_dissipation must be at least 1");
      c.slack_dissipation = v;
    });
    num("analysis", "slack_observability", [](Config& c, double v) {
      require(v >= 1.0, "analysis.slack_observability must be at least 1");
      c.slack_observability = v;
    });
    num("analysis", "T", [](Config& c, double v) {
      require(v > 0.0, "analysis.T must be positive");
      c.observability_T = v;
    });

    txt("output", "dir", [](Config& c, const std::string& s, const Context& ctx) {
      c.output_dir = resolve_path(s, ctx.base_dir);
    });

    num("operator", "M", [](Config& c, double v) {
      const long n = as_integer(v, "operator.M");
      require(n >= 2, "operator.M must be at least 2");
      c.lab.M = static_cast<int>(n);
    });
    num("operator", "pairs", [](Config& c, double v) {
      const long n = as_integer(v, "operator.pairs");
      require(n >= 1, "operator.pairs must be at least 1");
      c.lab.pairs = n;
    });
    num("operator", "seed", [](Config& c, double v) {
      const long n = as_integer(v, "operator.seed");
      require(n >= 0, "operator.seed must be non-negative");
      c.lab.seed = static_cast<std::uint64_t>(n);
    });
    num("operator", "b", [](Config& c, double v) {
      require(v > 0.0, "operator.b must be positive");
      c.lab.b = v;
    });
    return k;
  }();
  return table;
}

const Key* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : keys()) {
    if (k.section == section && k.name == name) return &k;
  }
  return nullptr;
}

bool known_section(const std::string& s) {
  for (const auto& k : keys()) {
    if (k.section == s) return true;
  }
  return false;
}

std::string at_line(int line, const std::string& msg) { return "config line " + std::to_string(line) + ": " + msg; }

}  // namespace

Config parse_config(const std::string& text, const std::string& base_dir) {
  Config c;
  const Context ctx{base_dir};
  std::map<std::string, int> seen;     // "section.key" -> line
  std::map<std::string, int> sections;  // first header line
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(at_line(lineno, "malformed section header '" + line + "'"));
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) throw ConfigError(at_line(lineno, "unknown section [" + section + "]"));
      sections.emplace(section, lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(at_line(lineno, "expected `key = value`, got '" + line + "'"));
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(at_line(lineno, "key '" + name + "' outside any section"));
    const Key* key = find_key(section, name);
    if (!key) throw ConfigError(at_line(lineno, "unknown key '" + name + "' in [" + section + "]"));
    const std::string path = section + "." + name;
    if (auto it = seen.find(path); it != seen.end()) {
      throw ConfigError(at_line(lineno, "duplicate key " + path + " (first set on line " +
                                            std::to_string(it->second) + ", again on line " +
                                            std::to_string(lineno) + ")"));
    }
    seen.emplace(path, lineno);
    if (value.empty()) throw ConfigError(at_line(lineno, "empty value for " + path));
    try {
      if (key->numeric) {
        key->numeric(c, parse_number(value));
      } else {
        key->text(c, value, ctx);
      }
    } catch (const ConfigError& e) {
      throw ConfigError(at_line(lineno, path + ": " + e.what()));
    }
  }

  for (const char* s : {"domain", "feedback", "run"}) {
    if (!sections.count(s)) throw ConfigError(std::string("config: missing required section [") + s + "]");
  }
  auto need = [&](const std::string& path) {
    if (!seen.count(path)) {
      const std::string sec = path.substr(0, path.find('.'));
      throw ConfigError(at_line(sections.at(sec), "missing required key " + path));
    }
  };
  for (const char* p : {"domain.nx", "domain.ny", "domain.nz", "feedback.gamma1", "feedback.gamma2"}) need(p);
  if (!seen.count("run.t_end") && !seen.count("run.steps")) {
    throw ConfigError(at_line(sections.at("run"), "missing required key run.t_end (or run.steps)"));
  }

  auto& law = c.scenario.law;
  if (law.kind == FeedbackKind::table) {
    if (c.table_file.empty()) throw ConfigError(at_line(sections.at("feedback"), "kind = table needs feedback.table"));
    law.table = read_table_file(c.table_file);
  }
  try {
    law.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(at_line(seen.count("feedback.gamma1") ? seen.at("feedback.gamma1") : sections.at("feedback"),
                              e.what()));
  }
  try {
    c.scenario.domain.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(at_line(sections.at("domain"), e.what()));
  }
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string echo_config(const Config& c) {
  const Scenario& s = c.scenario;
  std::ostringstream o;
  o << std::setprecision(17);
  auto vec = [&](const Vec3& v) {
    std::ostringstream t;
    t << std::setprecision(17) << v[0] << ' ' << v[1] << ' ' << v[2];
    return t.str();
  };
  auto boolean = [](bool b) { return b ? "true" : "false"; };

  o << "[domain]\n";
  o << "Lx = " << s.domain.lengths[0] << "\nLy = " << s.domain.lengths[1] << "\nLz = " << s.domain.lengths[2] << '\n';
  o << "nx = " << s.domain.cells[0] << "\nny = " << s.domain.cells[1] << "\nnz = " << s.domain.cells[2] << '\n';
  o << "x0 = " << vec(s.domain.x0) << "\n\n";

  o << "[materials]\n";
  for (const auto& [name, spec] : {std::pair<const char*, const TensorSpec*>{"eps", &s.eps}, {"mu", &s.mu}}) {
    o << name << "_preset = " << preset_name(spec->preset) << '\n';
    if (!spec->params.empty()) {
      o << name << "_params =";
      for (double p : spec->params) o << ' ' << p;
      o << '\n';
    }
    if (!spec->file.empty()) o << name << "_file = " << spec->file << '\n';
  }
  o << '\n';

  o << "[feedback]\n";
  o << "kind = " << kind_name(s.law.kind) << "\na = " << s.law.a << "\nb = " << s.law.b << '\n';
  o << "gamma1 = " << s.law.gamma1 << "\ngamma2 = " << s.law.gamma2 << "\ntau = " << s.law.tau << '\n';
  if (!c.table_file.empty()) o << "table = " << c.table_file << '\n';
  o << '\n';

  o << "[history]\nkind = " << history_name(s.history.kind) << "\nvalue = " << vec(s.history.value) << '\n';
  if (!s.history.file.empty()) o << "file = " << s.history.file << '\n';
  o << '\n';

  o << "[initial]\npreset = " << initial_name(s.initial.preset) << "\ncenter = " << vec(s.initial.center)
    << "\nwidth = " << s.initial.width << "\namplitude = " << s.initial.amplitude
    << "\npolarization = " << vec(s.initial.polarization) << "\nproject = " << boolean(s.initial.project) << '\n';
  if (!s.initial.file.empty()) o << "file = " << s.initial.file << '\n';
  o << '\n';

  o << "[run]\nt_end = " << s.run.t_end << '\n';
  if (s.run.steps >= 0) o << "steps = " << s.run.steps << '\n';
  o << "cfl_safety = " << s.run.cfl_safety << "\nrecord_every = " << s.run.record_every
    << "\nclosure = " << closure_name(s.closure) << "\nunsafe = " << boolean(s.unsafe)
    << "\nallow_unstable_cfl = " << boolean(s.allow_unstable_cfl) << "\n\n";

  o << "[analysis]\nweighting = " << weighting_name(s.weighting) << "\nxi = ";
  if (s.xi) {
    o << *s.xi;
  } else {
    o << "auto";
  }
  o << "\nslack_dissipation = " << c.slack_dissipation << "\nslack_observability = " << c.slack_observability << '\n';
  if (c.observability_T) o << "T = " << *c.observability_T << '\n';
  o << '\n';

  o << "[output]\ndir = " << c.output_dir << "\n\n";
  o << "[operator]\nM = " << c.lab.M << "\npairs = " << c.lab.pairs << "\nseed = " << c.lab.seed
    << "\nb = " << c.lab.b << '\n';
  return o.str();
}

void set_numeric(Config& c, const std::string& path, double value) {
  const auto dot = path.find('.');
  const Key* key = dot == std::string::npos ? nullptr : find_key(path.substr(0, dot), path.substr(dot + 1));
  if (!key || !key->numeric) throw ConfigError("sweep parameter '" + path + "' is not a numeric config key");
  if (!std::isfinite(value)) throw ConfigError("sweep value for " + path + " is not finite");
  key->numeric(c, value);
  if (key->section == "feedback") c.scenario.law.validate();
}

std::vector<std::string> numeric_paths() {
  std::vector<std::string> out;
  for (const auto& k : keys()) {
    if (k.numeric) out.push_back(k.section + "." + k.name);
  }
  return out;
}

}  // namespace maxfb
