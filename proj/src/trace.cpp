#include "maxfb/trace.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "maxfb/errors.hpp"

namespace maxfb {

void EnergyTrace::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    for (double v : {r.t, r.E_weighted, r.E_plain, r.E_xi, r.D, r.flux}) {
      if (!std::isfinite(v)) throw ContractError("energy trace: non-finite entry in row " + std::to_string(i));
    }
    if (r.E_weighted < 0.0 || r.E_plain < 0.0 || r.E_xi < 0.0 || r.D < 0.0) {
      throw ContractError("energy trace: negative energy or damping in row " + std::to_string(i));
    }
    if (i > 0 && !(r.t > rows[i - 1].t)) {
      throw ContractError("energy trace: t is not strictly increasing at row " + std::to_string(i));
    }
  }
}

void write_energy_csv(std::ostream& out, const EnergyTrace& trace) {
  const auto old = out.precision(17);
  out << "# xi = " << trace.xi << "\n# dt = " << trace.dt << "\n# N = " << trace.N << '\n';
  if (!trace.digest.empty()) out << "# digest = " << trace.digest << '\n';
  out << "t,E_weighted,E_plain,E_xi,D,flux\n";
  for (const auto& r : trace.rows) {
    out << r.t << ',' << r.E_weighted << ',' << r.E_plain << ',' << r.E_xi << ',' << r.D << ',' << r.flux << '\n';
  }
  out.precision(old);
}

EnergyTrace read_energy_csv(std::istream& in) {
  EnergyTrace trace;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t");
        const auto b = s.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      const std::string key = trim(body.substr(0, eq));
      const std::string value = trim(body.substr(eq + 1));
      try {
        if (key == "xi") trace.xi = std::stod(value);
        else if (key == "dt") trace.dt = std::stod(value);
        else if (key == "N") trace.N = std::stoi(value);
        else if (key == "digest") trace.digest = value;
      } catch (const std::exception&) {
        throw ConfigError("energy csv line " + std::to_string(lineno) + ": bad metadata value");
      }
      continue;
    }
    if (!header) {
      if (line != "t,E_weighted,E_plain,E_xi,D,flux") {
        throw ConfigError("energy csv: expected header t,E_weighted,E_plain,E_xi,D,flux");
      }
      header = true;
      continue;
    }
    EnergyRow r;
    double* fields[6] = {&r.t, &r.E_weighted, &r.E_plain, &r.E_xi, &r.D, &r.flux};
    std::stringstream ls(line);
    std::string cell;
    int count = 0;
    while (std::getline(ls, cell, ',')) {
      if (count >= 6) break;
      try {
        std::size_t used = 0;
        *fields[count] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError("energy csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      ++count;
    }
    if (count != 6 || std::getline(ls, cell, ',')) {
      throw ConfigError("energy csv line " + std::to_string(lineno) + ": expected 6 fields");
    }
    trace.rows.push_back(r);
  }
  if (!header) throw ConfigError("energy csv: missing header");
  return trace;
}

}  // namespace maxfb
