#include "maxfb/delay_line.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "maxfb/errors.hpp"
#include "maxfb/feedback.hpp"

namespace maxfb {

const char* history_name(HistoryKind k) {
  switch (k) {
    case HistoryKind::zero: return "zero";
    case HistoryKind::constant: return "constant";
    case HistoryKind::tangent: return "tangent";
    case HistoryKind::replay: return "replay";
    case HistoryKind::file: return "file";
  }
  return "?";
}

HistoryKind parse_history(const std::string& name) {
  for (auto k : {HistoryKind::zero, HistoryKind::constant, HistoryKind::tangent, HistoryKind::replay,
                 HistoryKind::file}) {
    if (name == history_name(k)) return k;
  }
  throw ConfigError("unknown history kind '" + name + "'");
}

DelayRing::DelayRing(std::vector<Vec3> normals, int depth, double dt)
    : normals_(std::move(normals)), depth_(depth), dt_(dt) {
  if (depth_ < 1) throw ConfigError("delay ring: depth N must be at least 1");
  if (!(dt_ > 0.0)) throw ConfigError("delay ring: dt must be positive");
  data_.assign(normals_.size() * static_cast<std::size_t>(depth_ + 1), Vec3::Zero());
}

void DelayRing::advance(const std::vector<Vec3>& traces) {
  if (static_cast<int>(traces.size()) != sample_count()) {
    throw ContractError("delay ring: trace count does not match the boundary");
  }
  for (int s = 0; s < sample_count(); ++s) require_tangential(traces[s], normals_[s], "pushed trace");
  // Slot N of the old state is dropped; its storage becomes the new slot 0.
  cursor_ = (cursor_ + depth_) % (depth_ + 1);
  for (int s = 0; s < sample_count(); ++s) slot(s, 0) = traces[s];
}

double DelayRing::s_quadrature(int sample) const {
  double sum = 0.5 * (slot(sample, 0).squaredNorm() + slot(sample, depth_).squaredNorm());
  for (int j = 1; j < depth_; ++j) sum += slot(sample, j).squaredNorm();
  return sum / depth_;
}

DelayRing init_history(const HistorySpec& spec, int depth, double dt, const YeeGrid& grid,
                       const std::vector<Vec3>& initial_trace) {
  std::vector<Vec3> normals;
  normals.reserve(grid.sample_count());
  for (const auto& s : grid.samples()) normals.push_back(s.normal);
  DelayRing ring(normals, depth, dt);

  auto fill = [&](auto value_at) {
    for (int s = 0; s < ring.sample_count(); ++s) {
      const Vec3 v = value_at(s);
      for (int j = 0; j <= depth; ++j) ring.slot(s, j) = v;
    }
  };
  switch (spec.kind) {
    case HistoryKind::zero:
      break;
    case HistoryKind::constant:
      for (int s = 0; s < ring.sample_count(); ++s) {
        if (std::abs(spec.value.dot(normals[s])) > kTangentialTol * std::max(1.0, spec.value.norm())) {
          std::ostringstream os;
          os << "history: constant value is not tangential on the face with normal (" << normals[s].transpose()
             << ")";
          throw ContractError(os.str());
        }
      }
      fill([&](int) { return spec.value; });
      break;
    case HistoryKind::tangent:
      fill([&](int s) { return Vec3(spec.value.cross(normals[s])); });
      break;
    case HistoryKind::replay:
      if (static_cast<int>(initial_trace.size()) != ring.sample_count()) {
        throw ContractError("history: replay needs the initial trace at every sample");
      }
      for (int s = 0; s < ring.sample_count(); ++s) require_tangential(initial_trace[s], normals[s], "initial trace");
      fill([&](int s) { return initial_trace[s]; });
      break;
    case HistoryKind::file: {
      std::ifstream f(spec.file);
      if (!f) throw ConfigError("cannot open history file '" + spec.file + "'");
      load_history_csv(f, ring);
      break;
    }
  }
  return ring;
}

void load_history_csv(std::istream& in, DelayRing& ring) {
  const int per = ring.depth() + 1;
  std::vector<char> seen(static_cast<std::size_t>(ring.sample_count()) * per, 0);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.find("step") != std::string::npos) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream ls(line);
    double step, sid, sj;
    Vec3 v;
    if (!(ls >> step >> sid >> sj >> v[0] >> v[1] >> v[2]) || !v.allFinite()) {
      throw ConfigError("history file line " + std::to_string(lineno) + ": expected step,sample_id,s_index,vx,vy,vz");
    }
    const int s = static_cast<int>(sid), j = static_cast<int>(sj);
    if (s != sid || j != sj || s < 0 || s >= ring.sample_count() || j < 0 || j > ring.depth()) {
      throw ConfigError("history file line " + std::to_string(lineno) + ": sample or slot index out of range");
    }
    require_tangential(v, ring.normal(s), "history value");
    ring.slot(s, j) = v;
    seen[static_cast<std::size_t>(s) * per + j] = 1;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw ConfigError("history file: missing sample " + std::to_string(i / per) + " slot " +
                        std::to_string(i % per));
    }
  }
}

void write_trace_csv(std::ostream& out, long step, const DelayRing& ring, bool header) {
  const auto old = out.precision(17);
  if (header) out << "step,sample_id,s_index,vx,vy,vz\n";
  for (int s = 0; s < ring.sample_count(); ++s) {
    for (int j = 0; j <= ring.depth(); ++j) {
      const Vec3& v = ring.slot(s, j);
      out << step << ',' << s << ',' << j << ',' << v[0] << ',' << v[1] << ',' << v[2] << '\n';
    }
  }
  out.precision(old);
}

TransportResidual transport_residual(const DelayRing& before, const DelayRing& after) {
  if (before.sample_count() != after.sample_count() || before.depth() != after.depth()) {
    throw ContractError("transport residual: snapshots have different shapes");
  }
  const int N = before.depth();
  const double rate = before.tau() / before.dt();
  TransportResidual r;
  for (int s = 0; s < before.sample_count(); ++s) {
    for (int j = 1; j <= N; ++j) {
      const Vec3 res = rate * (after.slot(s, j) - before.slot(s, j)) + N * (before.slot(s, j) - before.slot(s, j - 1));
      const double m = res.cwiseAbs().maxCoeff();
      if (m > r.max || r.sample < 0) {
        r.max = m;
        r.sample = s;
        r.slot = j;
      }
    }
  }
  return r;
}

TransportResidual transport_residual(const std::vector<DelayRing>& snapshots) {
  if (snapshots.size() < 2) throw ContractError("transport residual: need at least two snapshots");
  TransportResidual worst;
  for (std::size_t i = 0; i + 1 < snapshots.size(); ++i) {
    const auto r = transport_residual(snapshots[i], snapshots[i + 1]);
    if (r.max > worst.max || worst.sample < 0) worst = r;
  }
  return worst;
}

}  // namespace maxfb
