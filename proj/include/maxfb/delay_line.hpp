#pragma once

/// @file delay_line.hpp
/// @brief Boundary history Z(t, s) stored as a shift register of tangential traces per sample.

#include <iosfwd>
#include <string>
#include <vector>

#include "maxfb/domain.hpp"

namespace maxfb {

enum class HistoryKind {
  zero,
  constant,  // the same vector everywhere; must be tangential on every face
  tangent,   // value x nu, tangential by construction
  replay,    // every slot holds the initial trace E0 x nu
  file,
};

const char* history_name(HistoryKind k);
HistoryKind parse_history(const std::string& name);

struct HistorySpec {
  HistoryKind kind = HistoryKind::zero;
  Vec3 value = Vec3::Zero();
  std::string file;
};

/// N + 1 slots per sample, slot j standing for s_j = j / N, so slot N lags slot 0 by tau = N dt.
/// Slots are addressed through a rotating cursor; advance() costs one write per sample.
class DelayRing {
 public:
  DelayRing() = default;
  DelayRing(std::vector<Vec3> normals, int depth, double dt);

  int depth() const { return depth_; }
  int sample_count() const { return static_cast<int>(normals_.size()); }
  double dt() const { return dt_; }
  double tau() const { return depth_ * dt_; }
  const Vec3& normal(int sample) const { return normals_[sample]; }

  const Vec3& slot(int sample, int j) const { return data_[index(sample, j)]; }
  Vec3& slot(int sample, int j) { return data_[index(sample, j)]; }

  const Vec3& z0(int sample) const { return slot(sample, 0); }
  const Vec3& z1(int sample) const { return slot(sample, depth_); }

  /// Shifts every history by one slot and stores the new traces in slot 0.
  /// Throws ContractError if a trace is not tangential.
  void advance(const std::vector<Vec3>& traces);

  /// Trapezoid rule over the slots of one sample for the integral of |Z(s)|^2 over [0, 1].
  double s_quadrature(int sample) const;

 private:
  int index(int sample, int j) const { return sample * (depth_ + 1) + (cursor_ + j) % (depth_ + 1); }

  std::vector<Vec3> normals_;
  int depth_ = 0;
  double dt_ = 0.0;
  int cursor_ = 0;
  std::vector<Vec3> data_;
};

/// Builds the ring and fills every slot with the history. `initial_trace` is used by replay.
DelayRing init_history(const HistorySpec& spec, int depth, double dt, const YeeGrid& grid,
                       const std::vector<Vec3>& initial_trace = {});

/// Rows `step,sample_id,s_index,vx,vy,vz`; a header line is allowed. Every (sample, slot)
/// pair must appear; the step column is ignored.
void load_history_csv(std::istream& in, DelayRing& ring);
void write_trace_csv(std::ostream& out, long step, const DelayRing& ring, bool header);

struct TransportResidual {
  double max = 0.0;
  int sample = -1;
  int slot = -1;
};

/// Residual of tau (Z^{n+1}_j - Z^n_j)/dt + N (Z^n_j - Z^n_{j-1}) for j = 1..N between two
/// consecutive snapshots.
TransportResidual transport_residual(const DelayRing& before, const DelayRing& after);
/// Maximum over consecutive pairs of a snapshot sequence (at least two snapshots).
TransportResidual transport_residual(const std::vector<DelayRing>& snapshots);

}  // namespace maxfb
