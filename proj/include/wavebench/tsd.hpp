#pragma once

// Time-space diagrams: binned mean-speed field over the measurement window
// and metrics segment, raw trajectory polylines, and a wave propagation
// speed estimate.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavebench/error.hpp"
#include "wavebench/format.hpp"
#include "wavebench/sim.hpp"

namespace wavebench {

struct TsdCell {
  double sum = 0.0;
  std::size_t count = 0;

  bool empty() const noexcept { return count == 0; }
  double mean() const noexcept {
    return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  }
};

struct PolylinePoint {
  double t = 0.0;
  double x = 0.0;
  double v = 0.0;
};

struct Polyline {
  std::uint64_t vehicle = 0;
  std::vector<PolylinePoint> points;
};

struct TimeSpaceDiagram {
  double time_bin = 0.0;
  double space_bin = 0.0;
  double t0 = 0.0;  ///< measurement window [t0, t1)
  double t1 = 0.0;
  double x0 = 0.0;  ///< metrics segment [x0, x1)
  double x1 = 0.0;
  bool periodic = false;  ///< space wraps (ring covering the whole segment)
  std::size_t n_time = 0;
  std::size_t n_space = 0;
  std::vector<TsdCell> cells;  ///< row-major, time bins outer
  std::vector<Polyline> polylines;

  const TsdCell& cell(std::size_t it, std::size_t ix) const { return cells.at(it * n_space + ix); }
  TsdCell& cell(std::size_t it, std::size_t ix) { return cells.at(it * n_space + ix); }
};

inline TimeSpaceDiagram export_tsd(const TrajectoryLog& log, double time_bin, double space_bin) {
  detail::require(time_bin > 0, "time_bin", "must be > 0");
  detail::require(space_bin > 0, "space_bin", "must be > 0");
  TimeSpaceDiagram d;
  d.time_bin = time_bin;
  d.space_bin = space_bin;
  d.t0 = log.warmup;
  d.t1 = log.warmup + log.horizon;
  d.x0 = log.segment_start;
  d.x1 = log.segment_end;
  d.periodic = log.periodic && log.segment_start == 0.0 && log.segment_end == log.domain_length;
  d.n_time = static_cast<std::size_t>(std::ceil((d.t1 - d.t0) / time_bin - 1e-9));
  d.n_space = static_cast<std::size_t>(std::ceil((d.x1 - d.x0) / space_bin - 1e-9));
  d.cells.assign(d.n_time * d.n_space, {});

  std::map<std::uint64_t, std::size_t> line_of;
  std::map<std::uint64_t, double> last_x;
  for (const auto& r : log.records) {
    if (r.t < d.t0 || r.t >= d.t1) continue;
    if (r.position < d.x0 || r.position >= d.x1) continue;
    const auto it = std::min(d.n_time - 1, static_cast<std::size_t>((r.t - d.t0) / time_bin));
    const auto ix = std::min(d.n_space - 1, static_cast<std::size_t>((r.position - d.x0) / space_bin));
    auto& c = d.cell(it, ix);
    c.sum += r.speed;
    ++c.count;

    // A new polyline starts on first sight, after a wrap, or after leaving the segment.
    auto found = line_of.find(r.id);
    const bool restart = found == line_of.end() || r.position < last_x[r.id] ||
                         r.t - d.polylines[found->second].points.back().t > log.dt * 1.5;
    if (restart) {
      d.polylines.push_back({r.id, {}});
      line_of[r.id] = d.polylines.size() - 1;
      found = line_of.find(r.id);
    }
    d.polylines[found->second].points.push_back({r.t, r.position, r.speed});
    last_x[r.id] = r.position;
  }
  return d;
}

inline void write_tsd_csv(std::ostream& os, const TimeSpaceDiagram& d) {
  os << "t_bin,x_bin,mean_speed,count\n";
  std::string line;
  for (std::size_t it = 0; it < d.n_time; ++it) {
    for (std::size_t ix = 0; ix < d.n_space; ++ix) {
      const auto& c = d.cell(it, ix);
      line.clear();
      append_sig6(line, d.t0 + it * d.time_bin);
      line += ',';
      append_sig6(line, d.x0 + ix * d.space_bin);
      line += ',';
      if (!c.empty()) append_sig6(line, c.mean());  // empty cells leave the field blank
      line += ',';
      line += std::to_string(c.count);
      line += '\n';
      os << line;
    }
  }
}

inline nlohmann::json tsd_metadata(const TimeSpaceDiagram& d) {
  return {{"time_bin_s", d.time_bin}, {"space_bin_m", d.space_bin},
          {"window_s", {d.t0, d.t1}}, {"segment_m", {d.x0, d.x1}},
          {"n_time", d.n_time},       {"n_space", d.n_space},
          {"periodic", d.periodic},   {"polylines", d.polylines.size()},
          {"csv_columns", {"t_bin", "x_bin", "mean_speed", "count"}}};
}

/// Polylines as CSV rows: vehicle, polyline index, t, x, v.
inline void write_polylines_csv(std::ostream& os, const TimeSpaceDiagram& d) {
  os << "veh_id,line,t,pos_m,speed_m_s\n";
  std::string line;
  for (std::size_t k = 0; k < d.polylines.size(); ++k) {
    for (const auto& p : d.polylines[k].points) {
      line.clear();
      line += std::to_string(d.polylines[k].vehicle);
      line += ',';
      line += std::to_string(k);
      for (double x : {p.t, p.x, p.v}) {
        line += ',';
        append_sig6(line, x);
      }
      line += '\n';
      os << line;
    }
  }
}

struct WaveSpeedOptions {
  double max_speed = 30.0;  ///< bound on |propagation speed| searched [m/s]
};

/// Propagation speed of the speed pattern, from the cross-correlation of
/// speed anomalies in successive time bins. Negative means upstream.
inline double wave_speed_estimate(const TimeSpaceDiagram& d, const WaveSpeedOptions& opt = {}) {
  if (d.n_time < 10) throw ValidationError("tsd.n_time", "wave_speed_estimate needs >= 10 time bins");
  detail::require(opt.max_speed > 0, "max_speed", "must be > 0");

  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& c : d.cells) {
    if (c.empty()) continue;
    sum += c.mean();
    sq += c.mean() * c.mean();
    ++n;
  }
  if (n < 2) throw InsufficientStructureError("wave_speed_estimate: field is empty");
  const double mean = sum / n;
  const double var = std::max(0.0, sq / n - mean * mean);
  if (var <= 1e-12 * std::max(1.0, mean * mean)) {
    throw InsufficientStructureError("wave_speed_estimate: field has no variance");
  }

  const int nx = static_cast<int>(d.n_space);
  int max_shift = static_cast<int>(std::floor(opt.max_speed * d.time_bin / d.space_bin));
  max_shift = std::min(max_shift, d.periodic ? nx / 2 : nx - 1);
  max_shift = std::max(max_shift, 1);

  auto anomaly = [&](std::size_t it, int ix, double& out) {
    if (d.periodic) ix = ((ix % nx) + nx) % nx;
    if (ix < 0 || ix >= nx) return false;
    const auto& c = d.cell(it, static_cast<std::size_t>(ix));
    if (c.empty()) return false;
    out = c.mean() - mean;
    return true;
  };

  // corr[s]: mean product of anomaly(t, x) and anomaly(t + 1, x + s).
  const int width = 2 * max_shift + 1;
  std::vector<double> corr(width, 0.0);
  for (int s = -max_shift; s <= max_shift; ++s) {
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t it = 0; it + 1 < d.n_time; ++it) {
      for (int ix = 0; ix < nx; ++ix) {
        double a = 0, b = 0;
        if (!anomaly(it, ix, a) || !anomaly(it + 1, ix + s, b)) continue;
        acc += a * b;
        ++pairs;
      }
    }
    corr[s + max_shift] = pairs ? acc / static_cast<double>(pairs) : -std::numeric_limits<double>::infinity();
  }

  const auto best = static_cast<int>(std::max_element(corr.begin(), corr.end()) - corr.begin());
  if (!std::isfinite(corr[best])) throw InsufficientStructureError("wave_speed_estimate: no overlapping cells");
  double shift = best - max_shift;
  if (best > 0 && best + 1 < width && std::isfinite(corr[best - 1]) && std::isfinite(corr[best + 1])) {
    const double l = corr[best - 1], c = corr[best], r = corr[best + 1];
    const double denom = l - 2.0 * c + r;
    if (denom < 0) shift += std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
  }
  return shift * d.space_bin / d.time_bin;
}

}  // namespace wavebench
