#pragma once

// Run-level KPIs from a trajectory log: system fuel economy, network speed,
// realized inflow, and degradation flags relative to a baseline run.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavebench/energy.hpp"
#include "wavebench/error.hpp"
#include "wavebench/sim.hpp"
#include "wavebench/trajectory_io.hpp"

namespace wavebench {

inline constexpr double kDefaultDegradationThreshold = 0.10;

struct KpiFlags {
  bool inflow_degraded = false;
  bool speed_degraded = false;

  bool any() const noexcept { return inflow_degraded || speed_degraded; }
  bool operator==(const KpiFlags&) const = default;
};

/// Baseline values the flags were computed against.
struct BaselineRef {
  double mean_network_speed = 0.0;
  double realized_inflow = 0.0;
  bool operator==(const BaselineRef&) const = default;
};

struct KpiReport {
  double system_mpg = kMpgInfinite;
  double mean_network_speed = 0.0;  ///< [m/s]
  double realized_inflow = 0.0;     ///< [veh/hr]
  std::size_t collision_count = 0;
  KpiFlags flags;
  std::map<std::string, FuelTotals> per_class;
  double total_gallons = 0.0;
  double total_miles = 0.0;
  std::size_t vehicles = 0;  ///< distinct vehicles seen on the segment during measurement
  std::optional<BaselineRef> baseline;
  double threshold = kDefaultDegradationThreshold;
  LogMeta window;
};

struct KpiOptions {
  double threshold = kDefaultDegradationThreshold;
  std::size_t collision_count = 0;
};

/// True when `run` is more than `threshold` (relative) below `base`.
inline bool degraded(double run, double base, double threshold) {
  if (!(base > 0)) return false;
  return (base - run) / base > threshold;
}

inline KpiFlags compute_flags(double speed, double inflow, const BaselineRef& base, double threshold) {
  return {degraded(inflow, base.realized_inflow, threshold),
          degraded(speed, base.mean_network_speed, threshold)};
}

inline BaselineRef baseline_of(const KpiReport& r) { return {r.mean_network_speed, r.realized_inflow}; }

namespace detail {

inline bool in_segment(const TrajectoryLog& log, double x) {
  return x >= log.segment_start && x < log.segment_end;
}

/// Whether moving from `from` to `to` over one step passes the point `mark`.
inline bool crosses(const TrajectoryLog& log, double from, double to, double mark) {
  if (!log.periodic) return from < mark && to >= mark;
  const double L = log.domain_length;
  double travel = to - from;
  if (travel < 0) travel += L;
  double ahead = mark - from;
  if (ahead <= 0) ahead += L;
  return travel >= ahead;
}

}  // namespace detail

inline KpiReport compute_kpis(const TrajectoryLog& log, const VehiclePortfolio& portfolio,
                              const std::optional<KpiReport>& baseline = std::nullopt,
                              const KpiOptions& options = {}) {
  detail::require(options.threshold >= 0, "threshold", "must be >= 0");
  KpiReport out;
  out.threshold = options.threshold;
  out.collision_count = options.collision_count;
  out.window = meta_of(log);

  std::vector<VehicleTrajectory> trajectories;
  std::unordered_map<std::uint64_t, std::size_t> open;  // vehicle -> index of its current run
  std::unordered_map<std::uint64_t, double> last_pos;
  std::unordered_map<std::uint64_t, bool> seen;
  double speed_sum = 0.0;
  std::size_t samples = 0;
  std::size_t crossings = 0;
  bool any_measure = false;

  for (const auto& r : log.records) {
    const auto prev = last_pos.find(r.id);
    const bool crossed =
        prev != last_pos.end() && detail::crosses(log, prev->second, r.position, log.segment_start);
    last_pos[r.id] = r.position;
    if (r.phase != Phase::Measure) continue;
    any_measure = true;
    if (crossed) ++crossings;
    if (!detail::in_segment(log, r.position)) continue;

    speed_sum += r.speed;
    ++samples;
    seen[r.id] = true;

    const TrajectorySample s{r.t, r.speed, r.accel_cmd};
    auto it = open.find(r.id);
    const bool contiguous =
        it != open.end() &&
        std::abs(r.t - trajectories[it->second].samples.back().t - log.dt) <= 1e-9 * std::max(1.0, log.dt);
    if (!contiguous) {
      trajectories.push_back({log.class_names.at(r.energy_class), {}});
      open[r.id] = trajectories.size() - 1;
      it = open.find(r.id);
    }
    trajectories[it->second].samples.push_back(s);
  }
  if (!any_measure) throw ValidationError("log", "no measurement-phase records");
  if (samples == 0) throw ValidationError("log", "no measurement-phase records on the metrics segment");

  const FleetFuel fuel = fleet_fuel(portfolio, trajectories, log.dt);
  out.system_mpg = fuel.total.mpg;
  out.total_gallons = fuel.total.gallons;
  out.total_miles = fuel.total.miles;
  out.per_class = fuel.per_class;
  out.vehicles = seen.size();
  out.mean_network_speed = speed_sum / static_cast<double>(samples);
  out.realized_inflow = log.horizon > 0 ? crossings * 3600.0 / log.horizon : 0.0;

  if (baseline) {
    out.baseline = baseline_of(*baseline);
    out.flags = compute_flags(out.mean_network_speed, out.realized_inflow, *out.baseline, options.threshold);
  }
  return out;
}

/// KPIs of a full run, including its collision count.
inline KpiReport compute_kpis(const RunResult& run, const VehiclePortfolio& portfolio,
                              const std::optional<KpiReport>& baseline = std::nullopt,
                              double threshold = kDefaultDegradationThreshold) {
  return compute_kpis(run.log, portfolio, baseline, {threshold, run.collisions.size()});
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

// JSON has no infinity; an infinite mpg (no fuel burned) is written as null.
inline nlohmann::json finite_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline double finite_or_inf(const nlohmann::json& j) {
  return j.is_null() ? kMpgInfinite : j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const KpiReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [name, f] : r.per_class) {
    per_class[name] = {{"gallons", f.gallons}, {"miles", f.miles}, {"mpg", detail::finite_or_null(f.mpg)}};
  }
  nlohmann::json j;
  j["system_mpg"] = detail::finite_or_null(r.system_mpg);
  j["mean_network_speed_m_s"] = r.mean_network_speed;
  j["realized_inflow_veh_hr"] = r.realized_inflow;
  j["collision_count"] = r.collision_count;
  j["flags"] = {{"inflow_degraded", r.flags.inflow_degraded}, {"speed_degraded", r.flags.speed_degraded}};
  j["per_class"] = per_class;
  j["total_gallons"] = r.total_gallons;
  j["total_miles"] = r.total_miles;
  j["vehicles"] = r.vehicles;
  j["threshold"] = r.threshold;
  if (r.baseline) {
    j["baseline"] = {{"mean_network_speed_m_s", r.baseline->mean_network_speed},
                     {"realized_inflow_veh_hr", r.baseline->realized_inflow}};
  } else {
    j["baseline"] = nullptr;
  }
  j["window"] = {{"dt", r.window.dt},
                 {"warmup", r.window.warmup},
                 {"horizon", r.window.horizon},
                 {"periodic", r.window.periodic},
                 {"domain_length", r.window.domain_length},
                 {"segment_start", r.window.segment_start},
                 {"segment_end", r.window.segment_end}};
  return j;
}

inline KpiReport kpi_report_from_json(const nlohmann::json& j) {
  try {
    KpiReport r;
    r.system_mpg = detail::finite_or_inf(j.at("system_mpg"));
    r.mean_network_speed = j.at("mean_network_speed_m_s").get<double>();
    r.realized_inflow = j.at("realized_inflow_veh_hr").get<double>();
    r.collision_count = j.at("collision_count").get<std::size_t>();
    r.flags.inflow_degraded = j.at("flags").at("inflow_degraded").get<bool>();
    r.flags.speed_degraded = j.at("flags").at("speed_degraded").get<bool>();
    for (const auto& [name, f] : j.at("per_class").items()) {
      FuelTotals t;
      t.gallons = f.at("gallons").get<double>();
      t.miles = f.at("miles").get<double>();
      t.mpg = detail::finite_or_inf(f.at("mpg"));
      r.per_class[name] = t;
    }
    r.total_gallons = j.at("total_gallons").get<double>();
    r.total_miles = j.at("total_miles").get<double>();
    r.vehicles = j.at("vehicles").get<std::size_t>();
    r.threshold = j.at("threshold").get<double>();
    if (!j.at("baseline").is_null()) {
      r.baseline = BaselineRef{j["baseline"].at("mean_network_speed_m_s").get<double>(),
                               j["baseline"].at("realized_inflow_veh_hr").get<double>()};
    }
    const auto& w = j.at("window");
    r.window = {w.at("dt").get<double>(),          w.at("warmup").get<double>(),
                w.at("horizon").get<double>(),     w.at("periodic").get<bool>(),
                w.at("domain_length").get<double>(), w.at("segment_start").get<double>(),
                w.at("segment_end").get<double>()};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("kpi", e.what());
  }
}

}  // namespace wavebench
