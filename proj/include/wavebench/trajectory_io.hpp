#pragma once

// Trajectory log CSV (floats at six significant digits) and its reader.

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wavebench/error.hpp"
#include "wavebench/format.hpp"
#include "wavebench/sim.hpp"

namespace wavebench {

inline constexpr const char* kTrajectoryCsvHeader =
    "t,veh_id,class,pos_m,speed_m_s,accel_cmd_m_s2,accel_real_m_s2,gap_m,leader_id,phase";

inline void write_trajectory_csv(std::ostream& os, const TrajectoryLog& log) {
  os << kTrajectoryCsvHeader << '\n';
  std::string line;
  for (const auto& r : log.records) {
    line.clear();
    append_sig6(line, r.t);
    line += ',';
    line += std::to_string(r.id);
    line += ',';
    line += log.class_label(r);
    for (double x : {r.position, r.speed, r.accel_cmd, r.accel_real}) {
      line += ',';
      append_sig6(line, x);
    }
    line += ',';
    if (r.leader_id != kNoLeader) {
      append_sig6(line, r.gap);
      line += ',';
      line += std::to_string(r.leader_id);
    } else {
      line += ',';
    }
    line += ',';
    line += to_string(r.phase);
    line += '\n';
    os << line;
  }
}

/// Rounds every float of the log to what the CSV stores. KPIs computed on the
/// quantized log are exactly reproducible from the CSV artifact.
inline TrajectoryLog quantized(TrajectoryLog log) {
  for (auto& r : log.records) {
    r.t = quantize_sig6(r.t);
    r.position = quantize_sig6(r.position);
    r.speed = quantize_sig6(r.speed);
    r.accel_cmd = quantize_sig6(r.accel_cmd);
    r.accel_real = quantize_sig6(r.accel_real);
    if (r.leader_id != kNoLeader) r.gap = quantize_sig6(r.gap);
  }
  return log;
}

/// Run metadata that the CSV itself does not carry.
struct LogMeta {
  double dt = 0.4;
  double warmup = 0.0;
  double horizon = 0.0;
  bool periodic = false;
  double domain_length = 0.0;
  double segment_start = 0.0;
  double segment_end = 0.0;
};

inline LogMeta meta_of(const TrajectoryLog& log) {
  return {log.dt, log.warmup, log.horizon, log.periodic, log.domain_length, log.segment_start,
          log.segment_end};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline TrajectoryLog read_trajectory_csv(std::istream& is, const LogMeta& meta) {
  TrajectoryLog log;
  log.dt = meta.dt;
  log.warmup = meta.warmup;
  log.horizon = meta.horizon;
  log.periodic = meta.periodic;
  log.domain_length = meta.domain_length;
  log.segment_start = meta.segment_start;
  log.segment_end = meta.segment_end;

  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || line != kTrajectoryCsvHeader) {
    throw CsvParseError(lineno, "expected header '" + std::string(kTrajectoryCsvHeader) + "'");
  }
  auto num = [&](const std::string& s, const char* what) {
    double x = 0;
    if (!parse_double(s, x)) throw CsvParseError(lineno, std::string("bad ") + what + " '" + s + "'");
    return x;
  };
  auto integer = [&](const std::string& s, const char* what) -> long long {
    try {
      std::size_t used = 0;
      const long long x = std::stoll(s, &used);
      if (used == s.size()) return x;
    } catch (const std::exception&) {
    }
    throw CsvParseError(lineno, std::string("bad ") + what + " '" + s + "'");
  };

  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 10) throw CsvParseError(lineno, "expected 10 fields");
    LogRecord r;
    r.t = num(f[0], "t");
    const long long id = integer(f[1], "veh_id");
    if (id < 0) throw CsvParseError(lineno, "veh_id must be >= 0");
    r.id = static_cast<std::uint64_t>(id);

    const auto colon = f[2].find(':');
    if (colon == std::string::npos) throw CsvParseError(lineno, "class must be role:name");
    const std::string role = f[2].substr(0, colon);
    if (role == "human") {
      r.role = VehicleRole::Human;
    } else if (role == "cav") {
      r.role = VehicleRole::Cav;
    } else {
      throw CsvParseError(lineno, "unknown role '" + role + "'");
    }
    const std::string name = f[2].substr(colon + 1);
    auto it = std::find(log.class_names.begin(), log.class_names.end(), name);
    if (it == log.class_names.end()) it = log.class_names.insert(log.class_names.end(), name);
    r.energy_class = static_cast<std::uint16_t>(it - log.class_names.begin());

    r.position = num(f[3], "pos_m");
    r.speed = num(f[4], "speed_m_s");
    r.accel_cmd = num(f[5], "accel_cmd_m_s2");
    r.accel_real = num(f[6], "accel_real_m_s2");
    if (!f[8].empty()) {
      r.gap = num(f[7], "gap_m");
      r.leader_id = integer(f[8], "leader_id");
    }
    if (f[9] == "warmup") {
      r.phase = Phase::Warmup;
    } else if (f[9] == "measure") {
      r.phase = Phase::Measure;
    } else {
      throw CsvParseError(lineno, "unknown phase '" + f[9] + "'");
    }
    log.records.push_back(r);
  }
  return log;
}

}  // namespace wavebench
