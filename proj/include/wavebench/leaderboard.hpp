#pragma once

// Ranking of benchmark runs by system fuel economy.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavebench/error.hpp"
#include "wavebench/kpi.hpp"

namespace wavebench {

/// One run to rank. Runs that failed carry `error` instead of a report.
struct RunOutcome {
  std::string label;
  std::optional<KpiReport> report;
  std::string error;
};

struct LeaderboardRow {
  std::size_t rank = 0;  ///< 1-based position in the table
  std::string label;
  std::optional<KpiReport> report;
  std::string error;
  bool eligible = false;
  std::string reason;  ///< why the run is ineligible
};

struct Leaderboard {
  std::optional<BaselineRef> baseline;
  std::vector<LeaderboardRow> rows;
};

/// x rounded to `digits` significant digits.
inline double round_significant(double x, int digits) {
  if (x == 0 || !std::isfinite(x)) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", digits - 1, x);
  return std::strtod(buf, nullptr);
}

/// Sorted by system mpg (4 significant digits) descending, then network speed
/// descending, then label. Flagged or collided runs stay in mpg order but are
/// marked ineligible; failed runs go last.
inline Leaderboard rank_runs(const std::vector<RunOutcome>& runs) {
  Leaderboard board;
  for (const auto& r : runs) {
    if (!r.report) continue;
    if (!board.baseline) {
      board.baseline = r.report->baseline;
    } else if (board.baseline != r.report->baseline) {
      throw ValidationError("leaderboard", "runs do not share a baseline");
    }
  }

  for (const auto& r : runs) {
    LeaderboardRow row;
    row.label = r.label;
    row.report = r.report;
    row.error = r.error;
    if (!r.report) {
      row.reason = "error";
    } else if (r.report->collision_count > 0) {
      row.reason = "collision";
    } else if (r.report->flags.inflow_degraded && r.report->flags.speed_degraded) {
      row.reason = "inflow_degraded,speed_degraded";
    } else if (r.report->flags.inflow_degraded) {
      row.reason = "inflow_degraded";
    } else if (r.report->flags.speed_degraded) {
      row.reason = "speed_degraded";
    }
    row.eligible = row.reason.empty();
    board.rows.push_back(std::move(row));
  }

  std::stable_sort(board.rows.begin(), board.rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (a.report.has_value() != b.report.has_value()) return a.report.has_value();
    if (a.report) {
      const double ma = round_significant(a.report->system_mpg, 4);
      const double mb = round_significant(b.report->system_mpg, 4);
      if (ma != mb) return ma > mb;
      if (a.report->mean_network_speed != b.report->mean_network_speed) {
        return a.report->mean_network_speed > b.report->mean_network_speed;
      }
    }
    return a.label < b.label;
  });
  for (std::size_t i = 0; i < board.rows.size(); ++i) board.rows[i].rank = i + 1;
  return board;
}

inline void write_leaderboard_text(std::ostream& os, const Leaderboard& board) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-4s  %-32s  %10s  %10s  %12s  %4s  %-8s  %s\n", "rank", "label", "mpg",
                "speed_m_s", "inflow_veh_h", "coll", "eligible", "note");
  os << buf;
  for (const auto& r : board.rows) {
    if (r.report) {
      std::snprintf(buf, sizeof buf, "%-4zu  %-32s  %10.4g  %10.4f  %12.1f  %4zu  %-8s  %s\n", r.rank,
                    r.label.c_str(), r.report->system_mpg, r.report->mean_network_speed,
                    r.report->realized_inflow, r.report->collision_count, r.eligible ? "yes" : "no",
                    r.reason.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-4zu  %-32s  %10s  %10s  %12s  %4s  %-8s  error: %s\n", r.rank,
                    r.label.c_str(), "-", "-", "-", "-", "no", r.error.c_str());
    }
    os << buf;
  }
}

inline nlohmann::json to_json(const Leaderboard& board) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : board.rows) {
    nlohmann::json j;
    j["rank"] = r.rank;
    j["label"] = r.label;
    j["eligible"] = r.eligible;
    j["reason"] = r.reason;
    if (r.report) {
      j["kpi"] = to_json(*r.report);
    } else {
      j["kpi"] = nullptr;
      j["error"] = r.error;
    }
    rows.push_back(std::move(j));
  }
  nlohmann::json out;
  if (board.baseline) {
    out["baseline"] = {{"mean_network_speed_m_s", board.baseline->mean_network_speed},
                       {"realized_inflow_veh_hr", board.baseline->realized_inflow}};
  } else {
    out["baseline"] = nullptr;
  }
  out["rows"] = std::move(rows);
  return out;
}

}  // namespace wavebench
