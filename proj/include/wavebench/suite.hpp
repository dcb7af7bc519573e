#pragma once

// Benchmark suites: a scenario template, sweep axes over controller
// parameters and penetration, and a shared uncontrolled baseline.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavebench/kpi.hpp"
#include "wavebench/leaderboard.hpp"
#include "wavebench/scenario.hpp"
#include "wavebench/sim.hpp"

namespace wavebench {

enum class ControllerKind { FollowerStopper, IdmRelaxation };

struct BenchmarkSuite {
  ScenarioConfig scenario;  ///< template; penetration and controller are set per run
  std::vector<ControllerKind> controllers{ControllerKind::FollowerStopper, ControllerKind::IdmRelaxation};
  std::vector<double> v_desired;
  std::vector<double> gamma{0.5};
  std::vector<double> penetration{0.1};
  bool include_baseline_speed = false;  ///< add the baseline network speed to v_desired
  double threshold = kDefaultDegradationThreshold;
};

inline void validate(const BenchmarkSuite& s) {
  validate(s.scenario);
  detail::require(!s.controllers.empty(), "controllers", "must be non-empty");
  detail::require(!s.v_desired.empty() || s.include_baseline_speed, "v_desired", "must be non-empty");
  detail::require(!s.gamma.empty(), "gamma", "must be non-empty");
  detail::require(!s.penetration.empty(), "penetration", "must be non-empty");
  for (double v : s.v_desired) detail::require(v > 0, "v_desired", "entries must be > 0");
  for (double g : s.gamma) detail::require(g > 0, "gamma", "entries must be > 0");
  for (double p : s.penetration) detail::require(p > 0 && p <= 1, "penetration", "entries must be in (0, 1]");
  detail::require(s.threshold >= 0, "threshold", "must be >= 0");
}

inline BenchmarkSuite suite_from_json(const nlohmann::json& j) {
  detail::JsonReader r(j, "");
  BenchmarkSuite s;
  if (!r.has("scenario")) throw ValidationError("scenario", "missing");
  if (!r.has("seed")) throw ValidationError("seed", "suites must set a seed");
  nlohmann::json scenario = r.child("scenario");
  if (scenario.contains("seed")) throw ValidationError("scenario.seed", "set the seed at the suite level");
  if (scenario.contains("controller") || scenario.contains("penetration")) {
    throw ValidationError("scenario", "controller and penetration come from the sweep axes");
  }
  scenario["seed"] = r.uint("seed");
  try {
    s.scenario = scenario_from_json(scenario);
  } catch (const ValidationError& e) {
    throw ValidationError("scenario." + e.field(), e.reason());
  }

  auto list = [&](const char* key, std::vector<double>& out) {
    if (!r.has(key)) return;
    const auto& a = r.child(key);
    if (!a.is_array()) throw ValidationError(key, "expected an array of numbers");
    out.clear();
    for (const auto& x : a) {
      if (!x.is_number()) throw ValidationError(key, "expected an array of numbers");
      out.push_back(x.get<double>());
    }
  };
  list("v_desired", s.v_desired);
  list("gamma", s.gamma);
  list("penetration", s.penetration);
  if (r.has("controllers")) {
    const auto& a = r.child("controllers");
    if (!a.is_array()) throw ValidationError("controllers", "expected an array");
    s.controllers.clear();
    for (const auto& x : a) {
      const std::string name = x.is_string() ? x.get<std::string>() : "";
      if (name == "follower_stopper") {
        s.controllers.push_back(ControllerKind::FollowerStopper);
      } else if (name == "idm_relaxation") {
        s.controllers.push_back(ControllerKind::IdmRelaxation);
      } else {
        throw ValidationError("controllers", "entries must be follower_stopper or idm_relaxation");
      }
    }
  }
  r.skip("controllers");
  s.include_baseline_speed = r.boolean("include_baseline_speed", s.include_baseline_speed);
  s.threshold = r.number("threshold", s.threshold);
  r.finish();
  validate(s);
  return s;
}

struct SweepRun {
  std::string label;
  ScenarioConfig config;
};

namespace detail {
inline std::string compact(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}
}  // namespace detail

/// Uncontrolled reference: penetration 0, no controller.
inline ScenarioConfig baseline_config(const BenchmarkSuite& s) {
  ScenarioConfig c = s.scenario;
  c.penetration = 0.0;
  c.controller.reset();
  return c;
}

/// Cartesian sweep in a fixed order. `baseline_speed` is appended to the
/// v_desired axis when the suite asks for it.
inline std::vector<SweepRun> expand_sweep(const BenchmarkSuite& s, std::optional<double> baseline_speed) {
  std::vector<double> speeds = s.v_desired;
  if (s.include_baseline_speed && baseline_speed) speeds.push_back(*baseline_speed);
  std::vector<SweepRun> out;
  for (auto kind : s.controllers) {
    for (double p : s.penetration) {
      for (double v : speeds) {
        const std::string tag =
            (v == baseline_speed && s.include_baseline_speed) ? "vbase" : "v" + detail::compact(v);
        if (kind == ControllerKind::FollowerStopper) {
          FollowerStopperSpec spec;
          spec.v_desired = v;
          ScenarioConfig c = s.scenario;
          c.penetration = p;
          c.controller = spec;
          out.push_back({"fs_" + tag + "_p" + detail::compact(p), c});
        } else {
          for (double g : s.gamma) {
            IdmRelaxationSpec spec;
            spec.v_desired = v;
            spec.gamma = g;
            spec.idm = s.scenario.human_idm;
            ScenarioConfig c = s.scenario;
            c.penetration = p;
            c.controller = spec;
            out.push_back({"idmr_" + tag + "_g" + detail::compact(g) + "_p" + detail::compact(p), c});
          }
        }
      }
    }
  }
  return out;
}

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& work) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < jobs; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) work(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct SweepResult {
  RunResult baseline_run;
  KpiReport baseline;
  std::vector<SweepRun> runs;
  std::vector<RunOutcome> outcomes;  ///< baseline first, then `runs` in order
  Leaderboard leaderboard;
};

/// Baseline, then every sweep point on the baseline's seed. `on_run` sees
/// each finished run and may be called from several threads at once; results
/// do not depend on `jobs`.
inline SweepResult run_sweep(
    const BenchmarkSuite& suite, const VehiclePortfolio& portfolio, unsigned jobs = 1,
    const std::function<void(const std::string&, const RunResult&, const KpiReport&)>& on_run = {}) {
  validate(suite);
  SweepResult out;
  out.baseline_run = run(baseline_config(suite), portfolio);
  // The baseline is scored against itself so every row shares one reference.
  out.baseline = compute_kpis(quantized(out.baseline_run.log), portfolio, std::nullopt,
                              {suite.threshold, out.baseline_run.collisions.size()});
  out.baseline.baseline = baseline_of(out.baseline);
  if (on_run) on_run("baseline", out.baseline_run, out.baseline);

  out.runs = expand_sweep(suite, out.baseline.mean_network_speed);
  std::vector<RunOutcome> results(out.runs.size());
  parallel_for(out.runs.size(), jobs, [&](std::size_t i) {
    results[i].label = out.runs[i].label;
    try {
      const RunResult r = run(out.runs[i].config, portfolio);
      const KpiReport k =
          compute_kpis(quantized(r.log), portfolio, out.baseline, {suite.threshold, r.collisions.size()});
      if (on_run) on_run(out.runs[i].label, r, k);
      results[i].report = k;
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  });

  out.outcomes.push_back({"baseline", out.baseline, ""});
  for (auto& r : results) out.outcomes.push_back(std::move(r));
  out.leaderboard = rank_runs(out.outcomes);
  return out;
}

}  // namespace wavebench
