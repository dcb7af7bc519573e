// wavebench: run scenarios, sweeps, stability scans, energy-model fits, and
// leaderboard reports from the command line.
//
// Exit codes: 0 ok, 1 other failure, 2 invalid config or input, 3 collision,
// 4 I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wavebench/wavebench.hpp"

namespace fs = std::filesystem;
using namespace wavebench;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kCollision = 3, kIo = 4 };

struct Globals {
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

nlohmann::json read_json(const fs::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string(), e.what());
  }
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

template <class Writer>
void write_file(const fs::path& path, Writer&& write) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  write(os);
  os.flush();
  if (!os) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

const VehiclePortfolio& portfolio_from(const std::string& path, std::optional<VehiclePortfolio>& storage) {
  if (path.empty()) return default_portfolio();
  storage = load_portfolio(path);
  return *storage;
}

void print_kpis(const KpiReport& k) {
  std::printf("system_mpg            %.4f\n", k.system_mpg);
  std::printf("mean_network_speed    %.4f m/s\n", k.mean_network_speed);
  std::printf("realized_inflow       %.1f veh/hr\n", k.realized_inflow);
  std::printf("collisions            %zu\n", k.collision_count);
  if (k.baseline) {
    std::printf("inflow_degraded       %s\n", k.flags.inflow_degraded ? "yes" : "no");
    std::printf("speed_degraded        %s\n", k.flags.speed_degraded ? "yes" : "no");
  }
  for (const auto& [name, f] : k.per_class) {
    std::printf("  %-20s mpg %.4f  (%.4f gal, %.4f mi)\n", name.c_str(), f.mpg, f.gallons, f.miles);
  }
}

struct TsdBins {
  double time = 10.0;
  double space = 20.0;
};

/// Trajectory CSV, KPI JSON, and the time-space diagram for one run.
void write_run_artifacts(const fs::path& dir, const RunResult& run, const KpiReport& kpi,
                         const TsdBins& bins, bool trajectory) {
  make_dir(dir);
  write_json(dir / "config.json", to_json(run.config));
  write_json(dir / "kpi.json", to_json(kpi));
  if (!trajectory) return;
  write_file(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, run.log); });
  const auto tsd = export_tsd(quantized(run.log), bins.time, bins.space);
  write_file(dir / "tsd.csv", [&](std::ostream& os) { write_tsd_csv(os, tsd); });
  auto meta = tsd_metadata(tsd);
  try {
    meta["wave_speed_m_s"] = wave_speed_estimate(tsd);
  } catch (const Error&) {
    meta["wave_speed_m_s"] = nullptr;  // uniform flow or too few bins
  }
  write_json(dir / "tsd.json", meta);
}

// ---------------------------------------------------------------------------

int cmd_run(const Globals& g, const std::string& config_path, const std::string& portfolio_path,
            const std::string& baseline_path, double threshold, const TsdBins& bins) {
  ScenarioConfig cfg = scenario_from_json(read_json(config_path), !g.seed.has_value());
  if (g.seed) cfg.seed = *g.seed;
  std::optional<KpiReport> baseline;
  if (!baseline_path.empty()) baseline = kpi_report_from_json(read_json(baseline_path));
  std::optional<VehiclePortfolio> storage;
  const auto& portfolio = portfolio_from(portfolio_path, storage);

  const RunResult result = run(cfg, portfolio);
  const KpiReport kpi =
      compute_kpis(quantized(result.log), portfolio, baseline, {threshold, result.collisions.size()});
  write_run_artifacts(g.out, result, kpi, bins, true);

  if (!g.quiet) {
    print_kpis(kpi);
    std::printf("artifacts in %s\n", g.out.c_str());
  }
  if (result.collided()) {
    const auto& c = result.collisions.front();
    std::fprintf(stderr, "collision: vehicle %llu hit %llu at t=%.1f s (%zu events)\n",
                 static_cast<unsigned long long>(c.follower), static_cast<unsigned long long>(c.leader), c.t,
                 result.collisions.size());
    return kCollision;
  }
  return kOk;
}

int cmd_sweep(const Globals& g, const std::string& suite_path, const std::string& portfolio_path,
              unsigned jobs, bool trajectories, const TsdBins& bins) {
  nlohmann::json j = read_json(suite_path);
  if (g.seed && j.is_object()) j["seed"] = *g.seed;
  const BenchmarkSuite suite = suite_from_json(j);
  std::optional<VehiclePortfolio> storage;
  const auto& portfolio = portfolio_from(portfolio_path, storage);

  const fs::path out = g.out;
  make_dir(out / "runs");
  std::mutex mu;
  std::vector<std::string> write_errors;
  const auto result = run_sweep(suite, portfolio, jobs, [&](const std::string& label, const RunResult& r,
                                                            const KpiReport& k) {
    try {
      write_run_artifacts(out / "runs" / label, r, k, bins, trajectories);
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      write_errors.push_back(e.what());
    }
  });
  if (!write_errors.empty()) throw IoError(write_errors.front());

  write_file(out / "leaderboard.txt", [&](std::ostream& os) { write_leaderboard_text(os, result.leaderboard); });
  write_json(out / "leaderboard.json", to_json(result.leaderboard));
  if (!g.quiet) {
    write_leaderboard_text(std::cout, result.leaderboard);
    std::cout << "artifacts in " << out.string() << '\n';
  }
  return kOk;
}

int cmd_stability(const Globals& g, const std::string& params_path, IdmParams params, double v_min,
                  double v_max, double v_step, double vehicle_length) {
  if (!params_path.empty()) params = idm_params_from_json(read_json(params_path));
  validate(params, "idm");
  detail::require(v_step > 0, "v_step", "must be > 0");
  detail::require(v_min > 0, "v_min", "must be > 0");

  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double v = v_min + k * v_step;
    if (v > v_max + 1e-9 || v >= params.v0) break;
    grid.push_back(v);
  }
  detail::require(!grid.empty(), "v_min", "grid is empty (needs v_min < v0 and v_min <= v_max)");
  const auto points = critical_density_scan(params, grid, vehicle_length);

  make_dir(g.out);
  write_file(fs::path(g.out) / "fundamental_diagram.csv",
             [&](std::ostream& os) { write_fundamental_diagram_csv(os, points); });
  if (!g.quiet) {
    std::printf("%10s %14s %12s %12s %8s\n", "speed_m_s", "density_veh_km", "flow_veh_hr", "lambda", "stable");
    std::vector<FundamentalDiagramPoint> by_speed(points);
    std::sort(by_speed.begin(), by_speed.end(), [](auto& a, auto& b) { return a.speed < b.speed; });
    for (const auto& p : by_speed) {
      std::printf("%10.3f %14.3f %12.1f %12.5f %8s\n", p.speed, p.density, p.flow, p.lambda,
                  p.stable ? "yes" : "no");
    }
    if (const auto band = unstable_band(points)) {
      std::printf("unstable band: v in [%.3f, %.3f] m/s, density in [%.3f, %.3f] veh/km%s\n", band->v_min,
                  band->v_max, band->density_min, band->density_max, band->contiguous ? "" : " (not contiguous)");
    } else {
      std::printf("no unstable band\n");
    }
  }
  return kOk;
}

int cmd_fit(const Globals& g, const std::string& samples_path, double beta, std::string out_path,
            const std::string& class_name, const std::string& unit, const std::string& fuel) {
  std::ifstream in(samples_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + samples_path);
  const auto samples = read_fuel_samples_csv(in);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].rate < beta) throw CsvParseError(i + 2, "rate is below beta");
  }
  FitResult fit = fit_poly(samples, beta);
  fit.model.class_name = class_name;
  fit.model.unit = fuel_unit_from_string(unit);
  if (fuel == "gasoline") {
    fit.model.grams_per_gallon = kGasolineGramsPerGallon;
  } else if (fuel == "diesel") {
    fit.model.grams_per_gallon = kDieselGramsPerGallon;
  } else {
    throw ValidationError("fuel", "expected gasoline or diesel");
  }
  if (fit.rank_deficient) {
    std::fprintf(stderr, "warning: design matrix is rank deficient; coefficients are not unique\n");
  }
  if (out_path.empty()) {
    make_dir(g.out);
    out_path = (fs::path(g.out) / "model.json").string();
  }
  save_poly_model(fit.model, out_path);

  if (!g.quiet) {
    static const char* names[] = {"C0", "C1", "C2", "C3", "p0", "p1", "p2", "q0", "q1"};
    const auto c = fit.model.coefficients();
    for (std::size_t i = 0; i < c.size(); ++i) std::printf("%-3s %.10g\n", names[i], c[i]);
    std::printf("beta %.10g\n", beta);
    std::printf("residual_norm %.6g (%zu of %zu samples above beta)\n", fit.residual_norm, fit.samples_used,
                samples.size());
    std::printf("model written to %s\n", out_path.c_str());
  }
  return kOk;
}

int cmd_report(const Globals& g, const std::vector<std::string>& inputs, const std::string& baseline_path,
               bool recompute, const std::string& portfolio_path, double threshold) {
  std::optional<KpiReport> baseline;
  if (!baseline_path.empty()) baseline = kpi_report_from_json(read_json(baseline_path));
  std::optional<VehiclePortfolio> storage;
  const VehiclePortfolio* portfolio = recompute ? &portfolio_from(portfolio_path, storage) : nullptr;

  std::vector<RunOutcome> runs;
  for (const auto& input : inputs) {
    fs::path dir = input;
    fs::path kpi_path = dir / "kpi.json";
    std::string label = dir.filename().string();
    if (fs::is_regular_file(dir)) {
      kpi_path = dir;
      dir = dir.parent_path();
      label = dir.filename().string();
    }
    if (label.empty()) label = input;
    KpiReport k = kpi_report_from_json(read_json(kpi_path));
    if (recompute) {
      std::ifstream csv(dir / "trajectory.csv", std::ios::binary);
      if (!csv) throw IoError("cannot open " + (dir / "trajectory.csv").string());
      const auto log = read_trajectory_csv(csv, k.window);
      k = compute_kpis(log, *portfolio, std::nullopt, {k.threshold, k.collision_count});
    }
    if (baseline) {
      k.threshold = threshold;
      k.baseline = baseline_of(*baseline);
      k.flags = compute_flags(k.mean_network_speed, k.realized_inflow, *k.baseline, threshold);
    }
    runs.push_back({label, k, ""});
  }
  const auto board = rank_runs(runs);
  make_dir(g.out);
  write_file(fs::path(g.out) / "leaderboard.txt", [&](std::ostream& os) { write_leaderboard_text(os, board); });
  write_json(fs::path(g.out) / "leaderboard.json", to_json(board));
  if (!g.quiet) write_leaderboard_text(std::cout, board);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic-wave benchmark: simulation, stability analysis, energy KPIs, leaderboards"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Override the scenario / suite seed");
  app.add_flag("--quiet", g.quiet, "Suppress the printed summary");

  std::string portfolio_path;
  double threshold = kDefaultDegradationThreshold;
  TsdBins bins;
  std::function<int()> action;

  auto* run = app.add_subcommand("run", "Run one scenario and write trajectory, KPI, and TSD artifacts");
  std::string config_path, baseline_path;
  run->add_option("config", config_path, "Scenario JSON")->required();
  run->add_option("--baseline", baseline_path, "Baseline kpi.json for degradation flags");
  run->add_option("--portfolio", portfolio_path, "Portfolio JSON (default: built-in placeholder models)");
  run->add_option("--threshold", threshold, "Degradation threshold (relative)")->capture_default_str();
  run->add_option("--tsd-time-bin", bins.time, "TSD time bin [s]")->capture_default_str();
  run->add_option("--tsd-space-bin", bins.space, "TSD space bin [m]")->capture_default_str();
  run->callback([&] { action = [&] { return cmd_run(g, config_path, portfolio_path, baseline_path, threshold, bins); }; });

  auto* sweep = app.add_subcommand("sweep", "Run a benchmark suite and rank the runs");
  std::string suite_path;
  unsigned jobs = 1;
  bool trajectories = false;
  sweep->add_option("suite", suite_path, "Suite JSON")->required();
  sweep->add_option("--portfolio", portfolio_path, "Portfolio JSON (default: built-in placeholder models)");
  sweep->add_option("--jobs", jobs, "Parallel runs")->capture_default_str();
  sweep->add_flag("--trajectories", trajectories, "Also write trajectory CSV and TSD for every run");
  sweep->add_option("--tsd-time-bin", bins.time, "TSD time bin [s]")->capture_default_str();
  sweep->add_option("--tsd-space-bin", bins.space, "TSD space bin [m]")->capture_default_str();
  sweep->callback([&] { action = [&] { return cmd_sweep(g, suite_path, portfolio_path, jobs, trajectories, bins); }; });

  auto* stab = app.add_subcommand("stability", "Fundamental diagram and string-stability scan for IDM");
  std::string params_path;
  IdmParams params = kBenchmarkIdm;
  double v_min = 0.5, v_max = 29.5, v_step = 0.5, vehicle_length = kDefaultVehicleLength;
  stab->add_option("--params", params_path, "IDM parameter JSON {a, b, v0, delta, T, s0}");
  stab->add_option("--a", params.a)->capture_default_str();
  stab->add_option("--b", params.b)->capture_default_str();
  stab->add_option("--v0", params.v0)->capture_default_str();
  stab->add_option("--delta", params.delta)->capture_default_str();
  stab->add_option("--T", params.T)->capture_default_str();
  stab->add_option("--s0", params.s0)->capture_default_str();
  stab->add_option("--v-min", v_min)->capture_default_str();
  stab->add_option("--v-max", v_max)->capture_default_str();
  stab->add_option("--v-step", v_step)->capture_default_str();
  stab->add_option("--vehicle-length", vehicle_length)->capture_default_str();
  stab->callback([&] {
    action = [&] { return cmd_stability(g, params_path, params, v_min, v_max, v_step, vehicle_length); };
  });

  auto* fit = app.add_subcommand("fit", "Fit a polynomial energy model to samples (CSV v,a,rate)");
  std::string samples_path, model_out, class_name = "fitted", unit = "g/s", fuel = "gasoline";
  double beta = 0.0;
  fit->add_option("samples", samples_path, "Samples CSV")->required();
  fit->add_option("beta", beta, "Fuel-rate floor")->required();
  fit->add_option("model", model_out, "Output model JSON (default: <out>/model.json)");
  fit->add_option("--class-name", class_name)->capture_default_str();
  fit->add_option("--unit", unit, "g/s or gal/hr")->capture_default_str();
  fit->add_option("--fuel", fuel, "gasoline or diesel")->capture_default_str();
  fit->callback([&] { action = [&] { return cmd_fit(g, samples_path, beta, model_out, class_name, unit, fuel); }; });

  auto* report = app.add_subcommand("report", "Rank finished runs (directories holding kpi.json)");
  std::vector<std::string> inputs;
  bool recompute = false;
  report->add_option("runs", inputs, "Run directories or kpi.json files")->required();
  report->add_option("--baseline", baseline_path, "Baseline kpi.json; re-flags every run against it");
  report->add_option("--threshold", threshold, "Degradation threshold (relative)")->capture_default_str();
  report->add_flag("--recompute", recompute, "Recompute KPIs from each run's trajectory.csv");
  report->add_option("--portfolio", portfolio_path, "Portfolio JSON for --recompute");
  report->callback([&] {
    action = [&] { return cmd_report(g, inputs, baseline_path, recompute, portfolio_path, threshold); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    return action();
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kConfig;
  } catch (const CsvParseError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kConfig;
  } catch (const NoEquilibriumError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
}
