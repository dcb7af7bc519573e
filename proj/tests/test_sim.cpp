#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "wavebench/wavebench.hpp"

using namespace wavebench;

namespace {

ScenarioConfig ring(double length, int n, double sigma, double warmup, double horizon, std::uint64_t seed = 0) {
  ScenarioConfig c;
  c.geometry = RingGeometry{length, n};
  c.noise.std_dev = sigma;
  c.warmup = warmup;
  c.horizon = horizon;
  c.seed = seed;
  return c;
}

double max_deviation(const std::vector<VehicleState>& vs, double v_eq) {
  double m = 0;
  for (const auto& v : vs) m = std::max(m, std::abs(v.speed - v_eq));
  return m;
}

std::string csv_of(const TrajectoryLog& log) {
  std::ostringstream os;
  write_trajectory_csv(os, log);
  return os.str();
}

}  // namespace

TEST(Ballistic, FromRestUnderMaxAcceleration) {
  ScenarioConfig c = ring(1e6, 1, 0.0, 0, 0.4);
  c.initial_perturbation = -30;  // start at rest
  Simulation sim(c, default_portfolio());
  ASSERT_EQ(sim.vehicles()[0].speed, 0.0);
  const double x0 = sim.vehicles()[0].position;
  sim.step();
  const double a = idm_accel({1e6 - 5.0, 0.0, 0.0}, kBenchmarkIdm);
  EXPECT_NEAR(a, 1.3, 1e-9);
  EXPECT_NEAR(sim.vehicles()[0].speed, 1.3 * 0.4, 1e-9);
  EXPECT_NEAR(sim.vehicles()[0].position - x0, 0.5 * 1.3 * 0.16, 1e-9);
}

TEST(Ballistic, StandstillTruncation) {
  const auto b = ballistic_update(1.0, -5.0, 0.4);
  EXPECT_EQ(b.speed, 0.0);
  EXPECT_DOUBLE_EQ(b.advance, 0.1);
  const auto c = ballistic_update(2.0, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(c.speed, 2.5);
  EXPECT_DOUBLE_EQ(c.advance, 1.0 + 0.125);
}

TEST(Simulation, EquilibriumPairIsFixedPoint) {
  const double v_eq = 10.0;
  ScenarioConfig c = ring(ring_length_for_speed(v_eq, 2, kBenchmarkIdm, 5.0), 2, 0.0, 0, 40);
  Simulation sim(c, default_portfolio());
  sim.set_logging(false);
  for (int k = 0; k < 100; ++k) {
    sim.step();
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_NEAR(sim.vehicles()[i].speed, v_eq, 1e-12);
      EXPECT_NEAR(sim.gap_of(i), equilibrium_gap(v_eq, kBenchmarkIdm), 1e-9);
    }
  }
}

namespace {

// Worst speed spread across vehicles over every step of a noiseless run.
double noiseless_spread(double length, double warmup, double horizon) {
  const auto r = run(ring(length, 22, 0.0, warmup, horizon), default_portfolio());
  std::map<double, std::pair<double, double>> by_t;
  for (const auto& rec : r.log.records) {
    auto [it, fresh] = by_t.try_emplace(rec.t, rec.speed, rec.speed);
    it->second.first = std::min(it->second.first, rec.speed);
    it->second.second = std::max(it->second.second, rec.speed);
  }
  double worst = 0;
  for (const auto& [t, mm] : by_t) worst = std::max(worst, mm.second - mm.first);
  return worst;
}

}  // namespace

TEST(Simulation, NoiselessRingStaysUniform) {
  EXPECT_LT(noiseless_spread(ring_length_for_speed(27.0, 22, kBenchmarkIdm, 5.0), 720, 100), 1e-6);
  // At an unstable density rounding noise (1e-15) is amplified at the linear
  // growth rate, so the spread only stays below 1e-6 for about 750 s.
  EXPECT_LT(noiseless_spread(260, 720, 0.4), 1e-6);
}

TEST(Simulation, UnstableRingDevelopsWaves) {
  const auto r = run(ring(260, 22, 0.1, 720, 100, 0), default_portfolio());
  double vmin = 1e9, sum = 0;
  std::size_t n = 0;
  for (const auto& rec : r.log.records) {
    if (rec.phase != Phase::Measure) continue;
    vmin = std::min(vmin, rec.speed);
    sum += rec.speed;
    ++n;
  }
  EXPECT_LT(vmin, 2.0);
  EXPECT_GT(sum / n, 4.0);
  EXPECT_TRUE(r.collisions.empty());
}

TEST(Simulation, StablePerturbationDecays) {
  const double v_eq = 27.0;
  ASSERT_TRUE(string_stable(linearize(kBenchmarkIdm, v_eq)));
  ScenarioConfig c = ring(ring_length_for_speed(v_eq, 22, kBenchmarkIdm, 5.0), 22, 0.0, 0, 300);
  c.initial_perturbation = -1.0;
  Simulation sim(c, default_portfolio());
  sim.set_logging(false);
  const double d0 = max_deviation(sim.vehicles(), v_eq);
  for (std::uint64_t k = 0; k < sim.total_steps(); ++k) sim.step();
  EXPECT_LE(max_deviation(sim.vehicles(), v_eq), 0.5 * d0);
}

TEST(Simulation, UnstablePerturbationGrows) {
  const double v_eq = 5.0;
  ASSERT_FALSE(string_stable(linearize(kBenchmarkIdm, v_eq)));
  ScenarioConfig c = ring(ring_length_for_speed(v_eq, 22, kBenchmarkIdm, 5.0), 22, 0.0, 0, 300);
  c.initial_perturbation = -0.5;
  Simulation sim(c, default_portfolio());
  sim.set_logging(false);
  const double d0 = max_deviation(sim.vehicles(), v_eq);
  for (std::uint64_t k = 0; k < sim.total_steps(); ++k) sim.step();
  EXPECT_GT(max_deviation(sim.vehicles(), v_eq), 2.0 * d0);
}

TEST(Simulation, RingInvariants) {
  ScenarioConfig c = ring(260, 22, 0.1, 100, 200, 3);
  Simulation sim(c, default_portfolio());
  const auto& fs = c.fail_safe;
  std::vector<double> prev;
  for (const auto& v : sim.vehicles()) prev.push_back(v.position);
  for (std::uint64_t k = 0; k < sim.total_steps(); ++k) {
    std::vector<double> speeds;
    for (const auto& v : sim.vehicles()) speeds.push_back(v.speed);
    sim.step();
    ASSERT_EQ(sim.vehicles().size(), 22u);
    for (std::size_t i = 0; i < 22; ++i) {
      const auto& v = sim.vehicles()[i];
      ASSERT_GE(v.speed, 0.0);
      ASSERT_GE(v.position, 0.0);
      ASSERT_LT(v.position, 260.0);
      double dx = v.position - prev[i];
      if (dx < 0) dx += 260.0;
      ASSERT_LE(dx, speeds[i] * c.dt + 0.5 * fs.bounds.max * c.dt * c.dt + 1e-9);
      prev[i] = v.position;
    }
  }
  EXPECT_TRUE(sim.collisions().empty());
}

TEST(Simulation, GapMatchesPositions) {
  const auto r = run(ring(260, 22, 0.1, 10, 20, 1), default_portfolio());
  std::map<std::pair<double, std::uint64_t>, double> pos;
  for (const auto& rec : r.log.records) pos[{rec.t, rec.id}] = rec.position;
  for (const auto& rec : r.log.records) {
    ASSERT_NE(rec.leader_id, kNoLeader);
    double d = pos.at({rec.t, static_cast<std::uint64_t>(rec.leader_id)}) - rec.position;
    if (d <= 0) d += 260;
    EXPECT_NEAR(rec.gap, d - 5.0, 1e-9);
  }
}

TEST(Simulation, TimestampsUniformAndPhasesTagged) {
  ScenarioConfig c = ring(260, 22, 0.1, 8, 4);
  const auto r = run(c, default_portfolio());
  ASSERT_EQ(r.log.records.size(), 22u * 30);
  for (std::size_t k = 0; k < 30; ++k) {
    const auto& rec = r.log.records[k * 22];
    EXPECT_NEAR(rec.t, k * 0.4, 1e-12);
    EXPECT_EQ(rec.phase, rec.t < 8 - 1e-9 ? Phase::Warmup : Phase::Measure);
  }
}

TEST(Simulation, DeterministicCsv) {
  ScenarioConfig c;
  c.warmup = 60;
  c.horizon = 60;
  c.seed = 9;
  c.penetration = 0.1;
  c.controller = FollowerStopperSpec{};
  const auto a = run(c, default_portfolio());
  const auto b = run(c, default_portfolio());
  EXPECT_EQ(csv_of(a.log), csv_of(b.log));
  c.seed = 10;
  EXPECT_NE(csv_of(run(c, default_portfolio()).log), csv_of(a.log));
}

TEST(FailSafe, ClipsToAccelerationBounds) {
  FailSafeConfig cfg;
  EXPECT_EQ(fail_safe(10.0, 5.0, std::nullopt, 0.4, cfg), 3.0);
  EXPECT_EQ(fail_safe(-10.0, 5.0, std::nullopt, 0.4, cfg), -4.5);
}

TEST(FailSafe, SafeProposalUnchanged) {
  FailSafeConfig cfg;
  EXPECT_EQ(fail_safe(0.7, 10.0, LeaderView{50.0, 10.0}, 0.4, cfg), 0.7);
  EXPECT_EQ(fail_safe(-1.25, 10.0, LeaderView{30.0, 9.0}, 0.4, cfg), -1.25);
}

TEST(FailSafe, DisabledPassesThrough) {
  FailSafeConfig cfg;
  cfg.enabled = false;
  EXPECT_EQ(fail_safe(10.0, 5.0, LeaderView{0.5, 0.0}, 0.4, cfg), 10.0);
}

TEST(FailSafe, RoadSpeedLimit) {
  FailSafeConfig cfg;
  cfg.road_speed_limit = 10.0;
  EXPECT_NEAR(fail_safe(3.0, 9.8, std::nullopt, 0.4, cfg), 0.5, 1e-12);
}

TEST(FailSafe, StoppedLeaderCloseAheadBrakesHardest) {
  // From 10 m/s the shortest possible stop at 4.5 m/s^2 is 11.1 m, so a
  // leader stopped 2 m ahead cannot be avoided; the fail-safe must still
  // return the strongest braking available.
  FailSafeConfig cfg;
  EXPECT_EQ(fail_safe(1.0, 10.0, LeaderView{2.0, 0.0}, 0.4, cfg), cfg.bounds.min);
}

// Forward-simulation oracle: ego follows a leader that brakes to a stop at
// full deceleration; the ego proposes arbitrary accelerations and only the
// fail-safe stands between it and the leader.
TEST(FailSafe, ForwardSimulationNeverCollides) {
  FailSafeConfig cfg;
  const double dt = 0.4, b = -cfg.bounds.min;
  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> speed(0, 30), proposal(-2, 5), u(0, 1);
  int cases = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    double v = speed(rng), vl = speed(rng);
    // Smallest gap that still admits a safe trajectory, plus random slack.
    const double need = v * dt + v * v / (2 * b) - vl * vl / (2 * b) + cfg.min_gap;
    double gap = std::max(need, 0.5) + 20.0 * u(rng);
    if (safe_next_speed(v, {gap, vl}, dt, b, cfg.min_gap) < 0) continue;
    ++cases;
    for (int k = 0; k < 100; ++k) {
      const double a = fail_safe(proposal(rng), v, LeaderView{gap, vl}, dt, cfg);
      const auto ego = ballistic_update(v, a, dt);
      const auto lead = ballistic_update(vl, -b, dt);
      gap += lead.advance - ego.advance;
      v = ego.speed;
      vl = lead.speed;
      ASSERT_GT(gap, 0.0) << "trial " << trial << " step " << k;
    }
  }
  EXPECT_GT(cases, 1000);
}

TEST(FailSafe, SlowsAheadOfLowerLimit) {
  FailSafeConfig cfg;
  SpeedLimitView lim;
  lim.ahead = 5.0;
  lim.distance_ahead = 10.0;
  const double a = fail_safe(3.0, 15.0, std::nullopt, 0.4, cfg, lim);
  EXPECT_LT(a, 0.0);
}

TEST(Inflow, NominalHeadway) {
  InflowSpawner s(2050);
  EXPECT_NEAR(s.headway(), 3600.0 / 2050.0, 1e-15);
  EXPECT_NEAR(s.headway(), 1.756, 1e-3);
}

TEST(Inflow, EveryTenthVehicleIsCav) {
  EXPECT_EQ(cav_period(0.10), 10u);
  EXPECT_EQ(cav_period(0.05), 20u);
  EXPECT_EQ(cav_period(0.0), 0u);
  ScenarioConfig c;
  c.warmup = 0;
  c.horizon = 200;
  c.penetration = 0.1;
  c.controller = IdmRelaxationSpec{};
  const auto r = run(c, default_portfolio());
  std::map<std::uint64_t, VehicleRole> role;
  for (const auto& rec : r.log.records) role[rec.id] = rec.role;
  ASSERT_GT(role.size(), 50u);
  for (const auto& [id, rl] : role) EXPECT_EQ(rl == VehicleRole::Cav, (id + 1) % 10 == 0) << id;
  EXPECT_EQ(r.cav_count, r.spawned / 10);
}

TEST(Inflow, BlockedEntryDefers) {
  const IdmParams p = kBenchmarkIdm;
  FailSafeConfig fs;
  EXPECT_FALSE(InflowSpawner::insertion_speed(LeaderView{1.0, 0.0}, 10.0, p, fs, 0.4).has_value());
  EXPECT_FALSE(InflowSpawner::insertion_speed(LeaderView{5.0, 0.0}, 10.0, p, fs, 0.4).has_value());
  const auto open = InflowSpawner::insertion_speed(LeaderView{100.0, 10.0}, 10.0, p, fs, 0.4);
  ASSERT_TRUE(open.has_value());
  EXPECT_EQ(*open, 10.0);
  EXPECT_EQ(*InflowSpawner::insertion_speed(std::nullopt, 10.0, p, fs, 0.4), 10.0);
}

TEST(Inflow, CountNeverExceedsNominal) {
  ScenarioConfig c;
  c.warmup = 0;
  c.horizon = 600;
  c.seed = 2;
  const auto r = run(c, default_portfolio());
  const double nominal = std::floor(600.0 / (3600.0 / 2050.0)) + 1;
  EXPECT_LE(static_cast<double>(r.spawned), nominal);
  EXPECT_GT(r.spawned, 0u);
  EXPECT_TRUE(r.collisions.empty());
}

TEST(Inflow, JammedStretchDefersInsertions) {
  ScenarioConfig c;
  c.warmup = 0;
  c.horizon = 900;
  auto& s = std::get<StretchGeometry>(c.geometry);
  s.length = 300;
  s.downstream_buffer = 100;
  s.bottleneck_speed = 1.0;  // severe bottleneck backs traffic up to the entry
  const auto r = run(c, default_portfolio());
  EXPECT_GT(r.deferred_steps, 0u);
  EXPECT_LT(static_cast<double>(r.spawned), 900.0 / (3600.0 / 2050.0));
  EXPECT_TRUE(r.collisions.empty());
}

TEST(Stretch, VehiclesLeaveAtDomainEnd) {
  ScenarioConfig c;
  c.warmup = 0;
  c.horizon = 600;
  Simulation sim(c, default_portfolio());
  sim.set_logging(false);
  for (std::uint64_t k = 0; k < sim.total_steps(); ++k) {
    sim.step();
    for (const auto& v : sim.vehicles()) ASSERT_LT(v.position, 2009.0);
  }
}

TEST(Stretch, BottleneckLimitsSpeed) {
  ScenarioConfig c;
  c.warmup = 300;
  c.horizon = 300;
  c.noise.std_dev = 0;
  const auto r = run(c, default_portfolio());
  for (const auto& rec : r.log.records) {
    if (rec.position >= 1809.0) {
      EXPECT_LE(rec.speed, 5.0 + 1e-9);
    }
  }
}

TEST(Collisions, DetectedAndReported) {
  ScenarioConfig c = ring(130, 22, 3.0, 0, 120, 4);
  c.fail_safe.enabled = false;
  const auto r = run(c, default_portfolio());
  EXPECT_TRUE(r.collided());
  for (const auto& e : r.collisions) EXPECT_LE(e.gap, 0.0);
}

TEST(Collisions, NoneInNoiselessEquilibrium) {
  for (double v : {2.0, 8.0, 20.0}) {
    const auto r = run(ring(ring_length_for_speed(v, 10, kBenchmarkIdm, 5.0), 10, 0.0, 0, 100), default_portfolio());
    EXPECT_TRUE(r.collisions.empty());
    for (const auto& rec : r.log.records) ASSERT_GT(rec.gap, 0.0);
  }
}

TEST(ScenarioValidation, RejectsInvalid) {
  ScenarioConfig c;
  c.dt = 0;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.penetration = 1.5;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.horizon = 0;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.penetration = 0.1;  // no controller
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.geometry = RingGeometry{100, 22};  // shorter than the vehicles
  EXPECT_THROW(validate(c), ValidationError);
}

TEST(ScenarioJson, RoundTrip) {
  ScenarioConfig c;
  c.seed = 77;
  c.penetration = 0.05;
  c.controller = IdmRelaxationSpec{4.0, 1.0, kBenchmarkIdm};
  c.fail_safe.road_speed_limit = 33;
  const auto back = scenario_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(ScenarioJson, FieldSpecificErrors) {
  auto err = [](const std::string& text) {
    try {
      scenario_from_json(nlohmann::json::parse(text));
    } catch (const ValidationError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(err(R"({"geometry":{"type":"ring"},"seed":1,"dt":0})"), "dt");
  EXPECT_EQ(err(R"({"geometry":{"type":"ring"}})"), "seed");
  EXPECT_EQ(err(R"({"geometry":{"type":"ring"},"seed":1,"bogus":2})"), "bogus");
  EXPECT_EQ(err(R"({"geometry":{"type":"moebius"},"seed":1})"), "geometry.type");
  EXPECT_EQ(err(R"({"geometry":{"type":"stretch","inflow":-5},"seed":1})"), "geometry.inflow");
  EXPECT_EQ(err(R"({"geometry":{"type":"ring"},"seed":1,"human_idm":{"a":-1}})"), "human_idm.a");
  EXPECT_EQ(err(R"({"geometry":{"type":"ring"},"seed":1,"noise":{"std_dev":-1}})"), "noise.std_dev");
  EXPECT_EQ(err(R"({"geometry":{"type":"ring"},"seed":1,"penetration":0.1,
                    "controller":{"type":"idm_relaxation","v_desired":5,"gamma":0}})"),
            "controller.gamma");
  EXPECT_EQ(err(R"({"geometry":{"type":"ring"},"seed":-3})"), "seed");
}

TEST(ScenarioJson, RingFromEquilibriumSpeed) {
  const auto c = scenario_from_json(
      nlohmann::json::parse(R"({"geometry":{"type":"ring","n_vehicles":22,"equilibrium_speed":5},"seed":0})"));
  EXPECT_NEAR(std::get<RingGeometry>(c.geometry).length, ring_length_for_speed(5, 22, kBenchmarkIdm, 5), 1e-12);
}

TEST(ScenarioJson, ShippedConfigsParse) {
  for (const char* name : {"ring_baseline", "stretch_baseline", "stretch_idm_relaxation", "stretch_follower_stopper"}) {
    const auto path = std::string(WAVEBENCH_SOURCE_DIR) + "/configs/" + name + ".json";
    EXPECT_NO_THROW(scenario_from_json(nlohmann::json::parse(detail::read_file(path)))) << name;
  }
}
