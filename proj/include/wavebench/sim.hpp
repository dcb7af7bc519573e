#pragma once

// Single-lane microsimulation: synchronous ballistic stepping of a vehicle
// chain on a ring or an open stretch with inflow and a downstream speed-limit
// bottleneck, with actuation noise and discrete-time fail-safes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "wavebench/cfm.hpp"
#include "wavebench/controllers.hpp"
#include "wavebench/energy.hpp"
#include "wavebench/error.hpp"
#include "wavebench/noise.hpp"
#include "wavebench/scenario.hpp"

namespace wavebench {

enum class VehicleRole : std::uint8_t { Human, Cav };
enum class Phase : std::uint8_t { Warmup, Measure };

inline const char* to_string(VehicleRole r) { return r == VehicleRole::Human ? "human" : "cav"; }
inline const char* to_string(Phase p) { return p == Phase::Warmup ? "warmup" : "measure"; }

struct VehicleState {
  std::uint64_t id = 0;
  VehicleRole role = VehicleRole::Human;
  std::uint16_t energy_class = 0;  ///< index into the run's class-name table
  double position = 0.0;           ///< front bumper [m]
  double speed = 0.0;
  double accel_cmd = 0.0;   ///< noise-free, after fail-safes
  double accel_real = 0.0;  ///< applied over the last step, after standstill truncation
  double length = 5.0;
};

inline constexpr std::int64_t kNoLeader = -1;

struct LogRecord {
  double t = 0.0;
  std::uint64_t id = 0;
  VehicleRole role = VehicleRole::Human;
  std::uint16_t energy_class = 0;
  double position = 0.0;
  double speed = 0.0;
  double accel_cmd = 0.0;
  double accel_real = 0.0;
  double gap = std::numeric_limits<double>::infinity();
  std::int64_t leader_id = kNoLeader;
  Phase phase = Phase::Warmup;
};

/// Per-step vehicle records plus what is needed to interpret them.
struct TrajectoryLog {
  double dt = 0.4;
  double warmup = 0.0;
  double horizon = 0.0;
  bool periodic = false;
  double domain_length = 0.0;
  double segment_start = 0.0;  ///< metrics segment [start, end)
  double segment_end = 0.0;
  std::vector<std::string> class_names;
  std::vector<LogRecord> records;

  std::string class_label(const LogRecord& r) const {
    return std::string(to_string(r.role)) + ":" + class_names.at(r.energy_class);
  }
};

struct CollisionEvent {
  double t = 0.0;
  std::uint64_t follower = 0;
  std::uint64_t leader = 0;
  double gap = 0.0;
};

struct RunResult {
  ScenarioConfig config;
  TrajectoryLog log;
  std::vector<CollisionEvent> collisions;
  std::uint64_t spawned = 0;
  std::uint64_t cav_count = 0;
  std::uint64_t deferred_steps = 0;  ///< steps on which a due insertion was blocked

  bool collided() const { return !collisions.empty(); }
};

// ---------------------------------------------------------------------------
// Step-level building blocks

struct BallisticStep {
  double advance = 0.0;
  double speed = 0.0;
};

/// Constant acceleration over dt, truncated at standstill: if the speed would
/// turn negative the vehicle stops after v^2 / (2|a|).
inline BallisticStep ballistic_update(double v, double a, double dt) {
  const double v_next = v + a * dt;
  if (v_next < 0) return {v * v / (2.0 * -a), 0.0};
  return {v * dt + 0.5 * a * dt * dt, v_next};
}

struct LeaderView {
  double gap = 0.0;
  double speed = 0.0;
};

struct SpeedLimitView {
  double current = std::numeric_limits<double>::infinity();
  double ahead = std::numeric_limits<double>::infinity();  ///< a lower limit further down the road
  double distance_ahead = std::numeric_limits<double>::infinity();
};

/// Largest speed v' reachable at the end of this step from which the ego can
/// still stop, braking at `decel`, at least `min_gap` behind the point where a
/// leader braking equally hard would stop. Negative when no such speed exists.
inline double safe_next_speed(double v, const LeaderView& leader, double dt, double decel,
                              double min_gap) {
  // (v + v') dt / 2 + v'^2 / (2 decel) <= gap + vl^2 / (2 decel) - min_gap
  const double budget = leader.gap + leader.speed * leader.speed / (2.0 * decel) - min_gap;
  const double c2 = 1.0 / (2.0 * decel);
  const double c1 = 0.5 * dt;
  const double c0 = 0.5 * v * dt - budget;
  const double disc = c1 * c1 - 4.0 * c2 * c0;
  if (disc < 0) return -1.0;
  return (-c1 + std::sqrt(disc)) / (2.0 * c2);
}

/// Acceleration bounds, speed limits (with anticipation of a lower limit
/// ahead), and the discrete-time safe-gap bound. Returns `proposed` unchanged
/// when it already satisfies all of them.
inline double fail_safe(double proposed, double v, const std::optional<LeaderView>& leader, double dt,
                        const FailSafeConfig& cfg, const SpeedLimitView& limits = {}) {
  if (!cfg.enabled) return proposed;
  double a = std::clamp(proposed, cfg.bounds.min, cfg.bounds.max);

  const double limit = std::min(limits.current, cfg.road_speed_limit);
  if (std::isfinite(limit)) a = std::min(a, (limit - v) / dt);
  if (std::isfinite(limits.ahead)) {
    // End-of-step speed v' from which the limit is still reachable at the
    // anticipation rate over the distance left after this step's advance.
    const double b = cfg.anticipation_decel, A = limits.ahead;
    const double disc = b * b * dt * dt + 4.0 * (A * A + 2.0 * b * limits.distance_ahead - b * v * dt);
    const double reach = disc > 0 ? std::max(A, 0.5 * (-b * dt + std::sqrt(disc))) : A;
    a = std::min(a, (reach - v) / dt);
  }
  if (leader) {
    const double v_safe = safe_next_speed(v, *leader, dt, -cfg.bounds.min, cfg.min_gap);
    a = std::min(a, (std::max(v_safe, 0.0) - v) / dt);
  }
  // Physical braking limit wins; a violated safe-gap bound shows up as a collision.
  return std::max(a, cfg.bounds.min);
}

namespace detail {
inline constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
inline constexpr std::uint64_t kClassStream = 0x636c617373ULL;
}  // namespace detail

/// Insertion logic for the open stretch: a nominal schedule at headway
/// 3600/inflow seconds, deferred while the entry is blocked.
class InflowSpawner {
public:
  explicit InflowSpawner(double inflow) : headway_(3600.0 / inflow) {}

  double headway() const noexcept { return headway_; }
  bool due(double t) const noexcept { return t + 1e-9 >= next_due_; }
  void spawned() noexcept { next_due_ += headway_; }

  /// Insertion speed at the entry, or nullopt if inserting now is unsafe.
  /// Vehicles enter at `depart_speed` only; the insertion is deferred while
  /// the entry gap is below the IDM desired gap at that speed or the
  /// fail-safe would have to brake.
  static std::optional<double> insertion_speed(const std::optional<LeaderView>& leader,
                                               double depart_speed, const IdmParams& idm,
                                               const FailSafeConfig& fs, double dt) {
    if (!leader) return depart_speed;
    if (leader->gap < idm_desired_gap(depart_speed, leader->speed - depart_speed, idm)) {
      return std::nullopt;
    }
    if (fs.enabled &&
        safe_next_speed(depart_speed, *leader, dt, -fs.bounds.min, fs.min_gap) < depart_speed) {
      return std::nullopt;
    }
    return depart_speed;
  }

private:
  double headway_;
  double next_due_ = 0.0;
};

// ---------------------------------------------------------------------------

class Simulation {
public:
  Simulation(ScenarioConfig config, const VehiclePortfolio& portfolio)
      : config_(std::move(config)), portfolio_(&portfolio) {
    validate(config_);
    noise_seed_ = detail::hash_key(config_.seed, detail::kNoiseStream);
    class_seed_ = detail::hash_key(config_.seed, detail::kClassStream);
    cav_period_ = cav_period(config_.penetration);

    for (const auto& e : portfolio.humans()) log_.class_names.push_back(e.class_name);
    log_.class_names.push_back(portfolio.cav().class_name);
    cav_class_ = static_cast<std::uint16_t>(log_.class_names.size() - 1);

    log_.dt = config_.dt;
    log_.warmup = config_.warmup;
    log_.horizon = config_.horizon;
    if (const auto* ring = std::get_if<RingGeometry>(&config_.geometry)) {
      log_.periodic = true;
      log_.domain_length = ring->length;
      log_.segment_start = 0.0;
      log_.segment_end = ring->length;
      init_ring(*ring);
    } else {
      const auto& s = std::get<StretchGeometry>(config_.geometry);
      log_.domain_length = s.total_length();
      log_.segment_start = s.segment_start();
      log_.segment_end = s.segment_end();
      spawner_.emplace(s.inflow);
    }
  }

  double time() const noexcept { return static_cast<double>(step_index_) * config_.dt; }
  std::uint64_t step_index() const noexcept { return step_index_; }
  const std::vector<VehicleState>& vehicles() const noexcept { return vehicles_; }
  std::vector<VehicleState>& vehicles() noexcept { return vehicles_; }
  const ScenarioConfig& config() const noexcept { return config_; }
  const TrajectoryLog& log() const noexcept { return log_; }
  const std::vector<CollisionEvent>& collisions() const noexcept { return collisions_; }

  void set_logging(bool on) noexcept { logging_ = on; }

  /// Leader index of vehicle i (vehicles are ordered front to back).
  std::optional<std::size_t> leader_of(std::size_t i) const {
    if (i > 0) return i - 1;
    if (log_.periodic && !vehicles_.empty()) return vehicles_.size() - 1;
    return std::nullopt;
  }

  double gap_of(std::size_t i) const {
    const auto l = leader_of(i);
    if (!l) return std::numeric_limits<double>::infinity();
    const auto& lead = vehicles_[*l];
    double d = lead.position - vehicles_[i].position;
    if (log_.periodic && d <= 0) d += log_.domain_length;
    return d - lead.length;
  }

  /// Advances one step of length dt.
  void step() {
    const double t = time();
    if (spawner_) try_spawn(t);

    const std::size_t n = vehicles_.size();
    next_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& veh = vehicles_[i];
      const auto l = leader_of(i);
      std::optional<LeaderView> leader;
      CfmInput in{std::numeric_limits<double>::infinity(), veh.speed, 0.0};
      if (l) {
        // Overlap after a collision: keep the models finite.
        leader = LeaderView{gap_of(i), vehicles_[*l].speed};
        in.gap = std::max(leader->gap, 1e-3);
        in.dv = leader->speed - veh.speed;
      }
      const double command = commanded_accel(veh, in);
      const bool noisy = veh.role == VehicleRole::Human || config_.noise_on_cavs;
      const double noise =
          noisy ? sample_accel_noise({config_.noise.std_dev, noise_seed_}, (veh.id << 32) | step_index_)
                : 0.0;
      const SpeedLimitView limits = speed_limits(veh);
      auto& nx = next_[i];
      nx = veh;
      nx.accel_cmd = fail_safe(command, veh.speed, leader, config_.dt, config_.fail_safe, limits);
      const double applied = fail_safe(command + noise, veh.speed, leader, config_.dt, config_.fail_safe, limits);
      const BallisticStep b = ballistic_update(veh.speed, applied, config_.dt);
      nx.position = veh.position + b.advance;
      nx.speed = b.speed;
      nx.accel_real = (b.speed - veh.speed) / config_.dt;
      if (log_.periodic) nx.position = std::fmod(nx.position, log_.domain_length);

      if (logging_) {
        LogRecord rec;
        rec.t = t;
        rec.id = veh.id;
        rec.role = veh.role;
        rec.energy_class = veh.energy_class;
        rec.position = veh.position;
        rec.speed = veh.speed;
        rec.accel_cmd = nx.accel_cmd;
        rec.accel_real = nx.accel_real;
        if (l) {
          rec.gap = leader->gap;
          rec.leader_id = static_cast<std::int64_t>(vehicles_[*l].id);
        }
        rec.phase = t + 1e-9 < config_.warmup ? Phase::Warmup : Phase::Measure;
        log_.records.push_back(rec);
      }
    }
    vehicles_.swap(next_);
    ++step_index_;

    if (!log_.periodic) {
      while (!vehicles_.empty() && vehicles_.front().position >= log_.domain_length) {
        vehicles_.erase(vehicles_.begin());
      }
    }
    detect_collisions();
  }

  RunResult finish() && {
    RunResult out;
    out.config = config_;
    out.log = std::move(log_);
    out.collisions = std::move(collisions_);
    out.spawned = spawned_;
    out.cav_count = cav_count_;
    out.deferred_steps = deferred_steps_;
    return out;
  }

  /// Steps needed to cover warm-up plus horizon.
  std::uint64_t total_steps() const {
    return static_cast<std::uint64_t>(std::llround((config_.warmup + config_.horizon) / config_.dt));
  }

private:
  double commanded_accel(const VehicleState& veh, const CfmInput& in) const {
    if (veh.role == VehicleRole::Cav && config_.controller) {
      return command_to_accel(controller_command(*config_.controller, in), veh.speed, config_.dt,
                              config_.fail_safe.bounds);
    }
    return idm_accel(in, config_.human_idm);
  }

  SpeedLimitView speed_limits(const VehicleState& veh) const {
    SpeedLimitView out;
    if (const auto* s = std::get_if<StretchGeometry>(&config_.geometry)) {
      if (veh.position >= s->segment_end()) {
        out.current = s->bottleneck_speed;
      } else {
        out.ahead = s->bottleneck_speed;
        out.distance_ahead = s->segment_end() - veh.position;
      }
    }
    return out;
  }

  VehicleState make_vehicle() {
    VehicleState v;
    v.id = spawned_;
    v.length = config_.vehicle_length;
    if (cav_period_ > 0 && (spawned_ + 1) % cav_period_ == 0) {
      v.role = VehicleRole::Cav;
      v.energy_class = cav_class_;
      ++cav_count_;
    } else {
      const double u = detail::to_unit(detail::hash_key(class_seed_, spawned_));
      const auto& name = portfolio_->draw_human_class(u);
      const auto it = std::find(log_.class_names.begin(), log_.class_names.end(), name);
      v.energy_class = static_cast<std::uint16_t>(it - log_.class_names.begin());
    }
    ++spawned_;
    return v;
  }

  void init_ring(const RingGeometry& ring) {
    const double spacing = ring.length / ring.n_vehicles;
    const double v_eq = equilibrium_speed(spacing - config_.vehicle_length, config_.human_idm);
    for (int i = 0; i < ring.n_vehicles; ++i) {
      VehicleState v = make_vehicle();
      // Front to back: vehicle 0 leads, vehicle n-1 closes the ring behind it.
      v.position = (ring.n_vehicles - 1 - i) * spacing;
      v.speed = v_eq;
      vehicles_.push_back(v);
    }
    if (!vehicles_.empty()) {
      vehicles_.front().speed = std::max(0.0, v_eq + config_.initial_perturbation);
    }
  }

  void try_spawn(double t) {
    if (!spawner_->due(t)) return;
    const auto& s = std::get<StretchGeometry>(config_.geometry);
    std::optional<LeaderView> leader;
    if (!vehicles_.empty()) {
      const auto& last = vehicles_.back();
      leader = LeaderView{last.position - last.length, last.speed};
    }
    const auto v = InflowSpawner::insertion_speed(leader, s.depart_speed, config_.human_idm,
                                                  config_.fail_safe, config_.dt);
    if (!v) {
      ++deferred_steps_;
      return;
    }
    VehicleState veh = make_vehicle();
    veh.position = 0.0;
    veh.speed = *v;
    vehicles_.push_back(veh);
    spawner_->spawned();
  }

  void detect_collisions() {
    std::vector<std::uint64_t> now;
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      const auto l = leader_of(i);
      if (!l || *l == i) continue;
      const double g = gap_of(i);
      if (g > 0) continue;
      now.push_back(vehicles_[i].id);
      if (!std::binary_search(colliding_.begin(), colliding_.end(), vehicles_[i].id)) {
        collisions_.push_back({time(), vehicles_[i].id, vehicles_[*l].id, g});
      }
    }
    std::sort(now.begin(), now.end());
    colliding_ = std::move(now);
  }

  ScenarioConfig config_;
  const VehiclePortfolio* portfolio_;
  std::uint64_t noise_seed_ = 0;
  std::uint64_t class_seed_ = 0;
  std::uint64_t cav_period_ = 0;
  std::uint16_t cav_class_ = 0;

  std::vector<VehicleState> vehicles_;
  std::vector<VehicleState> next_;
  std::optional<InflowSpawner> spawner_;
  TrajectoryLog log_;
  bool logging_ = true;
  std::vector<CollisionEvent> collisions_;
  std::vector<std::uint64_t> colliding_;
  std::uint64_t step_index_ = 0;
  std::uint64_t spawned_ = 0;
  std::uint64_t cav_count_ = 0;
  std::uint64_t deferred_steps_ = 0;
};

/// Runs warm-up plus horizon and returns the tagged log.
inline RunResult run(const ScenarioConfig& config, const VehiclePortfolio& portfolio) {
  Simulation sim(config, portfolio);
  const auto steps = sim.total_steps();
  for (std::uint64_t k = 0; k < steps; ++k) sim.step();
  return std::move(sim).finish();
}

}  // namespace wavebench
