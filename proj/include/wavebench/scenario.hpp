#pragma once

// Experiment description: road geometry, integration settings, noise, vehicle
// mix, controller, and fail-safe limits. Parsed from / written to JSON.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <variant>

#include "wavebench/cfm.hpp"
#include "wavebench/controllers.hpp"
#include "wavebench/error.hpp"
#include "wavebench/noise.hpp"

namespace wavebench {

struct RingGeometry {
  double length = 242.0;  ///< circumference [m]
  int n_vehicles = 22;
};

struct StretchGeometry {
  double length = 1609.0;           ///< metrics segment [m]
  double inflow = 2050.0;           ///< [veh/hr]
  double bottleneck_speed = 5.0;    ///< limit over the downstream buffer [m/s]
  double upstream_buffer = 200.0;   ///< [m]
  double downstream_buffer = 200.0; ///< [m]
  double depart_speed = 10.0;       ///< insertion speed [m/s]

  double total_length() const { return upstream_buffer + length + downstream_buffer; }
  double segment_start() const { return upstream_buffer; }
  double segment_end() const { return upstream_buffer + length; }
};

using Geometry = std::variant<RingGeometry, StretchGeometry>;

struct FailSafeConfig {
  bool enabled = true;
  AccelBounds bounds{};
  double min_gap = 0.1;  ///< clearance kept behind the leader's worst-case stop [m]
  double road_speed_limit = std::numeric_limits<double>::infinity();
  double anticipation_decel = 2.0;  ///< used to slow down ahead of a lower limit [m/s^2]
};

struct ScenarioConfig {
  Geometry geometry = StretchGeometry{};
  double dt = 0.4;
  double warmup = 720.0;
  double horizon = 1200.0;
  NoiseSpec noise{0.1, 0};  ///< seed is derived from `seed`
  bool noise_on_cavs = true;
  double penetration = 0.0;
  std::optional<ControllerSpec> controller;
  IdmParams human_idm = kBenchmarkIdm;
  double vehicle_length = 5.0;
  FailSafeConfig fail_safe{};
  std::uint64_t seed = 0;
  /// Ring only: initial speed offset of vehicle 0 [m/s].
  double initial_perturbation = 0.0;

  bool is_ring() const { return std::holds_alternative<RingGeometry>(geometry); }
};

/// Circumference that puts `n` vehicles at IDM equilibrium with speed `v`.
inline double ring_length_for_speed(double v, int n, const IdmParams& p, double vehicle_length) {
  return n * (equilibrium_gap(v, p) + vehicle_length);
}

/// CAV spawn period: every k-th vehicle, k = round(1 / penetration).
inline std::uint64_t cav_period(double penetration) {
  if (penetration <= 0) return 0;
  return static_cast<std::uint64_t>(std::max(1.0, std::round(1.0 / penetration)));
}

inline void validate(const ScenarioConfig& c) {
  using detail::require;
  require(c.dt > 0, "dt", "must be > 0");
  require(c.warmup >= 0, "warmup", "must be >= 0");
  require(c.horizon > 0, "horizon", "must be > 0");
  require(c.penetration >= 0 && c.penetration <= 1, "penetration", "must be in [0, 1]");
  require(c.vehicle_length > 0, "vehicle_length", "must be > 0");
  validate(c.noise);
  validate(c.human_idm, "human_idm");
  if (c.controller) validate(*c.controller);
  if (c.penetration > 0 && !c.controller) {
    throw ValidationError("controller", "required when penetration > 0");
  }
  require(c.fail_safe.bounds.min < 0, "fail_safe.accel_min", "must be < 0");
  require(c.fail_safe.bounds.max > 0, "fail_safe.accel_max", "must be > 0");
  require(c.fail_safe.min_gap >= 0, "fail_safe.min_gap", "must be >= 0");
  require(c.fail_safe.road_speed_limit > 0, "fail_safe.road_speed_limit", "must be > 0");
  require(c.fail_safe.anticipation_decel > 0, "fail_safe.anticipation_decel", "must be > 0");
  if (const auto* r = std::get_if<RingGeometry>(&c.geometry)) {
    require(r->n_vehicles >= 1, "geometry.n_vehicles", "must be >= 1");
    require(r->length > r->n_vehicles * c.vehicle_length, "geometry.length",
            "must exceed the total vehicle length");
  } else {
    const auto& s = std::get<StretchGeometry>(c.geometry);
    require(s.length > 0, "geometry.length", "must be > 0");
    require(s.inflow > 0, "geometry.inflow", "must be > 0");
    require(s.bottleneck_speed > 0, "geometry.bottleneck_speed", "must be > 0");
    require(s.upstream_buffer >= 0, "geometry.upstream_buffer", "must be >= 0");
    require(s.downstream_buffer >= 0, "geometry.downstream_buffer", "must be >= 0");
    require(s.depart_speed >= 0, "geometry.depart_speed", "must be >= 0");
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

class JsonReader {
public:
  JsonReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_.empty() ? "config" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!j_.at(key).is_number()) throw ValidationError(field(key), "expected a number");
    return j_.at(key).get<double>();
  }

  double number(const std::string& key) {
    if (!has(key)) throw ValidationError(field(key), "missing");
    return number(key, 0.0);
  }

  bool boolean(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ValidationError(field(key), "expected true/false");
    return j_.at(key).get<bool>();
  }

  std::string string(const std::string& key) {
    seen_.insert(key);
    if (!has(key) || !j_.at(key).is_string()) throw ValidationError(field(key), "expected a string");
    return j_.at(key).get<std::string>();
  }

  std::uint64_t uint(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) throw ValidationError(field(key), "missing");
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ValidationError(field(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  template <std::size_t N>
  std::array<double, N> array(const std::string& key, std::array<double, N> fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != N) {
      throw ValidationError(field(key), "expected an array of " + std::to_string(N) + " numbers");
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
      if (!v[i].is_number()) throw ValidationError(field(key), "expected numbers");
      out[i] = v[i].get<double>();
    }
    return out;
  }

  const nlohmann::json& child(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void skip(const std::string& key) { seen_.insert(key); }

  /// Rejects keys that were never read (typos in hand-edited files).
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError(field(key), "unknown field");
    }
  }

private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline IdmParams idm_from_json(const nlohmann::json& j, const std::string& path) {
  JsonReader r(j, path);
  IdmParams p;
  p.a = r.number("a", p.a);
  p.b = r.number("b", p.b);
  p.v0 = r.number("v0", p.v0);
  p.delta = r.number("delta", p.delta);
  p.T = r.number("T", p.T);
  p.s0 = r.number("s0", p.s0);
  r.finish();
  validate(p, path.c_str());
  return p;
}

}  // namespace detail

inline nlohmann::json to_json(const IdmParams& p) {
  return {{"a", p.a}, {"b", p.b}, {"v0", p.v0}, {"delta", p.delta}, {"T", p.T}, {"s0", p.s0}};
}

inline IdmParams idm_params_from_json(const nlohmann::json& j) {
  return detail::idm_from_json(j, "idm");
}

inline nlohmann::json to_json(const ControllerSpec& spec) {
  return std::visit(
      [](const auto& s) -> nlohmann::json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FollowerStopperSpec>) {
          return {{"type", "follower_stopper"}, {"v_desired", s.v_desired}, {"dx0", s.dx0},
                  {"decel", s.decel}};
        } else {
          return {{"type", "idm_relaxation"}, {"v_desired", s.v_desired}, {"gamma", s.gamma},
                  {"idm", to_json(s.idm)}};
        }
      },
      spec);
}

inline ControllerSpec controller_from_json(const nlohmann::json& j) {
  detail::JsonReader r(j, "controller");
  const std::string type = r.string("type");
  ControllerSpec out;
  if (type == "follower_stopper") {
    FollowerStopperSpec s;
    s.v_desired = r.number("v_desired");
    s.dx0 = r.array<3>("dx0", s.dx0);
    s.decel = r.array<3>("decel", s.decel);
    out = s;
  } else if (type == "idm_relaxation") {
    IdmRelaxationSpec s;
    s.v_desired = r.number("v_desired");
    s.gamma = r.number("gamma", s.gamma);
    if (r.has("idm")) s.idm = detail::idm_from_json(r.child("idm"), "controller.idm");
    r.skip("idm");
    out = s;
  } else {
    throw ValidationError("controller.type", "expected follower_stopper or idm_relaxation");
  }
  r.finish();
  validate(out);
  return out;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json geometry;
  if (const auto* r = std::get_if<RingGeometry>(&c.geometry)) {
    geometry = {{"type", "ring"}, {"length", r->length}, {"n_vehicles", r->n_vehicles}};
  } else {
    const auto& s = std::get<StretchGeometry>(c.geometry);
    geometry = {{"type", "stretch"},
                {"length", s.length},
                {"inflow", s.inflow},
                {"bottleneck_speed", s.bottleneck_speed},
                {"upstream_buffer", s.upstream_buffer},
                {"downstream_buffer", s.downstream_buffer},
                {"depart_speed", s.depart_speed}};
  }
  nlohmann::json fail_safe = {{"enabled", c.fail_safe.enabled},
                              {"accel_min", c.fail_safe.bounds.min},
                              {"accel_max", c.fail_safe.bounds.max},
                              {"min_gap", c.fail_safe.min_gap},
                              {"anticipation_decel", c.fail_safe.anticipation_decel}};
  if (std::isfinite(c.fail_safe.road_speed_limit)) {
    fail_safe["road_speed_limit"] = c.fail_safe.road_speed_limit;
  }
  return {{"geometry", geometry},
          {"dt", c.dt},
          {"warmup", c.warmup},
          {"horizon", c.horizon},
          {"noise", {{"std_dev", c.noise.std_dev}, {"on_cavs", c.noise_on_cavs}}},
          {"penetration", c.penetration},
          {"controller", c.controller ? to_json(*c.controller) : nlohmann::json(nullptr)},
          {"human_idm", to_json(c.human_idm)},
          {"vehicle_length", c.vehicle_length},
          {"fail_safe", fail_safe},
          {"initial_perturbation", c.initial_perturbation},
          {"seed", c.seed}};
}

/// Parses a scenario. `require_seed` enforces an explicit seed in the file.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j, bool require_seed = true) {
  detail::JsonReader r(j, "");
  ScenarioConfig c;
  c.dt = r.number("dt", c.dt);
  c.warmup = r.number("warmup", c.warmup);
  c.horizon = r.number("horizon", c.horizon);
  c.penetration = r.number("penetration", c.penetration);
  c.vehicle_length = r.number("vehicle_length", c.vehicle_length);
  c.initial_perturbation = r.number("initial_perturbation", c.initial_perturbation);
  if (r.has("seed") || require_seed) c.seed = r.uint("seed");
  r.skip("seed");

  if (r.has("human_idm")) c.human_idm = detail::idm_from_json(r.child("human_idm"), "human_idm");
  r.skip("human_idm");

  if (r.has("noise")) {
    detail::JsonReader n(r.child("noise"), "noise");
    c.noise.std_dev = n.number("std_dev", c.noise.std_dev);
    c.noise_on_cavs = n.boolean("on_cavs", c.noise_on_cavs);
    n.finish();
  }
  r.skip("noise");

  if (r.has("controller")) c.controller = controller_from_json(r.child("controller"));
  r.skip("controller");

  if (r.has("fail_safe")) {
    detail::JsonReader f(r.child("fail_safe"), "fail_safe");
    auto& fs = c.fail_safe;
    fs.enabled = f.boolean("enabled", fs.enabled);
    fs.bounds.min = f.number("accel_min", fs.bounds.min);
    fs.bounds.max = f.number("accel_max", fs.bounds.max);
    fs.min_gap = f.number("min_gap", fs.min_gap);
    fs.road_speed_limit = f.number("road_speed_limit", fs.road_speed_limit);
    fs.anticipation_decel = f.number("anticipation_decel", fs.anticipation_decel);
    f.finish();
  }
  r.skip("fail_safe");

  if (!r.has("geometry")) throw ValidationError("geometry", "missing");
  detail::JsonReader g(r.child("geometry"), "geometry");
  const std::string type = g.string("type");
  if (type == "ring") {
    RingGeometry ring;
    const double n = g.number("n_vehicles", ring.n_vehicles);
    if (n != std::floor(n) || n < 1) throw ValidationError("geometry.n_vehicles", "must be a positive integer");
    ring.n_vehicles = static_cast<int>(n);
    if (g.has("equilibrium_speed")) {
      const double v = g.number("equilibrium_speed");
      try {
        ring.length = ring_length_for_speed(v, ring.n_vehicles, c.human_idm, c.vehicle_length);
      } catch (const NoEquilibriumError&) {
        throw ValidationError("geometry.equilibrium_speed", "must be in [0, human_idm.v0)");
      }
      if (g.has("length")) throw ValidationError("geometry.length", "give either length or equilibrium_speed");
    } else {
      ring.length = g.number("length", ring.length);
    }
    g.skip("equilibrium_speed");
    c.geometry = ring;
  } else if (type == "stretch") {
    StretchGeometry s;
    s.length = g.number("length", s.length);
    s.inflow = g.number("inflow", s.inflow);
    s.bottleneck_speed = g.number("bottleneck_speed", s.bottleneck_speed);
    s.upstream_buffer = g.number("upstream_buffer", s.upstream_buffer);
    s.downstream_buffer = g.number("downstream_buffer", s.downstream_buffer);
    s.depart_speed = g.number("depart_speed", s.depart_speed);
    c.geometry = s;
  } else {
    throw ValidationError("geometry.type", "expected ring or stretch");
  }
  g.finish();
  r.finish();
  validate(c);
  return c;
}

}  // namespace wavebench
