#pragma once

// Longitudinal flow-smoothing controllers for automated vehicles:
// FollowerStopper (target-speed bands) and IDM with relaxation toward a
// desired speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <variant>

#include "wavebench/cfm.hpp"
#include "wavebench/error.hpp"

namespace wavebench {

struct AccelBounds {
  double min = -4.5;  ///< [m/s^2]
  double max = 3.0;   ///< [m/s^2]
};

struct FollowerStopperSpec {
  double v_desired = 5.0;
  std::array<double, 3> dx0{4.5, 5.25, 6.0};    ///< band offsets [m]
  std::array<double, 3> decel{1.5, 1.0, 0.5};   ///< band curvature [m/s^2]
};

struct IdmRelaxationSpec {
  double v_desired = 5.0;
  double gamma = 0.5;  ///< [1/s]
  IdmParams idm = kBenchmarkIdm;
};

using ControllerSpec = std::variant<FollowerStopperSpec, IdmRelaxationSpec>;

inline void validate(const FollowerStopperSpec& s) {
  detail::require(s.v_desired > 0, "controller.v_desired", "must be > 0");
  for (std::size_t k = 0; k < 3; ++k) {
    detail::require(s.decel[k] > 0, "controller.decel", "must be > 0");
    if (k > 0) {
      detail::require(s.dx0[k] > s.dx0[k - 1], "controller.dx0", "must be strictly increasing");
      // Boundaries stay ordered for every speed difference only if the
      // quadratic coefficients 1/(2 d_k) grow with k.
      detail::require(s.decel[k] < s.decel[k - 1], "controller.decel",
                      "must be strictly decreasing (outer bands are gentler)");
    }
  }
}

inline void validate(const IdmRelaxationSpec& s) {
  detail::require(s.v_desired > 0, "controller.v_desired", "must be > 0");
  detail::require(s.gamma > 0, "controller.gamma", "must be > 0");
  validate(s.idm, "controller.idm");
}

inline void validate(const ControllerSpec& spec) {
  std::visit([](const auto& s) { validate(s); }, spec);
}

/// f_IDM + gamma (v_desired - v); the standstill rule applies to the sum.
inline double idm_relaxation_accel(const CfmInput& in, const IdmRelaxationSpec& spec) {
  const double total = idm_accel_raw(in, spec.idm) + spec.gamma * (spec.v_desired - in.speed);
  if (total < 0 && in.speed == 0) return 0.0;
  return total;
}

/// Band boundaries dx_k = dx0_k + (dv-)^2 / (2 d_k), dv- = min{0, v_lead - v}.
inline std::array<double, 3> follower_stopper_bands(double dv, const FollowerStopperSpec& spec) {
  const double closing = std::min(0.0, dv);
  std::array<double, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) {
    out[k] = spec.dx0[k] + closing * closing / (2.0 * spec.decel[k]);
  }
  return out;
}

/// Target speed in [0, v_desired]: stop below the inner band, follow the
/// leader's speed between bands 1 and 2, blend toward v_desired between bands
/// 2 and 3, and cruise at v_desired beyond band 3.
inline double follower_stopper_command(const CfmInput& in, const FollowerStopperSpec& spec) {
  const auto dx = follower_stopper_bands(in.dv, spec);
  const double U = spec.v_desired;
  const double v = std::min(std::max(in.speed + in.dv, 0.0), U);
  const double gap = in.gap;
  if (gap <= dx[0]) return 0.0;
  if (gap <= dx[1]) return v * (gap - dx[0]) / (dx[1] - dx[0]);
  if (gap <= dx[2]) return v + (U - v) * (gap - dx[1]) / (dx[2] - dx[1]);
  return U;
}

struct ControlCommand {
  enum class Kind { TargetSpeed, Acceleration };
  Kind kind = Kind::Acceleration;
  double value = 0.0;

  static ControlCommand target_speed(double v) { return {Kind::TargetSpeed, v}; }
  static ControlCommand acceleration(double a) { return {Kind::Acceleration, a}; }
};

/// Normalizes a command to an acceleration over one step of length dt.
inline double command_to_accel(const ControlCommand& cmd, double v, double dt,
                               const AccelBounds& bounds) {
  detail::require(dt > 0, "dt", "must be > 0");
  const double a = cmd.kind == ControlCommand::Kind::TargetSpeed ? (cmd.value - v) / dt : cmd.value;
  return std::clamp(a, bounds.min, bounds.max);
}

/// Evaluates either controller for one vehicle.
inline ControlCommand controller_command(const ControllerSpec& spec, const CfmInput& in) {
  return std::visit(
      [&](const auto& s) -> ControlCommand {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FollowerStopperSpec>) {
          return ControlCommand::target_speed(follower_stopper_command(in, s));
        } else {
          return ControlCommand::acceleration(idm_relaxation_accel(in, s));
        }
      },
      spec);
}

}  // namespace wavebench
