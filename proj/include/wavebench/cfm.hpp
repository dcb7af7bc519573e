#pragma once

// Car-following model evaluation: the Intelligent Driver Model, its
// equilibrium gap, and the model concept used by the stability module.
//
// Sign convention: `dv` is always v_leader - v_ego, so that the gap evolves as
// ds/dt = dv. The IDM interaction term uses the closing rate -dv (positive when
// the ego vehicle is catching up).

#include <algorithm>
#include <cmath>
#include <concepts>

#include "wavebench/error.hpp"

namespace wavebench {

struct CfmInput {
  double gap = 0.0;    ///< bumper-to-bumper space gap to the leader [m]
  double speed = 0.0;  ///< ego speed [m/s]
  double dv = 0.0;     ///< v_leader - v_ego [m/s]
};

struct IdmParams {
  double a = 1.3;      ///< maximum acceleration [m/s^2]
  double b = 2.0;      ///< comfortable deceleration [m/s^2]
  double v0 = 30.0;    ///< desired speed [m/s]
  double delta = 4.0;  ///< free-road exponent
  double T = 1.0;      ///< time headway [s]
  double s0 = 1.0;     ///< jam gap [m]

  bool operator==(const IdmParams&) const = default;
};

/// The human-driver parameter set used throughout the benchmark.
inline constexpr IdmParams kBenchmarkIdm{1.3, 2.0, 30.0, 4.0, 1.0, 1.0};

inline void validate(const IdmParams& p, const char* prefix = "idm") {
  auto field = [&](const char* name) { return std::string(prefix) + "." + name; };
  if (!(p.a > 0)) throw ValidationError(field("a"), "must be > 0");
  if (!(p.b > 0)) throw ValidationError(field("b"), "must be > 0");
  if (!(p.v0 > 0)) throw ValidationError(field("v0"), "must be > 0");
  if (!(p.delta > 0)) throw ValidationError(field("delta"), "must be > 0");
  if (!(p.T >= 0)) throw ValidationError(field("T"), "must be >= 0");
  if (!(p.s0 > 0)) throw ValidationError(field("s0"), "must be > 0");
}

/// s*(v, dv) = s0 + vT + max{0, v * closing} / (2 sqrt(ab)), closing = -dv.
inline double idm_desired_gap(double v, double dv, const IdmParams& p) {
  const double closing = -dv;
  return p.s0 + v * p.T + std::max(0.0, v * closing) / (2.0 * std::sqrt(p.a * p.b));
}

/// Unclamped IDM acceleration.
inline double idm_accel_raw(const CfmInput& in, const IdmParams& p) {
  if (!(in.gap > 0)) throw DegenerateGapError("idm: space gap must be > 0");
  const double ratio = idm_desired_gap(in.speed, in.dv, p) / in.gap;
  return p.a * (1.0 - std::pow(in.speed / p.v0, p.delta) - ratio * ratio);
}

/// IDM acceleration with the standstill rule: a negative value at v = 0 is
/// replaced by zero.
inline double idm_accel(const CfmInput& in, const IdmParams& p) {
  const double raw = idm_accel_raw(in, p);
  if (raw < 0 && in.speed == 0) return 0.0;
  return raw;
}

/// Gap at which the IDM is in equilibrium at speed v with dv = 0.
inline double equilibrium_gap(double v, const IdmParams& p) {
  if (!(v >= 0) || !(v < p.v0)) {
    throw NoEquilibriumError("idm: equilibrium gap requires 0 <= v < v0");
  }
  return (p.s0 + v * p.T) / std::sqrt(1.0 - std::pow(v / p.v0, p.delta));
}

/// Inverse of `equilibrium_gap`: the speed at which `gap` is an IDM
/// equilibrium. Gaps at or below s0 map to 0.
inline double equilibrium_speed(double gap, const IdmParams& p) {
  if (gap <= p.s0) return 0.0;
  double lo = 0.0, hi = p.v0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * p.v0; ++i) {
    const double mid = 0.5 * (lo + hi);
    (equilibrium_gap(mid, p) < gap ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Anything the stability module can linearize: a smooth acceleration law and
/// its equilibrium gap.
template <typename M>
concept CarFollowingModel = requires(const M& m, const CfmInput& in, double v) {
  { m.accel(in) } -> std::convertible_to<double>;
  { m.equilibrium_gap(v) } -> std::convertible_to<double>;
};

/// The IDM as a `CarFollowingModel` (raw, unclamped acceleration).
struct Idm {
  IdmParams params = kBenchmarkIdm;
  double accel(const CfmInput& in) const { return idm_accel_raw(in, params); }
  double equilibrium_gap(double v) const { return wavebench::equilibrium_gap(v, params); }
};

static_assert(CarFollowingModel<Idm>);

}  // namespace wavebench
