#pragma once

// Linear string-stability analysis of car-following models around uniform
// flow: partial derivatives at equilibrium, the perturbation transfer
// function, the algebraic stability criterion, and fundamental-diagram scans.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "wavebench/cfm.hpp"
#include "wavebench/error.hpp"

namespace wavebench {

inline constexpr double kDefaultVehicleLength = 5.0;  // [m]

struct LinearizedCfm {
  double alpha1 = 0.0;  ///< df/ds [1/s^2]
  double alpha2 = 0.0;  ///< df/d(dv) - df/dv [1/s]
  double alpha3 = 0.0;  ///< df/d(dv) [1/s]
  double lambda = 0.0;  ///< alpha2^2 - alpha3^2 - 2 alpha1 [1/s^2]
  double v_eq = 0.0;
  double s_eq = 0.0;

  static LinearizedCfm from_alphas(double a1, double a2, double a3, double v_eq = 0.0,
                                   double s_eq = 0.0) {
    return {a1, a2, a3, a2 * a2 - a3 * a3 - 2.0 * a1, v_eq, s_eq};
  }
};

struct FundamentalDiagramPoint {
  double density = 0.0;  ///< [veh/km]
  double flow = 0.0;     ///< [veh/hr]
  double speed = 0.0;    ///< [m/s]
  bool stable = false;
  double lambda = 0.0;
};

namespace detail {

inline void require_linearizable_speed(double v_eq, double v0) {
  if (v_eq >= v0) throw NoEquilibriumError("linearize: v_eq must be < v0");
  if (!(v_eq > 0)) throw ValidationError("v_eq", "must be > 0");
}

inline double fd_step(double x) { return 1e-6 * std::max(1.0, std::abs(x)); }

/// Symmetric derivative of g at x from central differences with steps h and
/// 2h: 2 D(h) - D(2h). Equals the mean of the second-order one-sided
/// differences, so it stays accurate when g has a kink at x.
template <class G>
double symmetric_derivative(G&& g, double x, double h) {
  const double d1 = (g(x + h) - g(x - h)) / (2 * h);
  const double d2 = (g(x + 2 * h) - g(x - 2 * h)) / (4 * h);
  return 2 * d1 - d2;
}

}  // namespace detail

/// Analytic linearization of the IDM at (s_eq(v_eq), v_eq, 0).
inline LinearizedCfm linearize(const IdmParams& p, double v_eq) {
  detail::require_linearizable_speed(v_eq, p.v0);
  const double s = equilibrium_gap(v_eq, p);
  const double s_star = p.s0 + v_eq * p.T;
  const double sqrt_ab = std::sqrt(p.a * p.b);

  const double df_ds = 2.0 * p.a * s_star * s_star / (s * s * s);
  const double df_dv = -p.a * (p.delta * std::pow(v_eq, p.delta - 1.0) / std::pow(p.v0, p.delta) +
                               2.0 * s_star * p.T / (s * s));
  // The max{0, .} term has a kink at dv = 0. Use the symmetric derivative,
  // i.e. the mean of the one-sided slopes, which is also what central
  // differences return.
  const double df_ddv = 0.5 * p.a * s_star * v_eq / (s * s * sqrt_ab);
  return LinearizedCfm::from_alphas(df_ds, df_ddv - df_dv, df_ddv, v_eq, s);
}

/// Central finite-difference linearization of an arbitrary model.
template <CarFollowingModel M>
LinearizedCfm linearize_fd(const M& model, double v_eq) {
  if (!(v_eq > 0)) throw ValidationError("v_eq", "must be > 0");
  const double s = model.equilibrium_gap(v_eq);  // throws NoEquilibriumError past v0
  const double hs = detail::fd_step(s);
  const double hv = detail::fd_step(v_eq);
  const double hdv = detail::fd_step(0.0);
  auto f = [&](double gap, double v, double dv) { return model.accel(CfmInput{gap, v, dv}); };

  const double df_ds = detail::symmetric_derivative([&](double x) { return f(x, v_eq, 0); }, s, hs);
  const double df_dv = detail::symmetric_derivative([&](double x) { return f(s, x, 0); }, v_eq, hv);
  const double df_ddv = detail::symmetric_derivative([&](double x) { return f(s, v_eq, x); }, 0.0, hdv);
  return LinearizedCfm::from_alphas(df_ds, df_ddv - df_dv, df_ddv, v_eq, s);
}

template <CarFollowingModel M>
LinearizedCfm linearize(const M& model, double v_eq) {
  return linearize_fd(model, v_eq);
}

/// |F(i w)| with F(z) = (a1 + a3 z) / (a1 + a2 z + z^2).
inline double transfer_gain(const LinearizedCfm& lin, double omega_im) {
  using C = std::complex<double>;
  const C z{0.0, omega_im};
  const C num = lin.alpha1 + lin.alpha3 * z;
  const C den = lin.alpha1 + lin.alpha2 * z + z * z;
  if (std::abs(den) < 1e-300) throw SingularTransferError("transfer_gain: singular denominator");
  return std::abs(num) / std::abs(den);
}

/// Algebraic string-stability criterion: lambda >= 0.
inline bool string_stable(const LinearizedCfm& lin) { return lin.lambda >= 0; }

namespace detail {

inline double equilibrium_gap_of(const IdmParams& p, double v) { return equilibrium_gap(v, p); }
template <CarFollowingModel M>
double equilibrium_gap_of(const M& m, double v) {
  return m.equilibrium_gap(v);
}

}  // namespace detail

/// Equilibrium fundamental diagram with a stability verdict per speed.
/// `model` is either an `IdmParams` (analytic path) or any `CarFollowingModel`.
template <typename Model>
std::vector<FundamentalDiagramPoint> critical_density_scan(
    const Model& model, std::span<const double> v_grid,
    double vehicle_length = kDefaultVehicleLength) {
  if (!(vehicle_length >= 0)) throw ValidationError("vehicle_length", "must be >= 0");
  for (std::size_t i = 0; i < v_grid.size(); ++i) {
    if (!(v_grid[i] > 0)) throw ValidationError("v_grid", "speeds must be > 0");
    if (i > 0 && !(v_grid[i] > v_grid[i - 1])) {
      throw ValidationError("v_grid", "must be strictly increasing");
    }
  }
  std::vector<FundamentalDiagramPoint> out;
  out.reserve(v_grid.size());
  for (double v : v_grid) {
    const LinearizedCfm lin = linearize(model, v);
    const double spacing = detail::equilibrium_gap_of(model, v) + vehicle_length;
    out.push_back({1000.0 / spacing, 3600.0 * v / spacing, v, string_stable(lin), lin.lambda});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& l, const auto& r) { return l.density < r.density; });
  return out;
}

struct UnstableBand {
  double v_min = 0.0;
  double v_max = 0.0;
  double density_min = 0.0;
  double density_max = 0.0;
  bool contiguous = true;  ///< no stable point between v_min and v_max
};

/// Speed/density range spanned by unstable scan points, if any.
inline std::optional<UnstableBand> unstable_band(std::span<const FundamentalDiagramPoint> pts) {
  std::vector<FundamentalDiagramPoint> by_speed(pts.begin(), pts.end());
  std::sort(by_speed.begin(), by_speed.end(),
            [](const auto& l, const auto& r) { return l.speed < r.speed; });
  std::optional<UnstableBand> band;
  std::size_t first = 0, last = 0;
  for (std::size_t i = 0; i < by_speed.size(); ++i) {
    if (by_speed[i].stable) continue;
    if (!band) {
      band = UnstableBand{};
      first = i;
    }
    last = i;
  }
  if (!band) return band;
  band->v_min = by_speed[first].speed;
  band->v_max = by_speed[last].speed;
  band->density_min = by_speed[last].density;
  band->density_max = by_speed[first].density;
  for (std::size_t i = first; i <= last; ++i) band->contiguous &= !by_speed[i].stable;
  return band;
}

inline void write_fundamental_diagram_csv(std::ostream& os,
                                          std::span<const FundamentalDiagramPoint> pts) {
  os << "density_veh_km,flow_veh_hr,speed_m_s,stable\n";
  char buf[128];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%s\n", p.density, p.flow, p.speed,
                  p.stable ? "true" : "false");
    os << buf;
  }
}

}  // namespace wavebench
