#pragma once

// Placeholder energy models. These are NOT validated against any vehicle
// data: each class is a road-load power balance (rolling + aero + inertia)
// divided by an effective heating value, plus an idle floor, and the shipped
// polynomial is a fit to that surrogate. Only the pipeline, not the numbers,
// is meant to be realistic.

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "wavebench/energy.hpp"

namespace wavebench {

struct VehiclePhysics {
  std::string class_name;
  double mass = 1500.0;            ///< [kg], half load
  double drag_area = 0.7;          ///< Cd * A [m^2]
  double rolling = 0.009;          ///< rolling resistance coefficient
  double idle_rate = 0.3;          ///< [g/s]
  double efficiency = 0.3;         ///< engine-to-wheel
  double heating_value = 43.0e3;   ///< [J/g]
  double max_power = 120.0e3;      ///< [W]
  double max_traction = 3.5;       ///< [m/s^2]
  double transient_penalty = 0.05; ///< extra [g/s] per (m/s^2)^2 of positive acceleration
  double grams_per_gallon = kGasolineGramsPerGallon;
};

inline constexpr double kAirDensity = 1.2;
inline constexpr double kGravity = 9.81;

inline double surrogate_resistance(const VehiclePhysics& ph, double v) {
  return 0.5 * kAirDensity * ph.drag_area * v * v + ph.rolling * ph.mass * kGravity;
}

/// Fuel rate [g/s] of the surrogate at (v, a) on flat road.
inline double surrogate_fuel_rate(const VehiclePhysics& ph, double v, double a) {
  const double power = (ph.mass * a + surrogate_resistance(ph, v)) * v;
  const double ap = std::max(a, 0.0);
  const double burn = power / (ph.efficiency * ph.heating_value) +
                      ph.transient_penalty * ap * ap * (1.0 + v / 20.0);
  return ph.idle_rate + std::max(0.0, burn);
}

/// Largest acceleration the surrogate powertrain can deliver at speed v.
inline double surrogate_max_accel(const VehiclePhysics& ph, double v) {
  const double power_limited =
      (ph.max_power / std::max(v, 1.0) - surrogate_resistance(ph, v)) / ph.mass;
  return std::min(ph.max_traction, power_limited);
}

inline FeasibilityBoundary surrogate_boundary(const VehiclePhysics& ph) {
  std::vector<double> v, g;
  for (int i = 0; i <= 20; ++i) {
    v.push_back(2.0 * i);
    g.push_back(surrogate_max_accel(ph, 2.0 * i));
  }
  return {std::move(v), std::move(g)};
}

/// Feasible (v, a) grid samples of the surrogate.
inline std::vector<FuelSample> surrogate_samples(const VehiclePhysics& ph) {
  std::vector<FuelSample> out;
  for (int i = 0; i <= 40; ++i) {
    const double v = 0.875 * i;  // 0 .. 35 m/s
    for (int k = 0; k <= 30; ++k) {
      const double a = -3.0 + 0.2 * k;  // -3 .. 3 m/s^2
      if (a > surrogate_max_accel(ph, v)) continue;
      out.push_back({v, a, surrogate_fuel_rate(ph, v, a)});
    }
  }
  return out;
}

inline PolyEnergyModel placeholder_model(const VehiclePhysics& ph) {
  const auto samples = surrogate_samples(ph);
  PolyEnergyModel m = fit_poly(samples, ph.idle_rate).model;
  m.class_name = ph.class_name;
  m.grams_per_gallon = ph.grams_per_gallon;
  m.boundary = surrogate_boundary(ph);
  return m;
}

struct PortfolioClass {
  VehiclePhysics physics;
  double share = 0.0;  ///< human road share; ignored for the CAV class
};

/// Human classes with their road shares.
inline std::vector<PortfolioClass> default_human_classes() {
  return {
      {{"compact_sedan", 1400, 0.62, 0.009, 0.25, 0.30, 43.0e3, 110e3, 3.5, 0.04}, 0.2359},
      {{"midsize_sedan", 1600, 0.68, 0.009, 0.30, 0.30, 43.0e3, 140e3, 3.5, 0.05}, 0.3292},
      {{"midsize_suv", 1900, 0.95, 0.010, 0.35, 0.28, 43.0e3, 150e3, 3.5, 0.06}, 0.1756},
      {{"midsize_pickup", 2300, 1.20, 0.011, 0.45, 0.27, 43.0e3, 200e3, 3.5, 0.08}, 0.1032},
      {{"class3_pnd", 5000, 2.50, 0.008, 0.60, 0.33, 42.6e3, 150e3, 2.5, 0.15,
        kDieselGramsPerGallon},
       0.1561},
  };
}

/// Automated vehicles are scored with the RAV4 class.
inline VehiclePhysics default_cav_physics() {
  return {"rav4", 1750, 0.86, 0.0095, 0.30, 0.31, 43.0e3, 150e3, 3.5, 0.05};
}

/// Portfolio of placeholder models, fitted on first use.
inline const VehiclePortfolio& default_portfolio() {
  static const VehiclePortfolio portfolio = [] {
    std::vector<PortfolioEntry> humans;
    for (const auto& c : default_human_classes()) {
      humans.push_back({c.physics.class_name,
                        std::make_shared<const PolyEnergyModel>(placeholder_model(c.physics)),
                        c.share});
    }
    const auto cav = default_cav_physics();
    return VehiclePortfolio(
        std::move(humans),
        {cav.class_name, std::make_shared<const PolyEnergyModel>(placeholder_model(cav)), 0.0});
  }();
  return portfolio;
}

}  // namespace wavebench
