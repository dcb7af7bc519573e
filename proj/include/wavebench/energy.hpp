#pragma once

// Vehicle fuel-consumption models: the capped cubic polynomial in (v, a), its
// feasibility boundary g(v), non-negative least-squares fitting, and fuel/mpg
// aggregation over single vehicles and whole fleets.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wavebench/error.hpp"
#include "wavebench/nnls.hpp"

namespace wavebench {

inline constexpr double kMetersPerMile = 1609.344;
inline constexpr double kGasolineGramsPerGallon = 2839.0;
inline constexpr double kDieselGramsPerGallon = 3192.0;

/// Unit of a model's fuel-rate output.
enum class FuelUnit { GramsPerSecond, GallonsPerHour };

inline const char* to_string(FuelUnit u) {
  return u == FuelUnit::GramsPerSecond ? "g/s" : "gal/hr";
}

inline FuelUnit fuel_unit_from_string(const std::string& s) {
  if (s == "g/s") return FuelUnit::GramsPerSecond;
  if (s == "gal/hr") return FuelUnit::GallonsPerHour;
  throw ValidationError("unit", "unknown fuel unit '" + s + "' (expected g/s or gal/hr)");
}

struct EnergyQuery {
  double v = 0.0;      ///< [m/s]
  double a = 0.0;      ///< noise-free commanded acceleration [m/s^2]
  double theta = 0.0;  ///< road grade [rad]
};

/// Common surface of all energy models. `gallons()` converts an integrated
/// amount (rate * seconds, in the model's own unit) to US gallons.
class EnergyModel {
public:
  virtual ~EnergyModel() = default;
  virtual double fuel_rate(const EnergyQuery& q) const = 0;
  virtual bool is_feasible(double v, double a) const = 0;
  virtual double gallons(double rate_seconds) const = 0;
};

/// Maximum feasible acceleration g(v) as a piecewise-linear table, held
/// constant outside the tabulated range. An empty table means unconstrained.
class FeasibilityBoundary {
public:
  FeasibilityBoundary() = default;
  FeasibilityBoundary(std::vector<double> v, std::vector<double> g) : v_(std::move(v)), g_(std::move(g)) {
    if (v_.size() != g_.size()) throw ValidationError("boundary", "v and g must have equal length");
    for (std::size_t i = 0; i < v_.size(); ++i) {
      if (!std::isfinite(v_[i]) || !std::isfinite(g_[i])) {
        throw ValidationError("boundary", "values must be finite");
      }
      if (i > 0 && !(v_[i] > v_[i - 1])) {
        throw ValidationError("boundary.v", "must be strictly increasing");
      }
    }
  }

  double operator()(double v) const {
    if (v_.empty()) return std::numeric_limits<double>::infinity();
    if (v <= v_.front()) return g_.front();
    if (v >= v_.back()) return g_.back();
    const auto it = std::upper_bound(v_.begin(), v_.end(), v);
    const auto i = static_cast<std::size_t>(it - v_.begin());
    const double w = (v - v_[i - 1]) / (v_[i] - v_[i - 1]);
    return g_[i - 1] + w * (g_[i] - g_[i - 1]);
  }

  const std::vector<double>& speeds() const noexcept { return v_; }
  const std::vector<double>& accels() const noexcept { return g_; }
  bool empty() const noexcept { return v_.empty(); }

private:
  std::vector<double> v_;
  std::vector<double> g_;
};

/// f(v, a) = max{C0 + C1 v + C2 v^2 + C3 v^3 + p0 a + p1 a v + p2 a v^2
///               + q0 a+^2 + q1 a+^2 v, beta},   a+ = max{a, 0}.
/// Road grade is accepted but does not enter this model form.
struct PolyEnergyModel final : EnergyModel {
  std::string class_name;
  FuelUnit unit = FuelUnit::GramsPerSecond;
  double grams_per_gallon = kGasolineGramsPerGallon;
  std::array<double, 4> C{};
  std::array<double, 3> p{};
  std::array<double, 2> q{};
  double beta = 0.0;
  FeasibilityBoundary boundary;

  static constexpr std::size_t kNumCoefficients = 9;

  /// Coefficients in fitting order (C0..C3, p0..p2, q0, q1).
  std::array<double, kNumCoefficients> coefficients() const {
    return {C[0], C[1], C[2], C[3], p[0], p[1], p[2], q[0], q[1]};
  }

  void set_coefficients(std::span<const double, kNumCoefficients> c) {
    std::copy_n(c.begin(), 4, C.begin());
    std::copy_n(c.begin() + 4, 3, p.begin());
    std::copy_n(c.begin() + 7, 2, q.begin());
  }

  /// Regressors matching `coefficients()`.
  static std::array<double, kNumCoefficients> basis(double v, double a) {
    const double ap = std::max(a, 0.0);
    return {1.0, v, v * v, v * v * v, a, a * v, a * v * v, ap * ap, ap * ap * v};
  }

  double polynomial(double v, double a) const {
    const auto phi = basis(v, a);
    const auto c = coefficients();
    double sum = 0.0;
    for (std::size_t i = 0; i < kNumCoefficients; ++i) sum += c[i] * phi[i];
    return sum;
  }

  double fuel_rate(const EnergyQuery& query) const override {
    return std::max(polynomial(query.v, query.a), beta);
  }

  bool is_feasible(double v, double a) const override { return a <= boundary(v); }

  double gallons(double rate_seconds) const override {
    if (unit == FuelUnit::GallonsPerHour) return rate_seconds / 3600.0;
    return rate_seconds / grams_per_gallon;
  }

  void validate() const {
    for (double c : coefficients()) {
      if (!(c >= 0)) throw ValidationError("coefficients", "must all be >= 0");
    }
    detail::require(beta >= 0, "beta", "must be >= 0");
    detail::require(grams_per_gallon > 0, "fuel_density_g_per_gal", "must be > 0");
  }
};

/// Polynomial coefficients estimated by `fit_poly`; beta is supplied.
inline constexpr std::size_t kFitParameters = PolyEnergyModel::kNumCoefficients;
inline constexpr std::size_t kMinFitSamples = 10;

inline double fuel_rate(const PolyEnergyModel& m, const EnergyQuery& q) { return m.fuel_rate(q); }
inline bool is_feasible(const PolyEnergyModel& m, double v, double a) { return m.is_feasible(v, a); }

struct FuelSample {
  double v = 0.0;
  double a = 0.0;
  double rate = 0.0;
};

struct FitResult {
  PolyEnergyModel model;
  double residual_norm = 0.0;
  std::size_t samples_used = 0;
  bool rank_deficient = false;
};

/// Non-negative least-squares fit of the uncapped polynomial to samples lying
/// strictly above the floor `beta`; the floor is reapplied at evaluation.
inline FitResult fit_poly(std::span<const FuelSample> samples, double beta) {
  detail::require(beta >= 0, "beta", "must be >= 0");
  if (samples.size() < kMinFitSamples) {
    throw ValidationError("samples", "need at least " + std::to_string(kMinFitSamples) + " samples");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.v) || !std::isfinite(s.a) || !std::isfinite(s.rate)) {
      throw ValidationError("samples[" + std::to_string(i) + "]", "non-finite value");
    }
    if (s.rate < beta) {
      throw ValidationError("samples[" + std::to_string(i) + "]", "fuel rate below beta");
    }
  }

  std::vector<const FuelSample*> used;
  for (const auto& s : samples) {
    if (s.rate > beta) used.push_back(&s);
  }

  FitResult out;
  out.model.beta = beta;
  out.samples_used = used.size();
  if (used.empty()) {
    out.rank_deficient = true;
    return out;
  }

  const auto rows = static_cast<Eigen::Index>(used.size());
  const auto cols = static_cast<Eigen::Index>(kFitParameters);
  Eigen::MatrixXd A(rows, cols);
  Eigen::VectorXd b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto phi = PolyEnergyModel::basis(used[static_cast<std::size_t>(r)]->v,
                                            used[static_cast<std::size_t>(r)]->a);
    for (Eigen::Index c = 0; c < cols; ++c) A(r, c) = phi[static_cast<std::size_t>(c)];
    b(r) = used[static_cast<std::size_t>(r)]->rate;
  }

  Eigen::VectorXd norms = A.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (norms(c) == 0) norms(c) = 1.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A * norms.cwiseInverse().asDiagonal());
  qr.setThreshold(1e-10);
  out.rank_deficient = qr.rank() < cols;

  const NnlsResult sol = nnls(A, b);
  std::array<double, PolyEnergyModel::kNumCoefficients> c{};
  for (Eigen::Index i = 0; i < cols; ++i) c[static_cast<std::size_t>(i)] = std::max(0.0, sol.x(i));
  out.model.set_coefficients(c);
  out.residual_norm = sol.residual_norm;
  return out;
}

struct TrajectorySample {
  double t = 0.0;
  double v = 0.0;
  double a = 0.0;  ///< noise-free commanded acceleration
};

/// mpg reported when no fuel was burned.
inline constexpr double kMpgInfinite = std::numeric_limits<double>::infinity();

struct FuelTotals {
  double gallons = 0.0;
  double miles = 0.0;
  double mpg = kMpgInfinite;

  FuelTotals& operator+=(const FuelTotals& o) {
    gallons += o.gallons;
    miles += o.miles;
    mpg = gallons > 0 ? miles / gallons : kMpgInfinite;
    return *this;
  }
};

/// Fuel, distance, and mpg of one vehicle sampled every `dt` seconds. Each
/// sample covers the interval [t, t + dt).
inline FuelTotals trajectory_fuel(const EnergyModel& model, std::span<const TrajectorySample> traj,
                                  double dt) {
  detail::require(dt > 0, "dt", "must be > 0");
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double step = traj[i].t - traj[i - 1].t;
    if (!(step > 0) || std::abs(step - dt) > 1e-9 * std::max(1.0, dt)) {
      throw NonUniformTimestampsError("trajectory_fuel: timestamps must be uniform with step dt");
    }
  }
  double rate_seconds = 0.0;
  double meters = 0.0;
  for (const auto& s : traj) {
    rate_seconds += model.fuel_rate({s.v, s.a, 0.0}) * dt;
    meters += s.v * dt;
  }
  FuelTotals out;
  out.gallons = model.gallons(rate_seconds);
  out.miles = meters / kMetersPerMile;
  out.mpg = out.gallons > 0 ? out.miles / out.gallons : kMpgInfinite;
  return out;
}

struct PortfolioEntry {
  std::string class_name;
  std::shared_ptr<const EnergyModel> model;
  double share = 0.0;
};

/// Human-vehicle classes with their road shares, plus the class automated
/// vehicles are scored with.
class VehiclePortfolio {
public:
  VehiclePortfolio() = default;
  VehiclePortfolio(std::vector<PortfolioEntry> humans, PortfolioEntry cav)
      : humans_(std::move(humans)), cav_(std::move(cav)) {
    if (humans_.empty()) throw ValidationError("portfolio", "needs at least one human class");
    double total = 0.0;
    for (const auto& e : humans_) {
      if (!e.model) throw ValidationError("portfolio." + e.class_name, "missing model");
      if (!(e.share >= 0)) throw ValidationError("portfolio." + e.class_name + ".share", "must be >= 0");
      total += e.share;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("portfolio", "human shares must sum to 1");
    }
    if (!cav_.model) throw ValidationError("portfolio." + cav_.class_name, "missing CAV model");
  }

  /// Maps a uniform draw u in [0, 1) to a human class by cumulative share.
  const std::string& draw_human_class(double u) const {
    double acc = 0.0;
    for (const auto& e : humans_) {
      acc += e.share;
      if (u < acc && e.share > 0) return e.class_name;
    }
    for (auto it = humans_.rbegin(); it != humans_.rend(); ++it) {
      if (it->share > 0) return it->class_name;
    }
    return humans_.back().class_name;
  }

  const EnergyModel& model_for(const std::string& class_name) const {
    if (class_name == cav_.class_name) return *cav_.model;
    for (const auto& e : humans_) {
      if (e.class_name == class_name) return *e.model;
    }
    throw UnknownClassError("unknown vehicle class '" + class_name + "'");
  }

  bool contains(const std::string& class_name) const {
    if (class_name == cav_.class_name) return true;
    return std::any_of(humans_.begin(), humans_.end(),
                       [&](const auto& e) { return e.class_name == class_name; });
  }

  const std::vector<PortfolioEntry>& humans() const noexcept { return humans_; }
  const PortfolioEntry& cav() const noexcept { return cav_; }

private:
  std::vector<PortfolioEntry> humans_;
  PortfolioEntry cav_;
};

struct VehicleTrajectory {
  std::string class_name;
  std::vector<TrajectorySample> samples;
};

struct FleetFuel {
  FuelTotals total;
  std::map<std::string, FuelTotals> per_class;
};

/// System fuel economy: total fleet miles over total fleet gallons.
inline FleetFuel fleet_fuel(const VehiclePortfolio& portfolio,
                            std::span<const VehicleTrajectory> vehicles, double dt) {
  FleetFuel out;
  for (const auto& veh : vehicles) {
    const FuelTotals f = trajectory_fuel(portfolio.model_for(veh.class_name), veh.samples, dt);
    out.total += f;
    out.per_class[veh.class_name] += f;
  }
  return out;
}

inline double fleet_mpg(const VehiclePortfolio& portfolio, std::span<const VehicleTrajectory> vehicles,
                        double dt) {
  return fleet_fuel(portfolio, vehicles, dt).total.mpg;
}

}  // namespace wavebench
