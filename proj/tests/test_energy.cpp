#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "wavebench/energy.hpp"
#include "wavebench/energy_io.hpp"
#include "wavebench/surrogate.hpp"

using namespace wavebench;

namespace {

// 30 mph in m/s.
constexpr double kThirtyMph = 13.4112;

PolyEnergyModel constant_gph(double gal_per_hr) {
  PolyEnergyModel m;
  m.class_name = "flat";
  m.unit = FuelUnit::GallonsPerHour;
  m.C[0] = gal_per_hr;
  return m;
}

std::vector<TrajectorySample> constant_speed(double v, double seconds, double dt) {
  std::vector<TrajectorySample> out;
  const auto n = static_cast<std::size_t>(std::llround(seconds / dt));
  for (std::size_t i = 0; i < n; ++i) out.push_back({i * dt, v, 0.0});
  return out;
}

PolyEnergyModel generator() {
  PolyEnergyModel m;
  m.C = {0.3, 0.02, 0.001, 2e-5};
  m.p = {0.4, 0.03, 0.0015};
  m.q = {0.1, 0.004};
  m.beta = 0.0;
  return m;
}

// 20 x 20 grid over v in [0, 28.5], a in [a_min, 2].
std::vector<FuelSample> grid_samples(const PolyEnergyModel& m, double a_min = -2.0) {
  std::vector<FuelSample> s;
  for (int i = 0; i < 20; ++i) {
    for (int k = 0; k < 20; ++k) {
      const double v = 1.5 * i;
      const double a = a_min + (2.0 - a_min) * k / 19.0;
      s.push_back({v, a, m.fuel_rate({v, a, 0})});
    }
  }
  return s;
}

}  // namespace

TEST(FuelRate, CapDominatesZeroPolynomial) {
  PolyEnergyModel m;
  m.beta = 0.3;
  for (double v : {0.0, 10.0, 30.0}) {
    for (double a : {-3.0, 0.0, 2.0}) EXPECT_EQ(fuel_rate(m, {v, a, 0}), 0.3);
  }
}

TEST(FuelRate, NegativeAccelerationOnlyThroughLinearTerms) {
  PolyEnergyModel m;
  m.C[0] = 1.0;
  EXPECT_EQ(fuel_rate(m, {10, -5, 0}), 1.0);
}

TEST(FuelRate, ScalarEvaluation) {
  PolyEnergyModel m;
  m.C[1] = 0.1;
  m.p[0] = 0.2;
  m.q[0] = 0.05;
  EXPECT_NEAR(fuel_rate(m, {20, 2, 0}), 2.0 + 0.4 + 0.2, 1e-12);
}

TEST(FuelRate, GradeIsIgnored) {
  const auto m = generator();
  EXPECT_EQ(fuel_rate(m, {12, 0.5, 0.0}), fuel_rate(m, {12, 0.5, 0.05}));
}

TEST(FuelRate, NeverBelowBeta) {
  auto m = generator();
  m.beta = 0.25;
  m.p = {0.4, 0.03, 0.0015};
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> v(0, 60), a(-20, 20);
  for (int i = 0; i < 100000; ++i) EXPECT_GE(fuel_rate(m, {v(rng), a(rng), 0}), m.beta);
  EXPECT_GE(fuel_rate(m, {0, -1e6, 0}), m.beta);
  EXPECT_GE(fuel_rate(m, {1e3, 1e3, 0}), m.beta);
}

TEST(FuelRate, PolynomialNonDecreasingInPositiveAcceleration) {
  const auto m = generator();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> v(0, 40), a(0, 4), da(0, 1);
  for (int i = 0; i < 10000; ++i) {
    const double vv = v(rng), aa = a(rng);
    EXPECT_GE(m.polynomial(vv, aa + da(rng)), m.polynomial(vv, aa));
  }
}

TEST(Feasibility, BoundaryIsInclusive) {
  PolyEnergyModel m;
  m.boundary = FeasibilityBoundary({0, 10, 30}, {3.0, 2.0, 0.5});
  EXPECT_TRUE(is_feasible(m, 5, m.boundary(5)));
  EXPECT_FALSE(is_feasible(m, 5, m.boundary(5) + 0.01));
  EXPECT_DOUBLE_EQ(m.boundary(5), 2.5);
  EXPECT_DOUBLE_EQ(m.boundary(40), 0.5);
}

TEST(Feasibility, BrakingAlwaysFeasible) {
  const auto m = placeholder_model(default_cav_physics());
  for (double v = 0; v <= 40; v += 0.5) EXPECT_TRUE(is_feasible(m, v, -8.0));
}

TEST(Feasibility, EmptyBoundaryIsUnconstrained) {
  PolyEnergyModel m;
  EXPECT_TRUE(is_feasible(m, 10, 100.0));
}

TEST(Feasibility, RejectsMalformedTable) {
  EXPECT_THROW(FeasibilityBoundary({0, 1}, {1}), ValidationError);
  EXPECT_THROW(FeasibilityBoundary({1, 1}, {1, 1}), ValidationError);
}

TEST(FitPoly, RecoversExactCoefficients) {
  const auto gen = generator();
  const auto fit = fit_poly(grid_samples(gen), 0.0);
  EXPECT_FALSE(fit.rank_deficient);
  const auto want = gen.coefficients();
  const auto got = fit.model.coefficients();
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_LT(std::abs(got[i] - want[i]) / want[i], 1e-6) << i;
  }
  EXPECT_LT(fit.residual_norm, 1e-8);
}

TEST(FitPoly, RecoversWithZeroCoefficients) {
  auto gen = generator();
  gen.C[2] = 0;
  gen.q[1] = 0;
  const auto fit = fit_poly(grid_samples(gen), 0.0);
  const auto want = gen.coefficients();
  const auto got = fit.model.coefficients();
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], 1e-6 * std::max(want[i], 1e-3)) << i;
  }
}

TEST(FitPoly, SamplesAtBetaGiveZeroModel) {
  std::vector<FuelSample> s;
  for (int i = 0; i < 20; ++i) s.push_back({1.0 * i, 0.1 * i - 1, 0.2});
  const auto fit = fit_poly(s, 0.2);
  for (double c : fit.model.coefficients()) EXPECT_EQ(c, 0.0);
  EXPECT_EQ(fit.model.beta, 0.2);
}

TEST(FitPoly, NoisyRecovery) {
  const auto gen = generator();
  auto samples = grid_samples(gen, -0.5);  // every rate well above zero
  std::mt19937_64 rng(22);
  std::normal_distribution<double> noise(0, 1e-3);
  for (auto& s : samples) s.rate += noise(rng);
  const auto fit = fit_poly(samples, 0.0);
  const auto want = gen.coefficients();
  const auto got = fit.model.coefficients();
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-2) << i;
}

TEST(FitPoly, OutputIsNonNegative) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> v(0, 30), a(-3, 3), r(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FuelSample> s;
    for (int i = 0; i < 50; ++i) s.push_back({v(rng), a(rng), r(rng)});
    const auto fit = fit_poly(s, 0.0);
    for (double c : fit.model.coefficients()) EXPECT_GE(c, 0.0);
    EXPECT_NO_THROW(fit.model.validate());
  }
}

TEST(FitPoly, FlagsRankDeficiency) {
  std::vector<FuelSample> s;
  for (int i = 0; i < 30; ++i) s.push_back({10.0, 0.0, 1.0 + 0.01 * i});  // one (v, a) point
  const auto fit = fit_poly(s, 0.0);
  EXPECT_TRUE(fit.rank_deficient);
}

TEST(FitPoly, RejectsBadInput) {
  std::vector<FuelSample> few(5, {1, 1, 1});
  EXPECT_THROW(fit_poly(few, 0.0), ValidationError);
  auto s = grid_samples(generator());
  EXPECT_THROW(fit_poly(s, 100.0), ValidationError);  // rates below beta
  s[3].rate = NAN;
  EXPECT_THROW(fit_poly(s, 0.0), ValidationError);
}

TEST(TrajectoryFuel, ThirtyMphHalfGallonPerHour) {
  const auto m = constant_gph(0.5);
  const auto traj = constant_speed(kThirtyMph, 3600, 0.4);
  const auto f = trajectory_fuel(m, traj, 0.4);
  EXPECT_NEAR(f.miles, 30.0, 1e-12 * 30);
  EXPECT_NEAR(f.gallons, 0.5, 1e-12 * 0.5);
  EXPECT_NEAR(f.mpg, 60.0, 1e-12 * 60);
}

TEST(TrajectoryFuel, EmptyTrajectory) {
  const auto f = trajectory_fuel(constant_gph(0.5), {}, 0.4);
  EXPECT_EQ(f.gallons, 0.0);
  EXPECT_EQ(f.miles, 0.0);
  EXPECT_EQ(f.mpg, kMpgInfinite);
}

TEST(TrajectoryFuel, GramsConvertWithFuelDensity) {
  PolyEnergyModel m;
  m.C[0] = 1.0;  // 1 g/s
  m.grams_per_gallon = kDieselGramsPerGallon;
  const auto f = trajectory_fuel(m, constant_speed(10, 100, 0.5), 0.5);
  EXPECT_NEAR(f.gallons, 100.0 / 3192.0, 1e-15);
}

TEST(TrajectoryFuel, RejectsNonUniformTimestamps) {
  std::vector<TrajectorySample> t{{0, 1, 0}, {0.4, 1, 0}, {0.9, 1, 0}};
  EXPECT_THROW(trajectory_fuel(constant_gph(1), t, 0.4), NonUniformTimestampsError);
  std::vector<TrajectorySample> back{{0, 1, 0}, {-0.4, 1, 0}};
  EXPECT_THROW(trajectory_fuel(constant_gph(1), back, 0.4), NonUniformTimestampsError);
}

TEST(TrajectoryFuel, OscillationCostsMoreThanConstantSpeed) {
  auto m = generator();
  m.q[0] = 0.5;
  const double dt = 0.4;
  std::vector<TrajectorySample> saw, flat;
  // Triangle wave between 5 and 15 m/s with commanded accel +-1; mean speed 10.
  double v = 5.0, a = 1.0;
  for (int i = 0; i < 1000; ++i) {
    saw.push_back({i * dt, v, a});
    flat.push_back({i * dt, 10.0, 0.0});
    v += a * dt;
    if (v >= 15.0 - 1e-9) a = -1.0;
    if (v <= 5.0 + 1e-9) a = 1.0;
  }
  double mean = 0;
  for (auto& s : saw) mean += s.v / saw.size();
  ASSERT_NEAR(mean, 10.0, 0.05);
  for (auto& s : flat) s.v = mean;
  EXPECT_GE(trajectory_fuel(m, saw, dt).gallons, trajectory_fuel(m, flat, dt).gallons);
}

TEST(FleetMpg, SingleClassMatchesTrajectoryFuel) {
  auto model = std::make_shared<const PolyEnergyModel>(generator());
  VehiclePortfolio pf({{"only", model, 1.0}}, {"cav", model, 0.0});
  const auto traj = constant_speed(12, 600, 0.4);
  std::vector<VehicleTrajectory> fleet{{"only", traj}};
  EXPECT_DOUBLE_EQ(fleet_mpg(pf, fleet, 0.4), trajectory_fuel(*model, traj, 0.4).mpg);
}

TEST(FleetMpg, HarmonicAggregation) {
  auto a = std::make_shared<const PolyEnergyModel>(constant_gph(0.5));
  auto b = std::make_shared<const PolyEnergyModel>(constant_gph(1.5));
  VehiclePortfolio pf({{"a", a, 0.5}, {"b", b, 0.5}}, {"cav", a, 0.0});
  const auto traj = constant_speed(kThirtyMph, 3600, 0.4);
  std::vector<VehicleTrajectory> fleet{{"a", traj}, {"b", traj}};
  const double mpg = fleet_mpg(pf, fleet, 0.4);
  EXPECT_NEAR(mpg, 60.0 / 2.0, 1e-9);  // 2 * 30 mi / (0.5 + 1.5) gal
  EXPECT_GT(std::abs(mpg - 0.5 * (60.0 + 20.0)), 1.0);
}

TEST(FleetMpg, MatchesIndependentTotals) {
  const auto& pf = default_portfolio();
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> v(0, 25), a(-2, 2);
  std::vector<VehicleTrajectory> fleet;
  double miles = 0, gallons = 0;
  for (const auto& e : pf.humans()) {
    VehicleTrajectory t{e.class_name, {}};
    for (int i = 0; i < 200; ++i) t.samples.push_back({i * 0.4, v(rng), a(rng)});
    double rate_s = 0, meters = 0;
    for (const auto& s : t.samples) {
      rate_s += e.model->fuel_rate({s.v, s.a, 0}) * 0.4;
      meters += s.v * 0.4;
    }
    miles += meters / 1609.344;
    gallons += e.model->gallons(rate_s);
    fleet.push_back(std::move(t));
  }
  EXPECT_NEAR(fleet_mpg(pf, fleet, 0.4), miles / gallons, 1e-12 * miles / gallons);
}

TEST(FleetMpg, UnknownClassRejected) {
  std::vector<VehicleTrajectory> fleet{{"hovercraft", constant_speed(10, 10, 0.4)}};
  EXPECT_THROW(fleet_mpg(default_portfolio(), fleet, 0.4), UnknownClassError);
}

TEST(Portfolio, DefaultSharesAndCavClass) {
  const auto& pf = default_portfolio();
  std::map<std::string, double> want{{"compact_sedan", 0.2359},
                                     {"midsize_sedan", 0.3292},
                                     {"midsize_suv", 0.1756},
                                     {"midsize_pickup", 0.1032},
                                     {"class3_pnd", 0.1561}};
  double total = 0;
  ASSERT_EQ(pf.humans().size(), want.size());
  for (const auto& e : pf.humans()) {
    EXPECT_EQ(e.share, want.at(e.class_name)) << e.class_name;
    total += e.share;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(pf.cav().class_name, "rav4");
}

TEST(Portfolio, DrawFollowsCumulativeShares) {
  const auto& pf = default_portfolio();
  EXPECT_EQ(pf.draw_human_class(0.0), "compact_sedan");
  EXPECT_EQ(pf.draw_human_class(0.2358), "compact_sedan");
  EXPECT_EQ(pf.draw_human_class(0.2360), "midsize_sedan");
  EXPECT_EQ(pf.draw_human_class(0.9999), "class3_pnd");
}

TEST(Portfolio, RejectsBadShares) {
  auto m = std::make_shared<const PolyEnergyModel>(generator());
  EXPECT_THROW(VehiclePortfolio({{"a", m, 0.5}}, {"cav", m, 0}), ValidationError);
  EXPECT_THROW(VehiclePortfolio({{"a", m, 1.5}, {"b", m, -0.5}}, {"cav", m, 0}), ValidationError);
  EXPECT_THROW(VehiclePortfolio({}, {"cav", m, 0}), ValidationError);
}

TEST(PlaceholderModels, AreValidAndAboveBeta) {
  for (const auto& c : default_human_classes()) {
    const auto m = placeholder_model(c.physics);
    EXPECT_NO_THROW(m.validate());
    EXPECT_GE(m.fuel_rate({0, 0, 0}), m.beta);
    EXPECT_GT(m.fuel_rate({20, 1, 0}), m.fuel_rate({20, 0, 0}));
  }
}

TEST(ModelJson, RoundTrip) {
  auto m = generator();
  m.class_name = "x";
  m.beta = 0.1;
  m.unit = FuelUnit::GallonsPerHour;
  m.boundary = FeasibilityBoundary({0, 20}, {3, 1});
  const auto back = poly_model_from_json(to_json(m));
  EXPECT_EQ(back.coefficients(), m.coefficients());
  EXPECT_EQ(back.beta, m.beta);
  EXPECT_EQ(back.unit, m.unit);
  EXPECT_EQ(back.class_name, "x");
  EXPECT_EQ(back.boundary.speeds(), m.boundary.speeds());
  EXPECT_EQ(back.boundary.accels(), m.boundary.accels());
}

TEST(ModelJson, FieldNames) {
  const auto j = to_json(generator());
  for (const char* key : {"class_name", "unit", "beta", "C", "p", "q", "boundary"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["C"].size(), 4u);
  EXPECT_EQ(j["p"].size(), 3u);
  EXPECT_EQ(j["q"].size(), 2u);
}

TEST(ModelJson, RejectsNegativeCoefficient) {
  auto j = to_json(generator());
  j["p"][1] = -0.1;
  EXPECT_THROW(poly_model_from_json(j), ValidationError);
  auto k = to_json(generator());
  k["unit"] = "liters";
  EXPECT_THROW(poly_model_from_json(k), ValidationError);
}

TEST(PortfolioFile, ShippedDataLoads) {
  const auto pf = load_portfolio(std::filesystem::path(WAVEBENCH_SOURCE_DIR) / "data" / "portfolio.json");
  const auto& ref = default_portfolio();
  ASSERT_EQ(pf.humans().size(), ref.humans().size());
  for (std::size_t i = 0; i < ref.humans().size(); ++i) {
    EXPECT_EQ(pf.humans()[i].class_name, ref.humans()[i].class_name);
    EXPECT_EQ(pf.humans()[i].share, ref.humans()[i].share);
    for (double v : {0.0, 7.0, 20.0}) {
      const EnergyQuery q{v, 0.5, 0};
      EXPECT_DOUBLE_EQ(pf.humans()[i].model->fuel_rate(q), ref.humans()[i].model->fuel_rate(q));
    }
  }
  EXPECT_EQ(pf.cav().class_name, "rav4");
}

TEST(PortfolioFile, MissingFileIsIoError) {
  EXPECT_THROW(load_portfolio("/nonexistent/portfolio.json"), IoError);
}

TEST(SamplesCsv, ParsesAndReportsLine) {
  std::istringstream ok("v,a,rate\n1,0.5,2\n3,-1,0.25\n");
  const auto s = read_fuel_samples_csv(ok);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].a, -1.0);

  std::istringstream neg("v,a,rate\n1,0.5,2\n3,-1,-0.25\n");
  try {
    read_fuel_samples_csv(neg);
    FAIL();
  } catch (const CsvParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream empty("");
  EXPECT_THROW(read_fuel_samples_csv(empty), CsvParseError);
  std::istringstream header_only("v,a,rate\n");
  EXPECT_THROW(read_fuel_samples_csv(header_only), CsvParseError);
  std::istringstream junk("v,a,rate\n1,x,2\n");
  EXPECT_THROW(read_fuel_samples_csv(junk), CsvParseError);
}
