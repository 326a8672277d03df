#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sideslip/simulator.hpp"

using namespace sideslip;
using namespace sideslip::sim;

namespace {

const VehicleParams kCar{};
constexpr double kDeg = M_PI / 180.0;

}  // namespace

TEST(Tire, BrushLawShape) {
  TireModel t;
  t.variant = TireVariant::Brush;
  t.mu_peak = 0.8;
  const double fz = 10000.0;
  // third-order departure from linear at small slip
  EXPECT_NEAR(t.force(t.C_f, fz, 1e-4), t.C_f * std::tan(1e-4), 1e-6);
  EXPECT_EQ(t.force(t.C_f, fz, -0.05), -t.force(t.C_f, fz, 0.05));
  double prev = 0.0;
  for (double a = 0.001; a < 1.2; a += 0.001) {
    const double f = t.force(t.C_f, fz, a);
    ASSERT_GT(f, prev);
    ASSERT_LT(f, t.mu_peak * fz);
    prev = f;
  }
  EXPECT_GT(prev, 0.99 * t.mu_peak * fz);
}

TEST(Tire, InverseRoundTrips) {
  TireModel t;
  t.variant = TireVariant::Brush;
  for (double a : {-0.2, -0.01, 0.0, 0.003, 0.08, 0.3}) {
    EXPECT_NEAR(t.invert(t.C_r, 9000.0, t.force(t.C_r, 9000.0, a)), a, 1e-10);
  }
  EXPECT_THROW(t.invert(t.C_r, 9000.0, 9000.0), DomainError);
  TireModel lin;
  EXPECT_DOUBLE_EQ(lin.invert(lin.C_f, 1.0, lin.force(lin.C_f, 1.0, 0.02)), 0.02);
}

TEST(Plant, StraightLineEquilibrium) {
  PlantState s;
  s.v_x = 20.0;
  TireModel tire;
  const PlantState o = plant_step(s, 0.0, 1.0, 0.0, tire, kCar, 0.01);
  EXPECT_NEAR(o.v_x, 20.01, 1e-12);
  EXPECT_EQ(o.v_y, 0.0);
  EXPECT_EQ(o.r, 0.0);
  EXPECT_EQ(o.psi, 0.0);
}

TEST(Plant, SteadyStateYawGainMatchesBicycleModel) {
  TireModel tire;
  const double vx = 20.0, delta = 0.01;
  PlantState s;
  s.v_x = vx;
  for (int k = 0; k < 2000; ++k) s = plant_step(s, delta, 0.0, 0.0, tire, kCar, 0.01);
  const double L = kCar.wheelbase();
  const double K = kCar.m / L * (kCar.L_r / kCar.C_f_nom - kCar.L_f / kCar.C_r_nom);
  const double r_ss = vx / (L + K * vx * vx) * delta;
  EXPECT_NEAR(s.r, r_ss, 0.005 * std::abs(r_ss));
}

TEST(Plant, BankTrimBalancesGravity) {
  TireModel tire;
  tire.variant = TireVariant::Brush;
  const double phi = 14.0 * kDeg;
  const double delta = detail::bank_trim(phi, tire, kCar);
  PlantState s;
  s.v_x = 60.0 / 3.6;
  for (int k = 0; k < 3000; ++k) s = plant_step(s, delta, 0.0, phi, tire, kCar, 0.01);
  const PlantDerivative d = plant_derivative(s, delta, 0.0, phi, tire, kCar);
  const double side = kCar.m * kCar.g * std::sin(phi);
  EXPECT_NEAR(d.F_yf * std::cos(delta) + d.F_yr, side, 0.01 * side);
  EXPECT_NEAR(s.r, 0.0, 1e-6);
}

TEST(Plant, StopsWithoutReversing) {
  PlantState s;
  s.v_x = 0.2;
  TireModel tire;
  for (int k = 0; k < 100; ++k) s = plant_step(s, 0.1, -3.0, 0.0, tire, kCar, 0.01);
  EXPECT_EQ(s.v_x, 0.0);
  EXPECT_EQ(s.r, 0.0);
}

TEST(Sensors, AccelerometerReading) {
  NoiseStream rng(1);
  const SensorNoise quiet;
  PlantState s;
  s.v_x = 15.0;
  s.v_y = 0.2;
  s.r = 0.3;
  TireModel tire;
  const PlantDerivative d = plant_derivative(s, 0.03, 0.0, 0.0, tire, kCar);
  const SensorSample a = sensor_model(0.0, s, d, 0.03, 0.0, 0.0, quiet, rng, kCar.g);
  EXPECT_DOUBLE_EQ(a.a_y_sen, d.v_y_dot + s.v_x * s.r);

  const PlantState still;
  const PlantDerivative z = plant_derivative(still, 0.0, 0.0, 14.0 * kDeg, tire, kCar);
  EXPECT_NEAR(sensor_model(0.0, still, z, 0.0, 14.0 * kDeg, 0.0, quiet, rng, kCar.g).a_y_sen, 2.3724,
              1e-4);
  EXPECT_DOUBLE_EQ(sensor_model(0.0, still, z, 0.0, 0.0, 0.3, quiet, rng, kCar.g).a_y_sen, 0.3);
}

TEST(Sensors, NoiseFromCovariances) {
  const SensorNoise n = sensor_noise_from_covariances(100.0);
  EXPECT_NEAR(n.a_y, std::sqrt(0.1 / 100.0), 1e-15);
  EXPECT_NEAR(n.r, 0.01, 1e-15);
  EXPECT_NEAR(n.v_x, std::sqrt(0.05 / 100.0), 1e-15);
}

TEST(Scenario, NamesRoundTrip) {
  for (ScenarioName n : {ScenarioName::Slalom, ScenarioName::SevereSingleLaneChange,
                         ScenarioName::SteadyCircle, ScenarioName::BankedDoubleLaneChange,
                         ScenarioName::StopNTurn}) {
    EXPECT_EQ(scenario_from_string(to_string(n)), n);
  }
  EXPECT_FALSE(scenario_from_string("figure_eight"));
}

TEST(Scenario, Defaults) {
  const ScenarioSpec s = default_scenario(ScenarioName::Slalom);
  EXPECT_NEAR(s.speed, 50.0 / 3.6, 1e-12);
  EXPECT_EQ(s.cone_spacing, 18.0);
  EXPECT_EQ(s.dt, 0.01);
  EXPECT_EQ(default_scenario(ScenarioName::BankedDoubleLaneChange).bank_deg, 14.0);
  ScenarioSpec bad = s;
  bad.bank_deg = 50.0;
  EXPECT_THROW(bad.validate(), DomainError);
  bad = s;
  bad.dt = 0.0;
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Scenario, DeterministicForSeed) {
  ScenarioSpec spec = default_scenario(ScenarioName::SevereSingleLaneChange);
  spec.duration = 6.0;
  spec.seed = 42;
  const ScenarioData a = generate_scenario(spec, kCar);
  const ScenarioData b = generate_scenario(spec, kCar);
  EXPECT_EQ(a.sensors, b.sensors);
  EXPECT_EQ(a.truth, b.truth);
  spec.seed = 43;
  EXPECT_NE(generate_scenario(spec, kCar).sensors, a.sensors);
  EXPECT_EQ(a.sensors.size(), 601u);
}

TEST(Scenario, SlalomReachesTargetAcceleration) {
  ScenarioSpec spec = default_scenario(ScenarioName::Slalom);
  const double amp = resolve_steer_amplitude(spec, kCar);
  EXPECT_GT(amp, 0.0);
  EXPECT_LT(amp, 0.4);
  EXPECT_NEAR(peak_lateral_accel(spec, kCar, make_profile(spec, kCar, amp)), spec.target_lat_accel,
              1e-3 * spec.target_lat_accel);
}

TEST(Scenario, SteadyCircleSideslipSettles) {
  ScenarioSpec spec = default_scenario(ScenarioName::SteadyCircle);
  const ScenarioData data = generate_scenario(spec, kCar);
  const std::size_t half = data.truth.size() / 2;
  double mean = 0.0;
  for (std::size_t i = half; i < data.truth.size(); ++i) mean += data.truth[i].beta;
  mean /= static_cast<double>(data.truth.size() - half);
  double var = 0.0;
  for (std::size_t i = half; i < data.truth.size(); ++i) {
    var += std::pow(data.truth[i].beta - mean, 2);
  }
  EXPECT_LT(std::sqrt(var / static_cast<double>(data.truth.size() - half)), 1e-3);
}

TEST(Scenario, BankedPlateau) {
  ScenarioSpec spec = default_scenario(ScenarioName::BankedDoubleLaneChange);
  spec.duration = 10.0;
  const ScenarioData data = generate_scenario(spec, kCar);
  EXPECT_EQ(data.truth.front().phi, 0.0);
  EXPECT_NEAR(data.truth.back().phi, 14.0 * kDeg, 1e-12);
  // trimmed straight path before the lane changes
  EXPECT_LT(std::abs(data.truth.back().r), 1e-3);
}

TEST(Scenario, StopNTurnDipsToMinimumSpeed) {
  const ScenarioData data = generate_scenario(default_scenario(ScenarioName::StopNTurn), kCar);
  double vmin = 1e9, rmax = 0.0;
  for (const GroundTruth& g : data.truth) {
    vmin = std::min(vmin, g.v_x);
    rmax = std::max(rmax, std::abs(g.r));
  }
  EXPECT_NEAR(vmin, 1.5, 0.05);
  EXPECT_GT(rmax, 0.1);
  EXPECT_NEAR(data.truth.back().v_x, 10.0, 0.05);
}

TEST(Scenario, TruthCarriesEffectiveStiffness) {
  ScenarioSpec spec = default_scenario(ScenarioName::Slalom);
  spec.tire = TireVariant::Linear;
  spec.stiffness_scale = 0.8;
  spec.duration = 5.0;
  for (const GroundTruth& g : generate_scenario(spec, kCar).truth) {
    ASSERT_NEAR(g.C_f_eff, 0.8 * kCar.C_f_nom, 1e-6 * kCar.C_f_nom);
    ASSERT_NEAR(g.C_r_eff, 0.8 * kCar.C_r_nom, 1e-6 * kCar.C_r_nom);
  }
}
