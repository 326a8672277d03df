#ifndef SIDESLIP_SIMULATOR_HPP
#define SIDESLIP_SIMULATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sideslip/types.hpp"

namespace sideslip::sim {

enum class TireVariant { Linear, Brush };

/// Ground-truth lateral tire law. The brush variant is C tan(alpha) shaped by
/// (1 + |x|^3)^(-1/3), x = C tan(alpha) / (mu F_z), which saturates at mu F_z
/// and departs from the linear law only at third order in slip.
struct TireModel {
  TireVariant variant = TireVariant::Linear;
  double C_f = 160776.0;  // N/rad
  double C_r = 254100.0;
  double mu_peak = 1.0;

  /// Slip angle at which the linear force would reach the friction limit.
  double saturation_slip(double C, double F_z) const { return std::atan(mu_peak * F_z / C); }

  double force(double C, double F_z, double alpha) const {
    if (variant == TireVariant::Linear) return C * alpha;
    const double lin = C * std::tan(alpha);
    const double x = std::abs(lin) / (mu_peak * F_z);
    return lin / std::cbrt(1.0 + x * x * x);
  }

  /// Slip angle producing `force`. The brush law inverts in closed form:
  /// C tan(alpha) = F / (1 - |F / (mu F_z)|^3)^(1/3).
  double invert(double C, double F_z, double force_target) const {
    if (variant == TireVariant::Linear) return force_target / C;
    const double x = std::abs(force_target) / (mu_peak * F_z);
    if (x >= 1.0) throw DomainError("TireModel::invert: force beyond the friction limit");
    return std::atan(force_target / std::cbrt(1.0 - x * x * x) / C);
  }
};

struct AxleLoads {
  double front = 0.0;
  double rear = 0.0;
};

inline AxleLoads static_axle_loads(const VehicleParams& p) {
  const double w = p.m * p.g;
  return {w * p.L_r / p.wheelbase(), w * p.L_f / p.wheelbase()};
}

struct PlantState {
  double v_x = 0.0;  // m/s
  double v_y = 0.0;  // m/s
  double r = 0.0;    // rad/s
  double psi = 0.0;  // rad
  double X = 0.0;    // m
  double Y = 0.0;    // m

  bool operator==(const PlantState&) const = default;
};

/// Time derivatives plus the tire quantities that produced them.
struct PlantDerivative {
  double v_x_dot = 0.0;
  double v_y_dot = 0.0;
  double r_dot = 0.0;
  double psi_dot = 0.0;
  double X_dot = 0.0;
  double Y_dot = 0.0;
  double alpha_f = 0.0;
  double alpha_r = 0.0;
  double F_yf = 0.0;
  double F_yr = 0.0;
};

/// Below this speed the lateral dynamics are replaced by a kinematic hold.
inline constexpr double kPlantHoldSpeed = 0.5;

inline PlantDerivative plant_derivative(const PlantState& s, double delta_f, double a_x_cmd,
                                        double phi, const TireModel& tire,
                                        const VehicleParams& p) {
  PlantDerivative d;
  d.v_x_dot = (s.v_x <= 0.0 && a_x_cmd < 0.0) ? 0.0 : a_x_cmd;
  d.psi_dot = s.r;
  d.X_dot = s.v_x * std::cos(s.psi) - s.v_y * std::sin(s.psi);
  d.Y_dot = s.v_x * std::sin(s.psi) + s.v_y * std::cos(s.psi);
  if (s.v_x < kPlantHoldSpeed) return d;

  const AxleLoads loads = static_axle_loads(p);
  d.alpha_f = delta_f - (s.v_y + p.L_f * s.r) / s.v_x;
  d.alpha_r = (-s.v_y + p.L_r * s.r) / s.v_x;
  d.F_yf = tire.force(tire.C_f, loads.front, d.alpha_f);
  d.F_yr = tire.force(tire.C_r, loads.rear, d.alpha_r);
  const double front = d.F_yf * std::cos(delta_f);
  d.v_y_dot = (front + d.F_yr) / p.m - p.g * std::sin(phi) - s.v_x * s.r;
  d.r_dot = (p.L_f * front - p.L_r * d.F_yr) / p.I_z;
  return d;
}

/// Classical RK4 over one step with inputs held. v_x is floored at zero; below
/// the hold speed the lateral states follow the kinematic single-track model.
inline PlantState plant_step(const PlantState& s, double delta_f, double a_x_cmd, double phi,
                             const TireModel& tire, const VehicleParams& p, double dt) {
  if (!(dt > 0.0)) throw DomainError("plant_step: dt must be > 0");
  auto add = [](const PlantState& a, const PlantDerivative& k, double h) {
    PlantState o = a;
    o.v_x += h * k.v_x_dot;
    o.v_y += h * k.v_y_dot;
    o.r += h * k.r_dot;
    o.psi += h * k.psi_dot;
    o.X += h * k.X_dot;
    o.Y += h * k.Y_dot;
    return o;
  };
  const PlantDerivative k1 = plant_derivative(s, delta_f, a_x_cmd, phi, tire, p);
  const PlantDerivative k2 = plant_derivative(add(s, k1, 0.5 * dt), delta_f, a_x_cmd, phi, tire, p);
  const PlantDerivative k3 = plant_derivative(add(s, k2, 0.5 * dt), delta_f, a_x_cmd, phi, tire, p);
  const PlantDerivative k4 = plant_derivative(add(s, k3, dt), delta_f, a_x_cmd, phi, tire, p);

  PlantState o = s;
  o.v_x += dt / 6.0 * (k1.v_x_dot + 2.0 * k2.v_x_dot + 2.0 * k3.v_x_dot + k4.v_x_dot);
  o.v_y += dt / 6.0 * (k1.v_y_dot + 2.0 * k2.v_y_dot + 2.0 * k3.v_y_dot + k4.v_y_dot);
  o.r += dt / 6.0 * (k1.r_dot + 2.0 * k2.r_dot + 2.0 * k3.r_dot + k4.r_dot);
  o.psi += dt / 6.0 * (k1.psi_dot + 2.0 * k2.psi_dot + 2.0 * k3.psi_dot + k4.psi_dot);
  o.X += dt / 6.0 * (k1.X_dot + 2.0 * k2.X_dot + 2.0 * k3.X_dot + k4.X_dot);
  o.Y += dt / 6.0 * (k1.Y_dot + 2.0 * k2.Y_dot + 2.0 * k3.Y_dot + k4.Y_dot);
  o.v_x = std::max(o.v_x, 0.0);
  if (o.v_x < kPlantHoldSpeed) {
    o.v_y = 0.0;
    o.r = o.v_x * std::tan(delta_f) / p.wheelbase();
  }
  return o;
}

/// Per-channel white-noise standard deviations.
struct SensorNoise {
  double a_x = 0.0;      // m/s^2
  double a_y = 0.0;      // m/s^2
  double r = 0.0;        // rad/s
  double v_x = 0.0;      // m/s
  double delta_f = 0.0;  // rad

  bool operator==(const SensorNoise&) const = default;
};

/// Noise levels matching the default measurement covariances at `scale`:
/// variance = V / scale.
inline SensorNoise sensor_noise_from_covariances(double scale = 1.0) {
  SensorNoise n;
  n.a_y = std::sqrt(0.1 / scale);
  n.r = std::sqrt(0.01 / scale);
  n.v_x = std::sqrt(0.05 / scale);
  n.a_x = n.a_y;
  n.delta_f = 0.1 * n.r;
  return n;
}

/// Gaussian sensor noise source; deterministic for a given seed.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}
  double operator()(double sigma) { return sigma * normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// One sensor frame from the plant state and its derivative. The lateral
/// accelerometer reads v_y_dot + v_x r + g sin(phi) + d.
inline SensorSample sensor_model(double t, const PlantState& s, const PlantDerivative& d,
                                 double delta_f, double phi, double bias, const SensorNoise& noise,
                                 NoiseStream& rng, double g) {
  SensorSample out;
  out.t = t;
  out.a_x = d.v_x_dot - s.r * s.v_y + rng(noise.a_x);
  out.a_y_sen = d.v_y_dot + s.v_x * s.r + g * std::sin(phi) + bias + rng(noise.a_y);
  out.r = s.r + rng(noise.r);
  out.v_x = s.v_x + rng(noise.v_x);
  out.delta_f = delta_f + rng(noise.delta_f);
  return out;
}

enum class ScenarioName {
  Slalom,
  SevereSingleLaneChange,
  SteadyCircle,
  BankedDoubleLaneChange,
  StopNTurn,
};

inline std::string_view to_string(ScenarioName n) {
  switch (n) {
    case ScenarioName::Slalom: return "slalom";
    case ScenarioName::SevereSingleLaneChange: return "severe_single_lane_change";
    case ScenarioName::SteadyCircle: return "steady_circle";
    case ScenarioName::BankedDoubleLaneChange: return "banked_double_lane_change";
    case ScenarioName::StopNTurn: return "stop_n_turn";
  }
  return "unknown";
}

inline std::optional<ScenarioName> scenario_from_string(std::string_view s) {
  for (ScenarioName n : {ScenarioName::Slalom, ScenarioName::SevereSingleLaneChange,
                         ScenarioName::SteadyCircle, ScenarioName::BankedDoubleLaneChange,
                         ScenarioName::StopNTurn}) {
    if (to_string(n) == s) return n;
  }
  return std::nullopt;
}

struct ScenarioSpec {
  ScenarioName name = ScenarioName::Slalom;
  double duration = 20.0;         // s
  double dt = 0.01;               // s
  double speed = 50.0 / 3.6;      // m/s, cruise speed
  double min_speed = 1.5;         // m/s, stop-N-turn dip
  double maneuver_start = 2.0;    // s
  double maneuver_length = 0.0;   // s; 0 selects the scenario default
  double cone_spacing = 18.0;     // m, slalom
  double steer_period = 2.5;      // s, lane-change steering period
  double steer_amplitude = 0.0;   // rad; 0 searches for target_lat_accel
  double target_lat_accel = 0.0;  // m/s^2; 0 selects the scenario default
  double bank_deg = 0.0;          // plateau bank angle
  double bias = 0.0;              // m/s^2 accelerometer bias
  SensorNoise noise = sensor_noise_from_covariances();
  std::uint64_t seed = 1;
  TireVariant tire = TireVariant::Brush;
  double mu_peak = 1.0;
  double stiffness_scale = 1.0;  // plant stiffness relative to nominal

  void validate() const {
    if (!(duration > 0.0)) throw DomainError("ScenarioSpec.duration must be > 0");
    if (!(dt > 0.0)) throw DomainError("ScenarioSpec.dt must be > 0");
    if (!(speed > 0.0)) throw DomainError("ScenarioSpec.speed must be > 0");
    if (!(min_speed > 0.0) || min_speed > speed) {
      throw DomainError("ScenarioSpec.min_speed must be in (0, speed]");
    }
    if (maneuver_start < 0.0 || maneuver_length < 0.0) {
      throw DomainError("ScenarioSpec maneuver timing must be >= 0");
    }
    if (!(cone_spacing > 0.0) || !(steer_period > 0.0)) {
      throw DomainError("ScenarioSpec.cone_spacing and steer_period must be > 0");
    }
    if (steer_amplitude < 0.0 || target_lat_accel < 0.0) {
      throw DomainError("ScenarioSpec steering targets must be >= 0");
    }
    if (std::abs(bank_deg) >= 45.0) throw DomainError("ScenarioSpec.bank_deg must be below 45");
    if (!(mu_peak > 0.0)) throw DomainError("ScenarioSpec.mu_peak must be > 0");
    if (!(stiffness_scale > 0.0)) throw DomainError("ScenarioSpec.stiffness_scale must be > 0");
    if (noise.a_x < 0 || noise.a_y < 0 || noise.r < 0 || noise.v_x < 0 || noise.delta_f < 0) {
      throw DomainError("ScenarioSpec noise standard deviations must be >= 0");
    }
  }
};

/// Defaults for each named maneuver.
inline ScenarioSpec default_scenario(ScenarioName name) {
  ScenarioSpec s;
  s.name = name;
  s.bias = 0.1;
  switch (name) {
    case ScenarioName::Slalom:
      // eleven cones, 18 m apart, 50 km/h, low friction
      s.speed = 50.0 / 3.6;
      s.duration = 20.0;
      s.mu_peak = 0.5;
      s.target_lat_accel = 0.42 * 9.80665;
      break;
    case ScenarioName::SevereSingleLaneChange:
      s.speed = 80.0 / 3.6;
      s.duration = 12.0;
      s.maneuver_start = 3.0;
      s.steer_period = 2.5;
      s.mu_peak = 1.0;
      s.target_lat_accel = 0.6 * 9.80665;
      break;
    case ScenarioName::SteadyCircle:
      s.speed = 40.0 / 3.6;
      s.duration = 30.0;
      s.mu_peak = 1.0;
      s.target_lat_accel = 0.5 * 9.80665;
      break;
    case ScenarioName::BankedDoubleLaneChange:
      s.speed = 60.0 / 3.6;
      s.duration = 45.0;
      s.maneuver_start = 15.0;
      s.steer_period = 3.0;
      s.bank_deg = 14.0;
      s.bias = 0.0;
      s.mu_peak = 0.8;
      s.target_lat_accel = 0.5 * 9.80665;
      break;
    case ScenarioName::StopNTurn:
      s.speed = 10.0;
      s.min_speed = 1.5;
      s.duration = 28.0;
      s.mu_peak = 1.0;
      s.steer_amplitude = 0.45;
      break;
  }
  return s;
}

struct GroundTruth {
  double t = 0.0;
  double v_x = 0.0;
  double v_y = 0.0;
  double r = 0.0;
  double beta = 0.0;
  double phi = 0.0;
  double d = 0.0;
  double C_f_eff = 0.0;  // secant stiffness F / alpha (tangent slope at zero slip)
  double C_r_eff = 0.0;

  bool operator==(const GroundTruth&) const = default;
};

struct ScenarioData {
  ScenarioSpec spec;
  std::vector<SensorSample> sensors;
  std::vector<GroundTruth> truth;
};

/// Open-loop driver inputs as functions of time.
struct Profile {
  std::function<double(double)> delta;  // rad
  std::function<double(double)> a_x;    // m/s^2
  std::function<double(double)> phi;    // rad
};

namespace detail {

inline double secant(double F, double alpha, double C) {
  return std::abs(alpha) > 1e-6 ? F / alpha : C;
}

inline double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

/// Steering that holds a straight path on a constant bank.
inline double bank_trim(double phi, const TireModel& tire, const VehicleParams& p) {
  if (phi == 0.0) return 0.0;
  const AxleLoads loads = static_axle_loads(p);
  const double side = p.m * p.g * std::sin(phi);
  double delta = 0.0;
  for (int i = 0; i < 6; ++i) {
    // Fyf cos(delta) L_f = Fyr L_r and Fyf cos(delta) + Fyr = m g sin(phi)
    const double F_r = side * p.L_f / p.wheelbase();
    const double F_f = side * p.L_r / p.wheelbase() / std::cos(delta);
    const double alpha_r = tire.invert(tire.C_r, loads.rear, F_r);
    const double alpha_f = tire.invert(tire.C_f, loads.front, F_f);
    // r = 0: alpha_r = -v_y / v_x, delta = alpha_f + v_y / v_x
    delta = alpha_f - alpha_r;
  }
  return delta;
}

inline TireModel tire_for(const ScenarioSpec& spec, const VehicleParams& p) {
  TireModel t;
  t.variant = spec.tire;
  t.mu_peak = spec.mu_peak;
  t.C_f = spec.stiffness_scale * p.C_f_nom;
  t.C_r = spec.stiffness_scale * p.C_r_nom;
  return t;
}

inline double maneuver_length(const ScenarioSpec& s) {
  if (s.maneuver_length > 0.0) return s.maneuver_length;
  switch (s.name) {
    case ScenarioName::Slalom:
      // ten gaps between eleven cones
      return 10.0 * s.cone_spacing / s.speed;
    case ScenarioName::SevereSingleLaneChange:
      return s.steer_period;
    case ScenarioName::BankedDoubleLaneChange:
      return 2.0 * s.steer_period + 5.0;
    default:
      return s.duration;
  }
}

/// Steering shape with unit amplitude; the bank trim is added separately.
inline std::function<double(double)> steering_shape(const ScenarioSpec& s) {
  const double t0 = s.maneuver_start;
  const double len = maneuver_length(s);
  switch (s.name) {
    case ScenarioName::Slalom: {
      const double freq = s.speed / (2.0 * s.cone_spacing);
      return [=](double t) {
        if (t < t0 || t > t0 + len) return 0.0;
        return std::sin(2.0 * std::numbers::pi * freq * (t - t0));
      };
    }
    case ScenarioName::SevereSingleLaneChange: {
      const double period = s.steer_period;
      return [=](double t) {
        if (t < t0 || t > t0 + period) return 0.0;
        return std::sin(2.0 * std::numbers::pi * (t - t0) / period);
      };
    }
    case ScenarioName::SteadyCircle:
      return [=](double t) { return smoothstep((t - t0) / 2.0); };
    case ScenarioName::BankedDoubleLaneChange: {
      const double period = s.steer_period;
      const double second = t0 + period + 5.0;
      return [=](double t) {
        const double w = 2.0 * std::numbers::pi / period;
        if (t >= t0 && t <= t0 + period) return std::sin(w * (t - t0));
        if (t >= second && t <= second + period) return -std::sin(w * (t - second));
        return 0.0;
      };
    }
    case ScenarioName::StopNTurn:
      break;
  }
  return [](double) { return 0.0; };
}

}  // namespace detail

/// Profiles for a spec with a given steering amplitude.
inline Profile make_profile(const ScenarioSpec& spec, const VehicleParams& p, double amplitude) {
  Profile prof;
  const TireModel tire = detail::tire_for(spec, p);
  const double bank = spec.bank_deg * std::numbers::pi / 180.0;

  if (spec.name == ScenarioName::BankedDoubleLaneChange) {
    const double t_bank = 2.0;
    prof.phi = [=](double t) { return bank * detail::smoothstep((t - t_bank) / 3.0); };
  } else {
    prof.phi = [=](double) { return bank; };
  }

  if (spec.name == ScenarioName::StopNTurn) {
    // decelerate to min_speed, turn through ~90 deg at that speed, accelerate back
    const double decel = 1.5;
    const double t_brake = spec.maneuver_start;
    const double t_slow = t_brake + (spec.speed - spec.min_speed) / decel;
    const double yaw_rate = spec.min_speed * std::tan(amplitude) / p.wheelbase();
    const double t_turn = t_slow + 1.0;
    const double t_hold = 0.5 * std::numbers::pi / std::max(yaw_rate, 1e-6);
    const double t_unturn = t_turn + 1.0 + t_hold;
    const double t_go = t_unturn + 1.0;
    prof.a_x = [=](double t) {
      if (t >= t_brake && t < t_slow) return -decel;
      if (t >= t_go && t < t_go + (spec.speed - spec.min_speed) / decel) return decel;
      return 0.0;
    };
    prof.delta = [=](double t) {
      if (t < t_turn) return 0.0;
      if (t < t_turn + 1.0) return amplitude * detail::smoothstep(t - t_turn);
      if (t < t_unturn) return amplitude;
      return amplitude * (1.0 - detail::smoothstep(t - t_unturn));
    };
    return prof;
  }

  prof.a_x = [](double) { return 0.0; };
  const auto shape = detail::steering_shape(spec);
  if (bank != 0.0) {
    const auto phi = prof.phi;
    prof.delta = [=](double t) {
      return amplitude * shape(t) + detail::bank_trim(phi(t), tire, p);
    };
  } else {
    prof.delta = [=](double t) { return amplitude * shape(t); };
  }
  return prof;
}

/// Noise-free run of the plant over a profile; returns the peak |a_y|.
inline double peak_lateral_accel(const ScenarioSpec& spec, const VehicleParams& p,
                                 const Profile& prof) {
  const TireModel tire = detail::tire_for(spec, p);
  PlantState s;
  s.v_x = spec.speed;
  double peak = 0.0;
  const auto steps = static_cast<std::size_t>(std::llround(spec.duration / spec.dt));
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * spec.dt;
    const double delta = prof.delta(t);
    const double phi = prof.phi(t);
    const PlantDerivative d = plant_derivative(s, delta, prof.a_x(t), phi, tire, p);
    peak = std::max(peak, std::abs(d.v_y_dot + s.v_x * s.r));
    s = plant_step(s, delta, prof.a_x(t), phi, tire, p, spec.dt);
  }
  return peak;
}

/// Steering amplitude whose noise-free peak lateral acceleration hits the
/// target (bisection).
inline double search_steer_amplitude(const ScenarioSpec& spec, const VehicleParams& p,
                                     double target) {
  double lo = 0.0, hi = 0.4;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    (peak_lateral_accel(spec, p, make_profile(spec, p, mid)) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double resolve_steer_amplitude(const ScenarioSpec& spec, const VehicleParams& p) {
  if (spec.steer_amplitude > 0.0) return spec.steer_amplitude;
  if (spec.target_lat_accel > 0.0) return search_steer_amplitude(spec, p, spec.target_lat_accel);
  return 0.0;
}

/// Simulate a scenario: aligned sensor and ground-truth streams at spec.dt.
inline ScenarioData generate_scenario(const ScenarioSpec& spec, const VehicleParams& p) {
  spec.validate();
  p.validate();
  const TireModel tire = detail::tire_for(spec, p);
  const Profile prof = make_profile(spec, p, resolve_steer_amplitude(spec, p));

  ScenarioData out;
  out.spec = spec;
  const auto steps = static_cast<std::size_t>(std::llround(spec.duration / spec.dt));
  out.sensors.reserve(steps + 1);
  out.truth.reserve(steps + 1);

  NoiseStream rng(spec.seed);
  PlantState s;
  s.v_x = spec.speed;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * spec.dt;
    const double delta = prof.delta(t);
    const double a_x = prof.a_x(t);
    const double phi = prof.phi(t);
    const PlantDerivative d = plant_derivative(s, delta, a_x, phi, tire, p);

    out.sensors.push_back(sensor_model(t, s, d, delta, phi, spec.bias, spec.noise, rng, p.g));
    GroundTruth gt;
    gt.t = t;
    gt.v_x = s.v_x;
    gt.v_y = s.v_y;
    gt.r = s.r;
    gt.beta = s.v_x > 0.0 ? std::atan(s.v_y / s.v_x) : 0.0;
    gt.phi = phi;
    gt.d = spec.bias;
    gt.C_f_eff = detail::secant(d.F_yf, d.alpha_f, tire.C_f);
    gt.C_r_eff = detail::secant(d.F_yr, d.alpha_r, tire.C_r);
    out.truth.push_back(gt);

    s = plant_step(s, delta, a_x, phi, tire, p, spec.dt);
  }
  return out;
}

}  // namespace sideslip::sim

#endif  // SIDESLIP_SIMULATOR_HPP
