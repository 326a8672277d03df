#ifndef SIDESLIP_CONFIG_HPP
#define SIDESLIP_CONFIG_HPP

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sideslip/pipeline.hpp"
#include "sideslip/simulator.hpp"

namespace sideslip {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a run needs besides the input stream.
///
/// JSON layout (every key optional, missing keys keep their defaults):
///   {"variant": "algorithm2", "dt": 0.01, "diagnostics": false, "noise_scale": 1.0,
///    "vehicle": {"m", "I_z", "L_f", "L_r", "C_f", "C_r", "g"},
///    "dyn_noise": {"W": [4], "V": [2]}, "bank_kin_noise": {"W": [3], "V": [1]},
///    "corrected_kin_noise": {"W": [2], "V": [1]},
///    "initial_covariance": {"dyn": [4], "kin": [3]},
///    "adaptation": {"lambda", "delta", "r_t", "c_t", "yaw_accel_cutoff_hz", "v_x_min",
///                   "clamp_low", "clamp_high"},
///    "scenario": {"name", "duration", "speed", "min_speed", "maneuver_start",
///                 "maneuver_length", "cone_spacing", "steer_period", "steer_amplitude",
///                 "target_lat_accel", "bank_deg", "bias", "tire", "mu_peak",
///                 "stiffness_scale"}}
/// Covariances are given by their diagonals.
struct RunConfig {
  PipelineConfig pipeline;
  /// Sensor noise variance used by the simulator is V / noise_scale.
  double noise_scale = 1.0;
  std::optional<sim::ScenarioSpec> scenario;
};

namespace detail {

template <int N>
void read_diag(const nlohmann::json& j, const char* key, Mat<N, N>& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != static_cast<std::size_t>(N)) {
    throw ConfigError(where + "." + key + " must be an array of " + std::to_string(N) + " numbers");
  }
  Vec<N> d;
  for (int i = 0; i < N; ++i) d(i) = a.at(static_cast<std::size_t>(i)).get<double>();
  for (int i = 0; i < N; ++i) {
    if (!(d(i) >= 0.0)) throw ConfigError(where + "." + key + " entries must be >= 0");
  }
  out = d.asDiagonal();
}

template <int N>
nlohmann::json diag_json(const Mat<N, N>& m) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < N; ++i) a.push_back(m(i, i));
  return a;
}

template <typename T>
void read_num(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline sim::ScenarioSpec scenario_from_json(const nlohmann::json& j, double noise_scale) {
  if (!j.contains("name")) throw ConfigError("scenario.name is required");
  const auto name = sim::scenario_from_string(j.at("name").get<std::string>());
  if (!name) throw ConfigError("unknown scenario '" + j.at("name").get<std::string>() + "'");
  sim::ScenarioSpec s = sim::default_scenario(*name);
  s.noise = sim::sensor_noise_from_covariances(noise_scale);
  detail::read_num(j, "duration", s.duration);
  detail::read_num(j, "dt", s.dt);
  detail::read_num(j, "speed", s.speed);
  detail::read_num(j, "min_speed", s.min_speed);
  detail::read_num(j, "maneuver_start", s.maneuver_start);
  detail::read_num(j, "maneuver_length", s.maneuver_length);
  detail::read_num(j, "cone_spacing", s.cone_spacing);
  detail::read_num(j, "steer_period", s.steer_period);
  detail::read_num(j, "steer_amplitude", s.steer_amplitude);
  detail::read_num(j, "target_lat_accel", s.target_lat_accel);
  detail::read_num(j, "bank_deg", s.bank_deg);
  detail::read_num(j, "bias", s.bias);
  detail::read_num(j, "mu_peak", s.mu_peak);
  detail::read_num(j, "stiffness_scale", s.stiffness_scale);
  if (j.contains("tire")) {
    const auto t = j.at("tire").get<std::string>();
    if (t == "linear") {
      s.tire = sim::TireVariant::Linear;
    } else if (t == "brush") {
      s.tire = sim::TireVariant::Brush;
    } else {
      throw ConfigError("scenario.tire must be 'linear' or 'brush'");
    }
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    detail::read_num(n, "a_x", s.noise.a_x);
    detail::read_num(n, "a_y", s.noise.a_y);
    detail::read_num(n, "r", s.noise.r);
    detail::read_num(n, "v_x", s.noise.v_x);
    detail::read_num(n, "delta_f", s.noise.delta_f);
  }
  s.validate();
  return s;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  RunConfig rc;
  PipelineConfig& c = rc.pipeline;
  try {
    if (j.contains("variant")) {
      const auto v = variant_from_string(j.at("variant").get<std::string>());
      if (!v) throw ConfigError("unknown variant '" + j.at("variant").get<std::string>() + "'");
      c.variant = *v;
    }
    detail::read_num(j, "dt", c.dt);
    detail::read_num(j, "diagnostics", c.diagnostics);
    detail::read_num(j, "noise_scale", rc.noise_scale);
    if (!(rc.noise_scale > 0.0)) throw ConfigError("noise_scale must be > 0");
    if (j.contains("vehicle")) {
      const auto& v = j.at("vehicle");
      detail::read_num(v, "m", c.params.m);
      detail::read_num(v, "I_z", c.params.I_z);
      detail::read_num(v, "L_f", c.params.L_f);
      detail::read_num(v, "L_r", c.params.L_r);
      detail::read_num(v, "C_f", c.params.C_f_nom);
      detail::read_num(v, "C_r", c.params.C_r_nom);
      detail::read_num(v, "g", c.params.g);
    }
    if (j.contains("dyn_noise")) {
      detail::read_diag<4>(j.at("dyn_noise"), "W", c.dyn_noise.W, "dyn_noise");
      detail::read_diag<2>(j.at("dyn_noise"), "V", c.dyn_noise.V, "dyn_noise");
    }
    if (j.contains("bank_kin_noise")) {
      detail::read_diag<3>(j.at("bank_kin_noise"), "W", c.bank_kin_noise.W, "bank_kin_noise");
      detail::read_diag<1>(j.at("bank_kin_noise"), "V", c.bank_kin_noise.V, "bank_kin_noise");
    }
    if (j.contains("corrected_kin_noise")) {
      detail::read_diag<2>(j.at("corrected_kin_noise"), "W", c.corrected_kin_noise.W,
                           "corrected_kin_noise");
      detail::read_diag<1>(j.at("corrected_kin_noise"), "V", c.corrected_kin_noise.V,
                           "corrected_kin_noise");
    }
    if (j.contains("initial_covariance")) {
      detail::read_diag<4>(j.at("initial_covariance"), "dyn", c.P0_dyn, "initial_covariance");
      detail::read_diag<3>(j.at("initial_covariance"), "kin", c.P0_kin, "initial_covariance");
    }
    if (j.contains("adaptation")) {
      const auto& a = j.at("adaptation");
      detail::read_num(a, "lambda", c.adaptation.lambda);
      detail::read_num(a, "delta", c.adaptation.delta);
      detail::read_num(a, "r_t", c.adaptation.r_t);
      detail::read_num(a, "c_t", c.adaptation.c_t);
      detail::read_num(a, "yaw_accel_cutoff_hz", c.adaptation.yaw_accel_cutoff_hz);
      detail::read_num(a, "v_x_min", c.adaptation.v_x_min);
      detail::read_num(a, "clamp_low", c.adaptation.clamp_low);
      detail::read_num(a, "clamp_high", c.adaptation.clamp_high);
    }
    if (j.contains("scenario")) rc.scenario = scenario_from_json(j.at("scenario"), rc.noise_scale);
    c.validate();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return rc;
}

inline nlohmann::json config_to_json(const RunConfig& rc) {
  const PipelineConfig& c = rc.pipeline;
  nlohmann::json j;
  j["variant"] = std::string(to_string(c.variant));
  j["dt"] = c.dt;
  j["diagnostics"] = c.diagnostics;
  j["noise_scale"] = rc.noise_scale;
  j["vehicle"] = {{"m", c.params.m},         {"I_z", c.params.I_z},
                  {"L_f", c.params.L_f},     {"L_r", c.params.L_r},
                  {"C_f", c.params.C_f_nom}, {"C_r", c.params.C_r_nom},
                  {"g", c.params.g}};
  j["dyn_noise"] = {{"W", detail::diag_json<4>(c.dyn_noise.W)},
                    {"V", detail::diag_json<2>(c.dyn_noise.V)}};
  j["bank_kin_noise"] = {{"W", detail::diag_json<3>(c.bank_kin_noise.W)},
                         {"V", detail::diag_json<1>(c.bank_kin_noise.V)}};
  j["corrected_kin_noise"] = {{"W", detail::diag_json<2>(c.corrected_kin_noise.W)},
                              {"V", detail::diag_json<1>(c.corrected_kin_noise.V)}};
  j["initial_covariance"] = {{"dyn", detail::diag_json<4>(c.P0_dyn)},
                             {"kin", detail::diag_json<3>(c.P0_kin)}};
  const AdaptationConfig& a = c.adaptation;
  j["adaptation"] = {{"lambda", a.lambda},       {"delta", a.delta},
                     {"r_t", a.r_t},             {"c_t", a.c_t},
                     {"yaw_accel_cutoff_hz", a.yaw_accel_cutoff_hz},
                     {"v_x_min", a.v_x_min},     {"clamp_low", a.clamp_low},
                     {"clamp_high", a.clamp_high}};
  if (rc.scenario) {
    const sim::ScenarioSpec& s = *rc.scenario;
    j["scenario"] = {{"name", std::string(sim::to_string(s.name))},
                     {"duration", s.duration},
                     {"dt", s.dt},
                     {"speed", s.speed},
                     {"min_speed", s.min_speed},
                     {"maneuver_start", s.maneuver_start},
                     {"maneuver_length", s.maneuver_length},
                     {"cone_spacing", s.cone_spacing},
                     {"steer_period", s.steer_period},
                     {"steer_amplitude", s.steer_amplitude},
                     {"target_lat_accel", s.target_lat_accel},
                     {"bank_deg", s.bank_deg},
                     {"bias", s.bias},
                     {"tire", s.tire == sim::TireVariant::Linear ? "linear" : "brush"},
                     {"mu_peak", s.mu_peak},
                     {"stiffness_scale", s.stiffness_scale},
                     {"noise",
                      {{"a_x", s.noise.a_x},
                       {"a_y", s.noise.a_y},
                       {"r", s.noise.r},
                       {"v_x", s.noise.v_x},
                       {"delta_f", s.noise.delta_f}}}};
  }
  return j;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace sideslip

#endif  // SIDESLIP_CONFIG_HPP
