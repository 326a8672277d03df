#ifndef SIDESLIP_PIPELINE_HPP
#define SIDESLIP_PIPELINE_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sideslip/adaptation.hpp"
#include "sideslip/diagnostics.hpp"
#include "sideslip/observers.hpp"

namespace sideslip {

enum class Variant { Algorithm1, Algorithm2, DynamicsOnly, HybridSwitch };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Algorithm1: return "algorithm1";
    case Variant::Algorithm2: return "algorithm2";
    case Variant::DynamicsOnly: return "dynamics_only";
    case Variant::HybridSwitch: return "hybrid_switch";
  }
  return "unknown";
}

inline std::optional<Variant> variant_from_string(std::string_view s) {
  for (Variant v : {Variant::Algorithm1, Variant::Algorithm2, Variant::DynamicsOnly,
                    Variant::HybridSwitch}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

inline NoiseConfig<4, 2> default_dyn_noise() {
  NoiseConfig<4, 2> n;
  n.W = Vec<4>(6.0, 0.5, 0.1, 0.0002).asDiagonal();
  n.V = Vec2(0.1, 0.01).asDiagonal();
  return n;
}

inline NoiseConfig<3, 1> default_bank_kin_noise() {
  NoiseConfig<3, 1> n;
  n.W = Vec<3>(0.2, 0.6, 0.05).asDiagonal();
  n.V(0, 0) = 0.05;
  return n;
}

inline NoiseConfig<2, 1> default_corrected_kin_noise() {
  NoiseConfig<2, 1> n;
  n.W = Vec2(0.2, 0.6).asDiagonal();
  n.V(0, 0) = 0.05;
  return n;
}

struct PipelineConfig {
  Variant variant = Variant::Algorithm1;
  double dt = 0.01;
  VehicleParams params;
  NoiseConfig<4, 2> dyn_noise = default_dyn_noise();
  NoiseConfig<3, 1> bank_kin_noise = default_bank_kin_noise();
  NoiseConfig<2, 1> corrected_kin_noise = default_corrected_kin_noise();
  AdaptationConfig adaptation;
  Mat<4, 4> P0_dyn = Mat<4, 4>::Identity();
  Mat<3, 3> P0_kin = Mat<3, 3>::Identity();
  bool diagnostics = false;

  void validate() const {
    if (!(dt > 0.0)) throw DomainError("PipelineConfig.dt must be > 0");
    params.validate();
    adaptation.validate();
  }
};

struct EstimateFrame {
  double t = 0.0;
  double beta_hat = 0.0;
  double v_y_hat_d = 0.0;
  double v_y_hat_k = 0.0;
  double sin_phi_hat = 0.0;
  double d_hat = 0.0;
  double C_f_hat = 0.0;
  double C_r_hat = 0.0;
  bool yaw_gate = false;     // |r| >= r_t
  bool cond_gate = false;    // conditioning test passed (always true outside Algorithm 2)
  bool adapted = false;      // stiffness update applied this frame
  bool clamped = false;      // stiffness hit its bounds
  bool speed_hold = false;   // v_x below the minimum, all estimates held
  bool kin_active = false;   // hybrid: beta taken from the kinematics observer

  bool operator==(const EstimateFrame&) const = default;
};

struct PipelineState {
  PipelineConfig cfg;
  Vec2 theta_plus = Vec2::Zero();
  DynObserver dyn;
  BankKinObserver kin_bank;
  CorrectedKinObserver kin_corr;
  AdaptationState adapt;
  double r_dot_filter = 0.0;
  std::size_t frame = 0;
  EstimateFrame last;
  std::optional<DiagnosticsRecorder> diag;
};

struct StepResult {
  PipelineState state;
  EstimateFrame frame;
};

/// Observers seeded from the first sample: dynamics [0, r0, 0, 0], kinematics
/// [v_x0, 0(, 0)]. Adaptation starts at theta_tilde* = 0, R = 0.
inline PipelineState make_pipeline_state(const PipelineConfig& cfg, const SensorSample& s0) {
  cfg.validate();
  require_finite(s0, 0);
  PipelineState st;
  st.cfg = cfg;
  st.theta_plus = cfg.params.nominal_stiffness();

  st.dyn.params = cfg.params;
  st.dyn.noise = cfg.dyn_noise;
  st.dyn.C_f = st.theta_plus(0);
  st.dyn.C_r = st.theta_plus(1);
  st.dyn.state.x_hat << 0.0, s0.r, 0.0, 0.0;
  st.dyn.state.P = cfg.P0_dyn;

  st.kin_bank.g = cfg.params.g;
  st.kin_bank.noise = cfg.bank_kin_noise;
  st.kin_bank.state.x_hat << s0.v_x, 0.0, 0.0;
  st.kin_bank.state.P = cfg.P0_kin;

  st.kin_corr.g = cfg.params.g;
  st.kin_corr.noise = cfg.corrected_kin_noise;
  st.kin_corr.state.x_hat << s0.v_x, 0.0;
  st.kin_corr.state.P = cfg.P0_kin.topLeftCorner<2, 2>();

  st.adapt = make_adaptation_state(st.theta_plus);
  if (cfg.diagnostics) st.diag.emplace(cfg.adaptation);

  EstimateFrame& f = st.last;
  f.t = s0.t;
  f.v_y_hat_d = 0.0;
  f.beta_hat = 0.0;
  f.C_f_hat = st.theta_plus(0);
  f.C_r_hat = st.theta_plus(1);
  f.cond_gate = true;
  f.yaw_gate = std::abs(s0.r) >= cfg.adaptation.r_t;
  return st;
}

namespace detail {

inline EstimateFrame dyn_frame(const PipelineState& st, const SensorSample& s) {
  EstimateFrame f;
  f.t = s.t;
  f.v_y_hat_d = st.dyn.v_y();
  f.beta_hat = std::atan(f.v_y_hat_d / s.v_x);
  f.sin_phi_hat = st.dyn.sin_phi();
  f.d_hat = st.dyn.bias();
  f.C_f_hat = st.adapt.theta_star(0);
  f.C_r_hat = st.adapt.theta_star(1);
  f.clamped = st.adapt.clamped;
  f.cond_gate = true;
  return f;
}

/// Frames below the minimum speed repeat the previous estimates.
inline bool speed_hold(PipelineState& st, const SensorSample& s_now, EstimateFrame& out) {
  if (s_now.v_x >= st.cfg.adaptation.v_x_min) return false;
  out = st.last;
  out.t = s_now.t;
  out.speed_hold = true;
  out.adapted = false;
  return true;
}

inline void begin_step(PipelineState& st, const SensorSample& s_now) {
  ++st.frame;
  require_finite(s_now, st.frame);
}

/// Shared body of both adaptive algorithms.
template <int N>
StepResult adaptive_step(PipelineState st, const SensorSample& s_prev, const SensorSample& s_now,
                         const std::optional<Vec2>& theta_true, bool conditioning) {
  begin_step(st, s_now);
  EstimateFrame f;
  if (speed_hold(st, s_now, f)) {
    st.last = f;
    return {std::move(st), f};
  }
  const PipelineConfig& cfg = st.cfg;
  const double dt = cfg.dt;

  // correction from the previous frame's dynamics estimates
  const double correction =
      N == 2 ? -cfg.params.g * st.dyn.sin_phi() - st.dyn.bias() : 0.0;

  st.dyn.C_f = st.adapt.theta_star(0);
  st.dyn.C_r = st.adapt.theta_star(1);
  st.dyn = dyn_observer_step(st.dyn, s_prev, s_now, dt, cfg.adaptation.v_x_min);

  KinObserver<N>* kin;
  if constexpr (N == 3) {
    kin = &st.kin_bank;
  } else {
    kin = &st.kin_corr;
  }
  *kin = kin_observer_step(*kin, s_prev, s_now, correction, dt);

  const YawAccelEstimate rd = yaw_accel_estimate(s_now.r, s_prev.r, dt, st.r_dot_filter,
                                                 cfg.adaptation.yaw_accel_cutoff_hz);
  st.r_dot_filter = rd.filter_state;

  const bool yaw_gate = std::abs(s_now.r) >= cfg.adaptation.r_t;
  bool cond_gate = true;
  bool adapted = false;
  const double v_y_k = kin->v_y();
  if (yaw_gate) {
    const RegressionSample sample =
        build_regression(s_now, v_y_k, rd.r_dot, cfg.params, cfg.adaptation.v_x_min);
    if (conditioning) cond_gate = conditioning_gate(sample, cfg.adaptation.c_t);
    if (cond_gate) {
      st.adapt = recursive_rwls_step(st.adapt, sample, cfg.adaptation, st.theta_plus);
      adapted = true;
      if (st.diag) {
        std::optional<Vec2> dev;
        if (theta_true) dev = *theta_true - st.theta_plus;
        st.diag->record(st.frame, sample, dev);
      }
    }
  } else {
    *kin = kin_reset_from_dyn(*kin, st.dyn, s_now.v_x);
  }

  f = dyn_frame(st, s_now);
  f.v_y_hat_k = v_y_k;
  f.yaw_gate = yaw_gate;
  f.cond_gate = cond_gate;
  f.adapted = adapted;
  st.last = f;
  return {std::move(st), f};
}

}  // namespace detail

/// Dual observer with the 3-state (bank-as-state) kinematics model.
/// `theta_true` is only used by the diagnostics recorder.
inline StepResult algorithm1_step(PipelineState st, const SensorSample& s_prev,
                                  const SensorSample& s_now,
                                  const std::optional<Vec2>& theta_true = std::nullopt) {
  return detail::adaptive_step<3>(std::move(st), s_prev, s_now, theta_true, false);
}

/// Dual observer with the 2-state kinematics model fed the bank- and
/// bias-corrected lateral acceleration, plus the conditioning gate.
inline StepResult algorithm2_step(PipelineState st, const SensorSample& s_prev,
                                  const SensorSample& s_now,
                                  const std::optional<Vec2>& theta_true = std::nullopt) {
  return detail::adaptive_step<2>(std::move(st), s_prev, s_now, theta_true, true);
}

/// Dynamics observer alone at the nominal stiffness.
inline StepResult dynamics_only_step(PipelineState st, const SensorSample& s_prev,
                                     const SensorSample& s_now) {
  detail::begin_step(st, s_now);
  EstimateFrame f;
  if (detail::speed_hold(st, s_now, f)) {
    st.last = f;
    return {std::move(st), f};
  }
  st.dyn = dyn_observer_step(st.dyn, s_prev, s_now, st.cfg.dt, st.cfg.adaptation.v_x_min);
  f = detail::dyn_frame(st, s_now);
  f.v_y_hat_k = f.v_y_hat_d;
  f.yaw_gate = std::abs(s_now.r) >= st.cfg.adaptation.r_t;
  st.last = f;
  return {std::move(st), f};
}

/// Switching baseline: the kinematics observer (raw lateral acceleration, no
/// bank or bias correction) supplies beta while |r| >= r_t, the dynamics
/// observer at nominal stiffness otherwise. Both filters run every frame.
inline StepResult hybrid_switch_step(PipelineState st, const SensorSample& s_prev,
                                     const SensorSample& s_now) {
  detail::begin_step(st, s_now);
  EstimateFrame f;
  if (detail::speed_hold(st, s_now, f)) {
    st.last = f;
    return {std::move(st), f};
  }
  const double dt = st.cfg.dt;
  st.dyn = dyn_observer_step(st.dyn, s_prev, s_now, dt, st.cfg.adaptation.v_x_min);
  st.kin_corr = kin_observer_step(st.kin_corr, s_prev, s_now, 0.0, dt);

  const bool yaw_gate = std::abs(s_now.r) >= st.cfg.adaptation.r_t;
  if (!yaw_gate) st.kin_corr = kin_reset_from_dyn(st.kin_corr, st.dyn, s_now.v_x);

  f = detail::dyn_frame(st, s_now);
  f.v_y_hat_k = st.kin_corr.v_y();
  f.yaw_gate = yaw_gate;
  f.kin_active = yaw_gate;
  if (yaw_gate) f.beta_hat = std::atan(f.v_y_hat_k / s_now.v_x);
  st.last = f;
  return {std::move(st), f};
}

inline StepResult pipeline_step(PipelineState st, const SensorSample& s_prev,
                                const SensorSample& s_now,
                                const std::optional<Vec2>& theta_true = std::nullopt) {
  switch (st.cfg.variant) {
    case Variant::Algorithm1: return algorithm1_step(std::move(st), s_prev, s_now, theta_true);
    case Variant::Algorithm2: return algorithm2_step(std::move(st), s_prev, s_now, theta_true);
    case Variant::DynamicsOnly: return dynamics_only_step(std::move(st), s_prev, s_now);
    case Variant::HybridSwitch: return hybrid_switch_step(std::move(st), s_prev, s_now);
  }
  throw DomainError("pipeline_step: unknown variant");
}

/// A run stopped by an error; `frame` is the 0-based input frame index.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(std::size_t frame, const std::string& what)
      : std::runtime_error("aborted at frame " + std::to_string(frame) + ": " + what),
        frame_(frame) {}
  std::size_t frame() const { return frame_; }

 private:
  std::size_t frame_;
};

struct PipelineRun {
  std::vector<EstimateFrame> frames;
  std::optional<DiagnosticsTrace> diagnostics;
  Vec2 theta_tilde_star = Vec2::Zero();
};

/// Run a pipeline over a whole stream. `theta_true`, when given, must be as
/// long as `samples` and is forwarded to the diagnostics recorder.
inline PipelineRun run_pipeline(const PipelineConfig& cfg, std::span<const SensorSample> samples,
                                std::span<const Vec2> theta_true = {}) {
  if (samples.empty()) throw DomainError("run_pipeline: empty sensor stream");
  if (!theta_true.empty() && theta_true.size() != samples.size()) {
    throw DomainError("run_pipeline: truth length differs from sensor stream");
  }
  PipelineRun out;
  out.frames.reserve(samples.size());
  std::size_t i = 0;
  try {
    PipelineState st = make_pipeline_state(cfg, samples[0]);
    out.frames.push_back(st.last);
    for (i = 1; i < samples.size(); ++i) {
      std::optional<Vec2> truth;
      if (!theta_true.empty()) truth = theta_true[i];
      StepResult r = pipeline_step(std::move(st), samples[i - 1], samples[i], truth);
      st = std::move(r.state);
      out.frames.push_back(r.frame);
    }
    if (st.diag) out.diagnostics = st.diag->trace();
    out.theta_tilde_star = st.adapt.theta_tilde_star;
  } catch (const RunAborted&) {
    throw;
  } catch (const std::exception& e) {
    throw RunAborted(i, e.what());
  }
  return out;
}

}  // namespace sideslip

#endif  // SIDESLIP_PIPELINE_HPP
