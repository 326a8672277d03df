#ifndef SIDESLIP_ADAPTATION_HPP
#define SIDESLIP_ADAPTATION_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>

#include "sideslip/types.hpp"

namespace sideslip {

struct AdaptationConfig {
  double lambda = 0.975;             // forgetting factor
  double delta = 0.02;               // regularization weight toward nominal stiffness
  double r_t = 0.1;                  // rad/s, yaw-rate gate
  double c_t = 20.0;                 // max |Phi^T(2,1) / Phi^T(2,2)|
  double yaw_accel_cutoff_hz = 10.0;
  double v_x_min = 1.0;              // m/s
  double clamp_low = 0.1;            // stiffness bounds as multiples of nominal
  double clamp_high = 3.0;

  void validate() const {
    if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("AdaptationConfig.lambda must be in (0, 1)");
    if (!(delta > 0.0)) throw DomainError("AdaptationConfig.delta must be > 0");
    if (!(r_t > 0.0)) throw DomainError("AdaptationConfig.r_t must be > 0");
    if (!(c_t > 1.0)) throw DomainError("AdaptationConfig.c_t must be > 1");
    if (!(yaw_accel_cutoff_hz > 0.0)) throw DomainError("AdaptationConfig.yaw_accel_cutoff_hz must be > 0");
    if (!(v_x_min > 0.0)) throw DomainError("AdaptationConfig.v_x_min must be > 0");
    if (!(clamp_low > 0.0 && clamp_high > clamp_low)) {
      throw DomainError("AdaptationConfig clamp bounds must satisfy 0 < low < high");
    }
  }
};

/// Y = Phi^T theta with theta = [C_f, C_r].
struct RegressionSample {
  Mat2 Phi = Mat2::Zero();
  Vec2 Y = Vec2::Zero();
  Vec2 Y_tilde = Vec2::Zero();  // Y - Phi^T theta_plus

  Mat2 phi_t() const { return Phi.transpose(); }
};

struct AdaptationState {
  Vec2 theta_tilde_star = Vec2::Zero();  // deviation from nominal, unclamped
  Mat2 R = Mat2::Zero();                 // forgetting-weighted sum of Phi Phi^T
  Vec2 theta_star = Vec2::Zero();        // clamped stiffnesses handed to the observer
  double prior_error_norm = 0.0;         // |e_k| of the last update
  bool clamped = false;
  std::int64_t steps = 0;
};

inline AdaptationState make_adaptation_state(const Vec2& theta_plus) {
  AdaptationState s;
  s.theta_star = theta_plus;
  return s;
}

struct YawAccelEstimate {
  double r_dot = 0.0;
  double filter_state = 0.0;
};

/// Backward difference of the yaw rate through a first-order low-pass (exact
/// discretization of the continuous lag at `cutoff_hz`).
inline YawAccelEstimate yaw_accel_estimate(double r_now, double r_prev, double dt,
                                           double filter_state, double cutoff_hz = 10.0) {
  if (!(dt > 0.0)) throw DomainError("yaw_accel_estimate: dt must be > 0");
  const double raw = (r_now - r_prev) / dt;
  const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz * dt);
  YawAccelEstimate out;
  out.filter_state = filter_state + alpha * (raw - filter_state);
  out.r_dot = out.filter_state;
  return out;
}

/// Regression row pair built from sensors and the kinematics observer's lateral
/// velocity. Y_tilde is always taken against the nominal stiffness.
inline RegressionSample build_regression(const SensorSample& s, double v_y_hat_k, double r_dot,
                                         const VehicleParams& p, double v_x_min = 1.0) {
  if (!(s.v_x >= v_x_min) || !(s.v_x > 0.0)) {
    throw DomainError("build_regression: v_x " + std::to_string(s.v_x) + " below minimum");
  }
  const double vx = s.v_x;
  const double r = s.r;
  Mat2 phi_t;
  phi_t(0, 0) = (-p.L_f * p.L_f * r - p.L_f * v_y_hat_k) / vx + p.L_f * s.delta_f;
  phi_t(0, 1) = (-p.L_r * p.L_r * r + p.L_r * v_y_hat_k) / vx;
  phi_t(1, 0) = (-p.L_f * r - v_y_hat_k) / vx + s.delta_f;
  phi_t(1, 1) = (p.L_r * r - v_y_hat_k) / vx;

  RegressionSample out;
  out.Phi = phi_t.transpose();
  out.Y << p.I_z * r_dot, p.m * s.a_y_sen;
  out.Y_tilde = out.Y - phi_t * p.nominal_stiffness();
  return out;
}

/// Closed-form regularized weighted least squares over the whole sequence.
/// The last sample carries weight 1, earlier ones lambda^(k-i).
inline Vec2 batch_rwls(std::span<const RegressionSample> samples, const AdaptationConfig& cfg,
                       const Vec2& theta_plus) {
  Mat2 info = Mat2::Zero();
  Vec2 rhs = Vec2::Zero();
  for (const RegressionSample& s : samples) {
    info = cfg.lambda * info + s.Phi * s.Phi.transpose();
    rhs = cfg.lambda * rhs + s.Phi * s.Y;
  }
  const Mat2 lhs = info + cfg.delta * Mat2::Identity();
  return lhs.ldlt().solve(cfg.delta * theta_plus + rhs);
}

inline Vec2 clamp_stiffness(const Vec2& theta, const Vec2& theta_plus, const AdaptationConfig& cfg,
                            bool* clamped = nullptr) {
  Vec2 out = theta;
  bool hit = false;
  for (int i = 0; i < 2; ++i) {
    const double lo = cfg.clamp_low * theta_plus(i);
    const double hi = cfg.clamp_high * theta_plus(i);
    if (!(out(i) >= lo)) {
      out(i) = lo;
      hit = true;
    } else if (out(i) > hi) {
      out(i) = hi;
      hit = true;
    }
  }
  if (clamped) *clamped = hit;
  return out;
}

/// Recursive form of batch_rwls: one new sample, a 2x2 solve.
inline AdaptationState recursive_rwls_step(const AdaptationState& state,
                                           const RegressionSample& sample,
                                           const AdaptationConfig& cfg, const Vec2& theta_plus) {
  AdaptationState next = state;
  next.R = cfg.lambda * state.R + sample.Phi * sample.Phi.transpose();
  const Vec2 e = sample.Y_tilde - sample.Phi.transpose() * state.theta_tilde_star;
  const Mat2 gain_inv = next.R + cfg.delta * Mat2::Identity();
  const Vec2 step = cfg.delta * (cfg.lambda - 1.0) * state.theta_tilde_star + sample.Phi * e;
  next.theta_tilde_star = state.theta_tilde_star + gain_inv.ldlt().solve(step);
  next.theta_star = clamp_stiffness(theta_plus + next.theta_tilde_star, theta_plus, cfg,
                                    &next.clamped);
  next.prior_error_norm = e.norm();
  next.steps = state.steps + 1;
  return next;
}

/// Accept a regression sample only if |Phi^T(2,1) / Phi^T(2,2)| lies in
/// [1/c_t, c_t].
inline bool conditioning_gate(const RegressionSample& sample, double c_t) {
  const double num = sample.Phi(0, 1);  // Phi^T(2,1)
  const double den = sample.Phi(1, 1);  // Phi^T(2,2)
  if (den == 0.0 || !std::isfinite(num) || !std::isfinite(den)) return false;
  const double ratio = std::abs(num / den);
  return ratio >= 1.0 / c_t && ratio <= c_t;
}

}  // namespace sideslip

#endif  // SIDESLIP_ADAPTATION_HPP
