#ifndef SIDESLIP_MODEL_HPP
#define SIDESLIP_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include "sideslip/types.hpp"

namespace sideslip {

struct AxleForces {
  double front = 0.0;  // N
  double rear = 0.0;   // N
};

namespace detail {

inline void require_speed(double v_x, const char* where) {
  if (!(v_x > 0.0)) {
    throw DomainError(std::string(where) + ": longitudinal speed must be > 0, got " +
                      std::to_string(v_x));
  }
}

}  // namespace detail

/// Linear lateral tire forces of the single-track model.
inline AxleForces lateral_tire_forces_linear(const VehicleParams& p, double C_f, double C_r,
                                             double v_y, double r, double v_x,
                                             double delta_f) {
  detail::require_speed(v_x, "lateral_tire_forces_linear");
  AxleForces f;
  f.front = C_f * (delta_f - (v_y + p.L_f * r) / v_x);
  f.rear = C_r * ((-v_y + p.L_r * r) / v_x);
  return f;
}

/// Unaugmented bicycle model, state [v_y, r].
inline PlainDynamicsModel dynamics_matrices(const VehicleParams& p, double C_f, double C_r,
                                            double v_x) {
  detail::require_speed(v_x, "dynamics_matrices");
  const double m_vx = p.m * v_x;
  const double iz_vx = p.I_z * v_x;
  PlainDynamicsModel ss;
  ss.A << -(C_f + C_r) / m_vx, -v_x - (p.L_f * C_f - p.L_r * C_r) / m_vx,
      (-p.L_f * C_f + p.L_r * C_r) / iz_vx,
      (-p.L_f * p.L_f * C_f - p.L_r * p.L_r * C_r) / iz_vx;
  ss.B << C_f / p.m, p.L_f * C_f / p.I_z;
  ss.C << -(C_f + C_r) / m_vx, -(p.L_f * C_f - p.L_r * C_r) / m_vx, 0.0, 1.0;
  ss.D << C_f / p.m, 0.0;
  return ss;
}

/// Bicycle model augmented with a random-walk bank term sin(phi) and an
/// accelerometer bias d. State [v_y, r, sin(phi), d].
inline DynamicsModel dynamics_matrices_augmented(const VehicleParams& p, double C_f,
                                                 double C_r, double v_x) {
  const PlainDynamicsModel base = dynamics_matrices(p, C_f, C_r, v_x);
  DynamicsModel ss;
  ss.A.topLeftCorner<2, 2>() = base.A;
  ss.A(0, 2) = -p.g;
  ss.B.topRows<2>() = base.B;
  ss.C.leftCols<2>() = base.C;
  // gravity enters v_y dynamics and the accelerometer with opposite signs, so
  // only the bias shows up in the output row
  ss.C(0, 3) = 1.0;
  ss.D = base.D;
  return ss;
}

/// Point-mass kinematics with the bank term as a third state.
inline BankKinematicsModel kinematics_matrices_bank(double r, double g) {
  BankKinematicsModel ss;
  ss.A << 0.0, r, 0.0,
      -r, 0.0, -g,
      0.0, 0.0, 0.0;
  ss.B << 1.0, 0.0,
      0.0, 1.0,
      0.0, 0.0;
  ss.C << 1.0, 0.0, 0.0;
  return ss;
}

/// Point-mass kinematics fed with a bank/bias corrected lateral acceleration.
inline PlainKinematicsModel kinematics_matrices_plain(double r) {
  PlainKinematicsModel ss;
  ss.A << 0.0, r, -r, 0.0;
  ss.B.setIdentity();
  ss.C << 1.0, 0.0;
  return ss;
}

/// Forward-Euler discretization: A_d = I + A dt, B_d = B dt.
template <int N, int M, int P>
StateSpace<N, M, P> discretize_forward_euler(const StateSpace<N, M, P>& ss, double dt) {
  if (!(dt > 0.0)) {
    throw DomainError("discretize_forward_euler: dt must be > 0");
  }
  StateSpace<N, M, P> out = ss;
  out.A = ss.A * dt + Mat<N, N>::Identity();
  out.B = ss.B * dt;
  return out;
}

/// Lateral acceleration with the estimated gravity component and sensor bias
/// removed.
inline double corrected_lateral_accel(double a_y_sen, double sin_phi_hat, double d_hat,
                                      double g) {
  if (std::abs(sin_phi_hat) > 1.0) {
    throw DomainError("corrected_lateral_accel: |sin_phi_hat| must be <= 1");
  }
  return a_y_sen - g * sin_phi_hat - d_hat;
}

/// Reporting-time conversion; the filters only ever carry sin(phi).
inline double bank_angle_from_sin(double sin_phi) {
  return std::asin(std::clamp(sin_phi, -1.0, 1.0));
}

}  // namespace sideslip

#endif  // SIDESLIP_MODEL_HPP
