#ifndef SIDESLIP_OBSERVERS_HPP
#define SIDESLIP_OBSERVERS_HPP

#include <algorithm>
#include <string>

#include "sideslip/ekf.hpp"
#include "sideslip/model.hpp"

namespace sideslip {

/// 4-state dynamics observer over [v_y, r, sin(phi), d].
struct DynObserver {
  ObserverState<4> state;
  NoiseConfig<4, 2> noise;
  VehicleParams params;
  double C_f = params.C_f_nom;
  double C_r = params.C_r_nom;

  double v_y() const { return state.x_hat(0); }
  double r() const { return state.x_hat(1); }
  double sin_phi() const { return state.x_hat(2); }
  double bias() const { return state.x_hat(3); }
};

enum class KinVariant {
  BankState,  // [v_x, v_y, sin(phi)], raw a_y_sen input
  Corrected,  // [v_x, v_y], a_y_sen corrected by the dynamics observer
};

/// Kinematics observer. The state dimension fixes the variant: 3 carries the
/// bank as a state, 2 expects a corrected lateral acceleration.
template <int N>
struct KinObserver {
  static_assert(N == 2 || N == 3, "kinematics observer has 2 or 3 states");
  static constexpr KinVariant kVariant = N == 3 ? KinVariant::BankState : KinVariant::Corrected;

  ObserverState<N> state;
  NoiseConfig<N, 1> noise;
  double g = 9.80665;

  KinVariant variant() const { return kVariant; }
  double v_x() const { return state.x_hat(0); }
  double v_y() const { return state.x_hat(1); }
};

using BankKinObserver = KinObserver<3>;
using CorrectedKinObserver = KinObserver<2>;

/// One dynamics-observer step. Matrices are rebuilt at the current speed and
/// the observer's current cornering stiffnesses.
inline DynObserver dyn_observer_step(const DynObserver& obs, const SensorSample& s_prev,
                                     const SensorSample& s_now, double dt,
                                     double v_x_min = 1.0) {
  if (s_now.v_x < v_x_min) {
    throw DomainError("dyn_observer_step: v_x " + std::to_string(s_now.v_x) +
                      " below minimum " + std::to_string(v_x_min));
  }
  const DynamicsModel ss = discretize_forward_euler(
      dynamics_matrices_augmented(obs.params, obs.C_f, obs.C_r, s_now.v_x), dt);
  const Vec<1> u_prev(s_prev.delta_f);
  const Vec<1> u_now(s_now.delta_f);
  const Vec2 y(s_now.a_y_sen, s_now.r);

  DynObserver next = obs;
  next.state = ekf_update(obs.state, ss, u_prev, u_now, y, obs.noise);
  next.state.x_hat(2) = std::clamp(next.state.x_hat(2), -1.0, 1.0);
  return next;
}

/// One kinematics-observer step. The transition uses the previous frame's yaw
/// rate and accelerations; `correction` is added to the previous lateral
/// acceleration (pass -g sin(phi_hat) - d_hat for the corrected variant, 0 for
/// the bank-state variant). The measurement is the current v_x.
template <int N>
KinObserver<N> kin_observer_step(const KinObserver<N>& obs, const SensorSample& s_prev,
                                 const SensorSample& s_now, double correction, double dt) {
  Vec<2> u_prev(s_prev.a_x, s_prev.a_y_sen + correction);
  const Vec<2> u_now = Vec<2>::Zero();
  const Vec<1> y(s_now.v_x);

  KinObserver<N> next = obs;
  if constexpr (N == 3) {
    const BankKinematicsModel ss =
        discretize_forward_euler(kinematics_matrices_bank(s_prev.r, obs.g), dt);
    next.state = ekf_update(obs.state, ss, u_prev, u_now, y, obs.noise);
    next.state.x_hat(2) = std::clamp(next.state.x_hat(2), -1.0, 1.0);
  } else {
    const PlainKinematicsModel ss =
        discretize_forward_euler(kinematics_matrices_plain(s_prev.r), dt);
    next.state = ekf_update(obs.state, ss, u_prev, u_now, y, obs.noise);
  }
  return next;
}

/// Re-seed the kinematics observer from the dynamics observer while the yaw
/// rate is too small for the kinematics model to be observable.
///
/// Covariance entries follow the 1-based P_d(1,1), P_d(3,3) convention:
/// P_d(1,1) is the v_y variance and P_d(3,3) the sin(phi) variance.
template <int N>
KinObserver<N> kin_reset_from_dyn(const KinObserver<N>& kin, const DynObserver& dyn,
                                  double v_x_meas) {
  KinObserver<N> next = kin;
  next.state.x_hat.setZero();
  next.state.P.setZero();
  next.state.x_hat(0) = v_x_meas;
  next.state.x_hat(1) = dyn.state.x_hat(0);
  next.state.P(1, 1) = dyn.state.P(0, 0);
  if constexpr (N == 3) {
    next.state.x_hat(2) = dyn.state.x_hat(2);
    next.state.P(2, 2) = dyn.state.P(2, 2);
  }
  return next;
}

/// Rank of the 3-state kinematics model's discrete observability matrix
/// [C; C A_d; C A_d^2] at a given yaw rate.
inline int kinematics_observability_rank(double r, double dt, double g) {
  const BankKinematicsModel ss = discretize_forward_euler(kinematics_matrices_bank(r, g), dt);
  Mat<3, 3> O;
  O.row(0) = ss.C;
  O.row(1) = ss.C * ss.A;
  O.row(2) = ss.C * ss.A * ss.A;
  Eigen::FullPivLU<Mat<3, 3>> lu(O);
  lu.setThreshold(1e-12);
  return static_cast<int>(lu.rank());
}

}  // namespace sideslip

#endif  // SIDESLIP_OBSERVERS_HPP
