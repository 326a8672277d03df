#ifndef SIDESLIP_EKF_HPP
#define SIDESLIP_EKF_HPP

#include <cstdint>

#include "sideslip/types.hpp"

namespace sideslip {

/// Mean and covariance of one filter plus its step counter.
template <int N>
struct ObserverState {
  Vec<N> x_hat = Vec<N>::Zero();
  Mat<N, N> P = Mat<N, N>::Identity();
  std::int64_t k = 0;
};

/// Process (W) and measurement (V) noise covariances.
template <int N, int P>
struct NoiseConfig {
  Mat<N, N> W = Mat<N, N>::Zero();
  Mat<P, P> V = Mat<P, P>::Identity();
};

template <int N>
Mat<N, N> covariance_symmetrize(const Mat<N, N>& P) {
  return 0.5 * (P + P.transpose());
}

/// Dynamic-size overload for callers holding Eigen::MatrixXd.
inline Eigen::MatrixXd covariance_symmetrize(const Eigen::MatrixXd& P) {
  if (P.rows() != P.cols()) {
    throw DomainError("covariance_symmetrize: matrix must be square");
  }
  return 0.5 * (P + P.transpose());
}

/// One predict/correct cycle of a time-varying linear Kalman filter.
///
/// `ss` must already be discrete. The prediction uses the previous input and
/// the measurement feedthrough uses the current one. Covariance is updated in
/// Joseph form and symmetrized afterwards.
template <int N, int M, int P>
ObserverState<N> ekf_update(const ObserverState<N>& state, const StateSpace<N, M, P>& ss,
                            const Vec<M>& u_prev, const Vec<M>& u_now, const Vec<P>& y_now,
                            const NoiseConfig<N, P>& noise) {
  const Vec<N> x_pred = ss.A * state.x_hat + ss.B * u_prev;
  const Mat<N, N> P_pred = ss.A * state.P * ss.A.transpose() + noise.W;

  const Vec<P> innovation = y_now - ss.C * x_pred - ss.D * u_now;
  const Mat<P, P> S = covariance_symmetrize<P>(ss.C * P_pred * ss.C.transpose() + noise.V);

  // LDL^T avoids the square roots of a Cholesky factor; all pivots > 0 <=> S > 0
  Eigen::LDLT<Mat<P, P>> ldlt(S);
  if (!S.allFinite() || ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
    throw NumericalError("ekf_update: innovation covariance is not positive definite");
  }
  // K = P C^T S^-1, solved as S K^T = C P
  const Mat<N, P> K = ldlt.solve(ss.C * P_pred).transpose();

  ObserverState<N> next;
  next.x_hat = x_pred + K * innovation;
  const Mat<N, N> I_KC = Mat<N, N>::Identity() - K * ss.C;
  next.P = covariance_symmetrize<N>(I_KC * P_pred * I_KC.transpose() +
                                    K * noise.V * K.transpose());
  next.k = state.k + 1;
  return next;
}

}  // namespace sideslip

#endif  // SIDESLIP_EKF_HPP
