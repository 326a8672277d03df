#ifndef SIDESLIP_TYPES_HPP
#define SIDESLIP_TYPES_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sideslip {

template <int Rows, int Cols>
using Mat = Eigen::Matrix<double, Rows, Cols>;
template <int Rows>
using Vec = Eigen::Matrix<double, Rows, 1>;

using Mat2 = Mat<2, 2>;
using Vec2 = Vec<2>;

/// Thrown when an operation is called outside its domain (v_x <= 0, dt <= 0, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a filter or solver hits a numerically degenerate configuration.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physical constants of the single-track model. Defaults are the test vehicle
/// used for the published evaluation.
struct VehicleParams {
  double m = 2300.132;     // kg
  double I_z = 4400.0;     // kg m^2
  double L_f = 1.505;      // m
  double L_r = 1.504;      // m
  double C_f_nom = 160776.0;  // N/rad
  double C_r_nom = 254100.0;  // N/rad
  double g = 9.80665;      // m/s^2

  double wheelbase() const { return L_f + L_r; }

  Vec2 nominal_stiffness() const { return Vec2(C_f_nom, C_r_nom); }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw DomainError(std::string("VehicleParams.") + name + " must be finite and > 0");
      }
    };
    positive(m, "m");
    positive(I_z, "I_z");
    positive(L_f, "L_f");
    positive(L_r, "L_r");
    positive(C_f_nom, "C_f_nom");
    positive(C_r_nom, "C_r_nom");
    positive(g, "g");
  }
};

/// One 100 Hz frame of the production sensor set.
struct SensorSample {
  double t = 0.0;        // s
  double a_x = 0.0;      // m/s^2
  double a_y_sen = 0.0;  // m/s^2, includes g*sin(phi) and accelerometer bias
  double r = 0.0;        // rad/s
  double v_x = 0.0;      // m/s
  double delta_f = 0.0;  // rad

  bool operator==(const SensorSample&) const = default;
};

/// Linear state-space model x' = A x + B u, y = C x + D u. The dimensions are
/// part of the type so mismatched wiring fails to compile.
template <int N, int M, int P>
struct StateSpace {
  static constexpr int kStates = N;
  static constexpr int kInputs = M;
  static constexpr int kOutputs = P;

  Mat<N, N> A = Mat<N, N>::Zero();
  Mat<N, M> B = Mat<N, M>::Zero();
  Mat<P, N> C = Mat<P, N>::Zero();
  Mat<P, M> D = Mat<P, M>::Zero();
};

/// State [v_y, r, sin(phi), d], input delta_f, output [a_y_sen, r].
using DynamicsModel = StateSpace<4, 1, 2>;
/// State [v_y, r], input delta_f, output [a_y, r].
using PlainDynamicsModel = StateSpace<2, 1, 2>;
/// State [v_x, v_y, sin(phi)], input [a_x, a_y_sen], output v_x.
using BankKinematicsModel = StateSpace<3, 2, 1>;
/// State [v_x, v_y], input [a_x, corrected a_y], output v_x.
using PlainKinematicsModel = StateSpace<2, 2, 1>;

inline void require_finite(const SensorSample& s, std::size_t frame) {
  if (!std::isfinite(s.t) || !std::isfinite(s.a_x) || !std::isfinite(s.a_y_sen) ||
      !std::isfinite(s.r) || !std::isfinite(s.v_x) || !std::isfinite(s.delta_f)) {
    throw DomainError("non-finite sensor value at frame " + std::to_string(frame));
  }
}

}  // namespace sideslip

#endif  // SIDESLIP_TYPES_HPP
