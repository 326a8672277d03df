#ifndef SIDESLIP_DIAGNOSTICS_HPP
#define SIDESLIP_DIAGNOSTICS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "sideslip/adaptation.hpp"
#include "sideslip/types.hpp"

// Runtime diagnostics for the stiffness adaptation law.
//
// Each adaptation step k is split into two rank-one substeps n = 2k-1, 2k, one
// per singular direction of Phi_k. Substep n uses
//   alpha_n = lambda (n odd) or 1 (n even)
//   beta_n  = mu_{1,k} (n odd) or mu_{2,k} (n even)
//   phi_n   = sigma_j u_j
// and the scalar measurement y_n = v_j^T Y_tilde_k, where v_j is the matching
// right singular vector. With f_0 = I / delta the substep chain reproduces the
// one-shot recursive update exactly.

namespace sideslip {

struct SvdSplit {
  double sigma1 = 0.0;  // sigma1 >= sigma2 > 0
  double sigma2 = 0.0;
  Vec2 u1 = Vec2::Zero();
  Vec2 u2 = Vec2::Zero();
  Vec2 v1 = Vec2::Zero();
  Vec2 v2 = Vec2::Zero();
  Vec2 phi1 = Vec2::Zero();
  Vec2 phi2 = Vec2::Zero();
  double mu1 = 1.0;
  double mu2 = 1.0;
};

inline SvdSplit svd_split(const Mat2& Phi, double lambda, double delta) {
  Eigen::JacobiSVD<Mat2> svd(Phi, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec2 sv = svd.singularValues();  // descending
  if (!(sv(1) > 0.0) || sv(1) <= 1e-12 * sv(0) || !sv.allFinite()) {
    throw NumericalError("svd_split: regression matrix is rank deficient");
  }
  SvdSplit s;
  s.sigma1 = sv(0);
  s.sigma2 = sv(1);
  s.u1 = svd.matrixU().col(0);
  s.u2 = svd.matrixU().col(1);
  s.v1 = svd.matrixV().col(0);
  s.v2 = svd.matrixV().col(1);
  s.phi1 = s.sigma1 * s.u1;
  s.phi2 = s.sigma2 * s.u2;
  const double reg = delta * (1.0 - lambda);
  s.mu1 = (s.sigma1 * s.sigma1 + reg) / (s.sigma1 * s.sigma1);
  s.mu2 = (s.sigma2 * s.sigma2 + reg) / (s.sigma2 * s.sigma2);
  return s;
}

/// Rank-one gain update f_n = (alpha f_{n-1}^-1 + beta phi phi^T)^-1 in
/// matrix-inversion-lemma form.
inline Mat2 rank_one_gain_update(const Mat2& f_prev, const Vec2& phi, double alpha, double beta) {
  const Vec2 fphi = f_prev * phi;
  const double denom = alpha / beta + phi.dot(fphi);
  return (f_prev - fphi * fphi.transpose() / denom) / alpha;
}

struct GainSplit {
  Mat2 f_mid;  // after the first singular direction
  Mat2 f_new;  // after both
};

inline GainSplit gain_split_update(const Mat2& f_prev, const SvdSplit& split, double lambda) {
  const Mat2 sym = 0.5 * (f_prev + f_prev.transpose());
  Eigen::LLT<Mat2> llt(sym);
  if (llt.info() != Eigen::Success || (f_prev - sym).norm() > 1e-9 * (1.0 + f_prev.norm())) {
    throw DomainError("gain_split_update: f_prev must be symmetric positive definite");
  }
  GainSplit g;
  g.f_mid = rank_one_gain_update(f_prev, split.phi1, lambda, split.mu1);
  g.f_new = rank_one_gain_update(g.f_mid, split.phi2, 1.0, split.mu2);
  return g;
}

struct Condition {
  double value = 0.0;
  bool ok = false;
};

/// eta_n = (2 - alpha_{n+1}) / beta_n - 1 / beta_{n-1}; dissipation requires eta_n >= 0.
inline Condition eta_condition(double beta_now, double beta_prev, double alpha_next) {
  Condition c;
  c.value = (2.0 - alpha_next) / beta_now - 1.0 / beta_prev;
  c.ok = c.value >= 0.0;
  return c;
}

/// sigma1^2 sigma2^2 + delta (2 - lambda) sigma2^2 - delta sigma1^2 >= 0.
inline Condition dissipation_condition(double sigma1, double sigma2, double lambda, double delta) {
  const double s1 = sigma1 * sigma1;
  const double s2 = sigma2 * sigma2;
  Condition c;
  c.value = s1 * s2 + delta * (2.0 - lambda) * s2 - delta * s1;
  c.ok = c.value >= 0.0;
  return c;
}

/// Starting value for the regularization weight, 1 / (1/sigma2^2 - 1/sigma1^2).
inline double delta_heuristic(double sigma1, double sigma2) {
  if (!(sigma2 > 0.0) || !(sigma1 > sigma2)) {
    throw DomainError("delta_heuristic: requires sigma1 > sigma2 > 0");
  }
  return 1.0 / (1.0 / (sigma2 * sigma2) - 1.0 / (sigma1 * sigma1));
}

inline double condition_number_spd(const Mat2& m) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (m + m.transpose()));
  const Vec2 ev = es.eigenvalues();
  if (!(ev(0) > 0.0)) return std::numeric_limits<double>::infinity();
  return ev(1) / ev(0);
}

struct SubstepRecord {
  std::size_t frame = 0;  // pipeline frame index of the parent step
  std::int64_t n = 0;     // 1-based substep index
  double alpha = 1.0;
  double beta = 1.0;
  double beta_prev = 1.0;
  Vec2 phi = Vec2::Zero();
  double y_tilde = 0.0;
  Mat2 f_prev = Mat2::Zero();
  Mat2 f = Mat2::Zero();
  Vec2 theta_star_prev = Vec2::Zero();  // deviation estimates around the substep
  Vec2 theta_star = Vec2::Zero();
  double eps = 0.0;   // scaled a-posteriori error
  double eps0 = 0.0;  // scaled a-priori error
  double eta = 0.0;
  double kappa_f_prev_inv = 1.0;
  std::optional<Vec2> theta_tilde_true;  // simulation only
  std::optional<double> popov_running;   // filled when the truth is known

  double alpha_next(double lambda) const { return n % 2 == 0 ? lambda : 1.0; }
};

struct StepRecord {
  std::size_t frame = 0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  Condition dissipation;
  double mu1 = 1.0;
  double mu2 = 1.0;
};

struct DiagnosticsTrace {
  double lambda = 0.975;
  double delta = 0.02;
  std::vector<SubstepRecord> substeps;
  std::vector<StepRecord> steps;
  std::size_t skipped_rank_deficient = 0;
};

struct SubstepResult {
  Vec2 theta_star;
  Mat2 f;
  double eps = 0.0;
  double eps0 = 0.0;
};

/// Single-direction update of the deviation estimate and gain.
inline SubstepResult substep_update(const Vec2& theta_prev, const Mat2& f_prev, const Vec2& phi,
                                    double alpha, double beta, double y_tilde) {
  SubstepResult r;
  r.f = rank_one_gain_update(f_prev, phi, alpha, beta);
  r.eps0 = y_tilde - beta * phi.dot(theta_prev);
  r.theta_star = theta_prev + r.f * phi * r.eps0;
  r.eps = y_tilde - beta * phi.dot(r.theta_star);
  return r;
}

/// Sum over substeps 1..up_to of w_n s_n with
///   w_n = dtheta_n^T phi_n,  s_n = eps_n + (alpha_{n+1} / 2) w_n,
///   dtheta_n = beta_n theta_star_n - theta_tilde_n.
/// Requires the true deviation on every summed substep.
inline double popov_sum(const DiagnosticsTrace& trace, std::size_t up_to) {
  if (up_to > trace.substeps.size()) {
    throw DomainError("popov_sum: substep index beyond trace length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < up_to; ++i) {
    const SubstepRecord& s = trace.substeps[i];
    if (!s.theta_tilde_true) {
      throw DomainError("popov_sum: true parameter trace missing at substep " + std::to_string(s.n));
    }
    const Vec2 dtheta = s.beta * s.theta_star - *s.theta_tilde_true;
    const double w = dtheta.dot(s.phi);
    sum += w * (s.eps + 0.5 * s.alpha_next(trace.lambda) * w);
  }
  return sum;
}

/// Lower bound of the Popov sum implied by its telescoped form,
/// -(alpha_1 / 2 beta_0) dtheta_0^T f_0^-1 dtheta_0 with f_0^-1 = delta I,
/// beta_0 = 1 and theta_star_0 = 0.
inline double popov_lower_bound(const DiagnosticsTrace& trace) {
  if (trace.substeps.empty() || !trace.substeps.front().theta_tilde_true) return 0.0;
  const Vec2 dtheta0 = -*trace.substeps.front().theta_tilde_true;
  return 0.0 - 0.5 * trace.delta * dtheta0.squaredNorm();
}

/// Radius (2 kappa(f_{n-1}^-1) / eta_n) |theta_n / beta_n - theta_{n-1} / beta_{n-1}|
/// of the region where the adaptation error energy dissipates. `n` is 1-based;
/// theta_0 = 0, beta_0 = 1.
inline double theta_error_bound(const DiagnosticsTrace& trace, std::size_t n) {
  if (n == 0 || n > trace.substeps.size()) {
    throw DomainError("theta_error_bound: substep index out of range");
  }
  const SubstepRecord& s = trace.substeps[n - 1];
  if (!(s.eta > 0.0)) {
    throw DomainError("theta_error_bound: undefined for eta_n <= 0");
  }
  if (!s.theta_tilde_true) {
    throw DomainError("theta_error_bound: true parameter trace missing");
  }
  Vec2 prev_scaled = Vec2::Zero();
  if (n > 1) {
    const SubstepRecord& p = trace.substeps[n - 2];
    if (!p.theta_tilde_true) throw DomainError("theta_error_bound: true parameter trace missing");
    prev_scaled = *p.theta_tilde_true / p.beta;
  }
  const Vec2 rate = *s.theta_tilde_true / s.beta - prev_scaled;
  return 2.0 * s.kappa_f_prev_inv / s.eta * rate.norm();
}

/// Shadows the adaptation law with the substep decomposition and records the
/// analysis quantities for every accepted regression sample.
class DiagnosticsRecorder {
 public:
  DiagnosticsRecorder() = default;
  explicit DiagnosticsRecorder(const AdaptationConfig& cfg) { reset(cfg); }

  void reset(const AdaptationConfig& cfg) {
    trace_ = DiagnosticsTrace{};
    trace_.lambda = cfg.lambda;
    trace_.delta = cfg.delta;
    f_ = Mat2::Identity() / cfg.delta;
    theta_ = Vec2::Zero();
    beta_prev_ = 1.0;
    n_ = 0;
    popov_ = 0.0;
  }

  /// Record one accepted adaptation step. Rank-deficient samples are counted
  /// and skipped; the substep chain then no longer mirrors the estimator.
  void record(std::size_t frame, const RegressionSample& sample,
              const std::optional<Vec2>& theta_tilde_true = std::nullopt) {
    SvdSplit split;
    try {
      split = svd_split(sample.Phi, trace_.lambda, trace_.delta);
    } catch (const NumericalError&) {
      ++trace_.skipped_rank_deficient;
      return;
    }
    StepRecord step;
    step.frame = frame;
    step.sigma1 = split.sigma1;
    step.sigma2 = split.sigma2;
    step.mu1 = split.mu1;
    step.mu2 = split.mu2;
    step.dissipation = dissipation_condition(split.sigma1, split.sigma2, trace_.lambda, trace_.delta);
    trace_.steps.push_back(step);

    const double y1 = split.v1.dot(sample.Y_tilde);
    const double y2 = split.v2.dot(sample.Y_tilde);
    push_substep(frame, split.phi1, trace_.lambda, split.mu1, y1, theta_tilde_true);
    push_substep(frame, split.phi2, 1.0, split.mu2, y2, theta_tilde_true);
  }

  const DiagnosticsTrace& trace() const { return trace_; }
  const Vec2& theta_tilde_star() const { return theta_; }
  const Mat2& gain() const { return f_; }

 private:
  void push_substep(std::size_t frame, const Vec2& phi, double alpha, double beta, double y,
                    const std::optional<Vec2>& truth) {
    SubstepRecord rec;
    rec.frame = frame;
    rec.n = ++n_;
    rec.alpha = alpha;
    rec.beta = beta;
    rec.beta_prev = beta_prev_;
    rec.phi = phi;
    rec.y_tilde = y;
    rec.f_prev = f_;
    rec.theta_star_prev = theta_;
    rec.kappa_f_prev_inv = condition_number_spd(f_);  // kappa(f^-1) == kappa(f)

    const SubstepResult r = substep_update(theta_, f_, phi, alpha, beta, y);
    rec.f = r.f;
    rec.theta_star = r.theta_star;
    rec.eps = r.eps;
    rec.eps0 = r.eps0;
    rec.eta = eta_condition(beta, beta_prev_, rec.alpha_next(trace_.lambda)).value;
    if (truth) {
      rec.theta_tilde_true = truth;
      const Vec2 dtheta = beta * r.theta_star - *truth;
      const double w = dtheta.dot(phi);
      popov_ += w * (r.eps + 0.5 * rec.alpha_next(trace_.lambda) * w);
      rec.popov_running = popov_;
    }
    trace_.substeps.push_back(rec);

    f_ = r.f;
    theta_ = r.theta_star;
    beta_prev_ = beta;
  }

  DiagnosticsTrace trace_;
  Mat2 f_ = Mat2::Identity();
  Vec2 theta_ = Vec2::Zero();
  double beta_prev_ = 1.0;
  std::int64_t n_ = 0;
  double popov_ = 0.0;
};

}  // namespace sideslip

#endif  // SIDESLIP_DIAGNOSTICS_HPP
