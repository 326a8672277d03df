#ifndef SIDESLIP_METRICS_HPP
#define SIDESLIP_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sideslip/log.hpp"
#include "sideslip/pipeline.hpp"

namespace sideslip {

inline double rms(std::span<const double> est, std::span<const double> truth) {
  if (est.size() != truth.size()) throw DomainError("rms: length mismatch");
  if (est.empty()) throw DomainError("rms: empty series");
  double acc = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double e = est[i] - truth[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(est.size()));
}

struct SegmentMetrics {
  std::string name;
  std::size_t frames = 0;
  double rms_beta = 0.0;
  double max_abs_beta_err = 0.0;
};

struct Metrics {
  std::string variant;
  std::size_t frames = 0;
  std::optional<double> rms_beta;
  std::optional<double> max_abs_beta_err;
  std::optional<double> rms_phi;
  std::optional<double> rms_d;
  std::optional<double> transition_jump;  // hybrid only
  double max_step_change = 0.0;           // max |beta_hat[i] - beta_hat[i-1]|
  std::size_t gate_open_frames = 0;
  std::size_t adapted_frames = 0;
  std::size_t clamped_frames = 0;
  std::size_t speed_hold_frames = 0;
  std::vector<SegmentMetrics> segments;
};

/// Largest |delta beta_hat| over frames where the yaw gate changed state.
inline double transition_jump(std::span<const EstimateFrame> frames) {
  double jump = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].yaw_gate != frames[i - 1].yaw_gate) {
      jump = std::max(jump, std::abs(frames[i].beta_hat - frames[i - 1].beta_hat));
    }
  }
  return jump;
}

inline double max_step_change(std::span<const EstimateFrame> frames) {
  double m = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    m = std::max(m, std::abs(frames[i].beta_hat - frames[i - 1].beta_hat));
  }
  return m;
}

/// Metrics of one run. Error metrics need `truth`; segments split the run by
/// yaw-gate state.
inline Metrics compute_metrics(Variant variant, std::span<const EstimateFrame> frames,
                               const std::optional<std::vector<LogTruth>>& truth) {
  Metrics m;
  m.variant = std::string(to_string(variant));
  m.frames = frames.size();
  m.max_step_change = max_step_change(frames);
  if (variant == Variant::HybridSwitch) m.transition_jump = transition_jump(frames);
  for (const EstimateFrame& f : frames) {
    m.gate_open_frames += f.yaw_gate ? 1 : 0;
    m.adapted_frames += f.adapted ? 1 : 0;
    m.clamped_frames += f.clamped ? 1 : 0;
    m.speed_hold_frames += f.speed_hold ? 1 : 0;
  }
  if (!truth) return m;
  if (truth->size() != frames.size()) throw DomainError("compute_metrics: truth length mismatch");

  std::vector<double> be, bt, pe, de, dt;
  std::vector<double> open_e, open_t, closed_e, closed_t;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const EstimateFrame& f = frames[i];
    const LogTruth& g = (*truth)[i];
    be.push_back(f.beta_hat);
    bt.push_back(g.beta);
    pe.push_back(f.sin_phi_hat);
    de.push_back(f.d_hat);
    dt.push_back(g.d);
    (f.yaw_gate ? open_e : closed_e).push_back(f.beta_hat);
    (f.yaw_gate ? open_t : closed_t).push_back(g.beta);
  }
  auto max_abs = [](std::span<const double> a, std::span<const double> b) {
    double r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
    return r;
  };
  m.rms_beta = rms(be, bt);
  m.max_abs_beta_err = max_abs(be, bt);
  // bank error in angle
  std::vector<double> phi_e(pe.size()), phi_t(pe.size());
  for (std::size_t i = 0; i < pe.size(); ++i) {
    phi_e[i] = bank_angle_from_sin(pe[i]);
    phi_t[i] = (*truth)[i].phi;
  }
  m.rms_phi = rms(phi_e, phi_t);
  m.rms_d = rms(de, dt);
  auto segment = [&](const char* name, const std::vector<double>& e, const std::vector<double>& t) {
    SegmentMetrics s;
    s.name = name;
    s.frames = e.size();
    if (!e.empty()) {
      s.rms_beta = rms(e, t);
      s.max_abs_beta_err = max_abs(e, t);
    }
    m.segments.push_back(s);
  };
  segment("gate_open", open_e, open_t);
  segment("gate_closed", closed_e, closed_t);
  return m;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["variant"] = m.variant;
  j["frames"] = m.frames;
  auto opt = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  opt("rms_beta", m.rms_beta);
  opt("max_abs_beta_err", m.max_abs_beta_err);
  opt("rms_phi", m.rms_phi);
  opt("rms_d", m.rms_d);
  opt("transition_jump", m.transition_jump);
  j["max_step_change"] = m.max_step_change;
  j["gate_open_frames"] = m.gate_open_frames;
  j["adapted_frames"] = m.adapted_frames;
  j["clamped_frames"] = m.clamped_frames;
  j["speed_hold_frames"] = m.speed_hold_frames;
  j["segments"] = nlohmann::json::array();
  for (const SegmentMetrics& s : m.segments) {
    j["segments"].push_back({{"name", s.name},
                             {"frames", s.frames},
                             {"rms_beta", s.rms_beta},
                             {"max_abs_beta_err", s.max_abs_beta_err}});
  }
  return j;
}

/// Fixed-width table, one row per run.
inline std::string metrics_table(std::span<const Metrics> rows) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return std::string(buf);
  };
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %8s %12s %12s %12s %12s %12s %12s\n", "variant", "frames",
                "rms_beta", "max_beta_err", "rms_phi", "rms_d", "max_step", "trans_jump");
  out += line;
  for (const Metrics& m : rows) {
    std::snprintf(line, sizeof line, "%-14s %8zu %12s %12s %12s %12s %12s %12s\n",
                  m.variant.c_str(), m.frames, cell(m.rms_beta).c_str(),
                  cell(m.max_abs_beta_err).c_str(), cell(m.rms_phi).c_str(),
                  cell(m.rms_d).c_str(), cell(m.max_step_change).c_str(),
                  cell(m.transition_jump).c_str());
    out += line;
  }
  return out;
}

}  // namespace sideslip

#endif  // SIDESLIP_METRICS_HPP
