#ifndef SIDESLIP_HARNESS_HPP
#define SIDESLIP_HARNESS_HPP

#include <future>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sideslip/config.hpp"
#include "sideslip/log.hpp"
#include "sideslip/metrics.hpp"
#include "sideslip/pipeline.hpp"
#include "sideslip/simulator.hpp"

namespace sideslip {

inline SensorLog to_log(const sim::ScenarioData& data) {
  SensorLog log;
  log.samples = data.sensors;
  log.truth.emplace();
  log.truth->reserve(data.truth.size());
  for (const sim::GroundTruth& g : data.truth) log.truth->push_back({g.beta, g.v_y, g.phi, g.d});
  return log;
}

/// Effective plant stiffness per frame, for the diagnostics recorder.
inline std::vector<Vec2> stiffness_truth(const sim::ScenarioData& data) {
  std::vector<Vec2> out;
  out.reserve(data.truth.size());
  for (const sim::GroundTruth& g : data.truth) out.emplace_back(g.C_f_eff, g.C_r_eff);
  return out;
}

struct RunResult {
  Variant variant = Variant::Algorithm1;
  std::vector<EstimateFrame> frames;
  std::optional<DiagnosticsTrace> diagnostics;
  Metrics metrics;
};

/// Run one variant over a log. A config whose dt disagrees with the log's
/// cadence by more than 10% is rejected through the log check.
inline RunResult run(const PipelineConfig& cfg, const SensorLog& log,
                     std::span<const Vec2> theta_true = {}) {
  for (std::size_t i = 1; i < log.samples.size(); ++i) {
    const double step = log.samples[i].t - log.samples[i - 1].t;
    if (!(step > 0.0)) throw RunAborted(i, "non-monotone timestamp");
    if (std::abs(step - cfg.dt) > 0.1 * cfg.dt) {
      throw RunAborted(i, "sample interval deviates more than 10% from dt");
    }
  }
  PipelineRun pr = run_pipeline(cfg, log.samples, theta_true);
  RunResult out;
  out.variant = cfg.variant;
  out.frames = std::move(pr.frames);
  out.diagnostics = std::move(pr.diagnostics);
  out.metrics = compute_metrics(cfg.variant, out.frames, log.truth);
  return out;
}

/// Independent runs of several variants over one immutable log, evaluated
/// concurrently. Results keep the order of `variants`.
inline std::vector<RunResult> compare(const PipelineConfig& base, const SensorLog& log,
                                      std::span<const Variant> variants,
                                      std::span<const Vec2> theta_true = {}) {
  std::vector<std::future<RunResult>> jobs;
  jobs.reserve(variants.size());
  for (Variant v : variants) {
    PipelineConfig cfg = base;
    cfg.variant = v;
    jobs.push_back(std::async(std::launch::async,
                              [cfg, &log, theta_true] { return run(cfg, log, theta_true); }));
  }
  std::vector<RunResult> out;
  out.reserve(jobs.size());
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

/// Per-frame trace: estimates, gate/clamp flags, truth when known and, with
/// diagnostics, the substep quantities of the frames that adapted.
inline void write_trace(std::ostream& os, const RunResult& run,
                        const std::optional<std::vector<LogTruth>>& truth) {
  if (truth && truth->size() != run.frames.size()) {
    throw DomainError("write_trace: truth length differs from frame count");
  }
  std::string line =
      "t,beta_hat,vy_hat_d,vy_hat_k,sin_phi_hat,d_hat,Cf_hat,Cr_hat,"
      "yaw_gate,cond_gate,adapted,clamped,speed_hold,kin_active";
  if (truth) line += ",beta_true,vy_true,phi_true,d_true";
  std::map<std::size_t, const StepRecord*> steps;
  std::map<std::size_t, std::vector<const SubstepRecord*>> subs;
  if (run.diagnostics) {
    line += ",sigma1,sigma2,dissipation,mu1,mu2,eta1,eta2,eps1,eps2,eps0_1,eps0_2,popov";
    for (const StepRecord& s : run.diagnostics->steps) steps[s.frame] = &s;
    for (const SubstepRecord& s : run.diagnostics->substeps) subs[s.frame].push_back(&s);
  }
  os << line << '\n';
  auto num = [](double v) { return format_double(v); };
  for (std::size_t i = 0; i < run.frames.size(); ++i) {
    const EstimateFrame& f = run.frames[i];
    line = num(f.t);
    for (double v : {f.beta_hat, f.v_y_hat_d, f.v_y_hat_k, f.sin_phi_hat, f.d_hat, f.C_f_hat,
                     f.C_r_hat}) {
      line += ',' + num(v);
    }
    for (bool b : {f.yaw_gate, f.cond_gate, f.adapted, f.clamped, f.speed_hold, f.kin_active}) {
      line += b ? ",1" : ",0";
    }
    if (truth) {
      const LogTruth& g = (*truth)[i];
      for (double v : {g.beta, g.v_y, g.phi, g.d}) line += ',' + num(v);
    }
    if (run.diagnostics) {
      const auto st = steps.find(i);
      const auto sb = subs.find(i);
      if (st != steps.end() && sb != subs.end() && sb->second.size() == 2) {
        const StepRecord& s = *st->second;
        const SubstepRecord& a = *sb->second[0];
        const SubstepRecord& b = *sb->second[1];
        for (double v : {s.sigma1, s.sigma2, s.dissipation.value, s.mu1, s.mu2, a.eta, b.eta, a.eps,
                         b.eps, a.eps0, b.eps0}) {
          line += ',' + num(v);
        }
        line += b.popov_running ? ',' + num(*b.popov_running) : std::string(",");
      } else {
        line += ",,,,,,,,,,,,";
      }
    }
    os << line << '\n';
  }
}

}  // namespace sideslip

#endif  // SIDESLIP_HARNESS_HPP
