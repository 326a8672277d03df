#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <vector>

#include "sideslip/harness.hpp"

using namespace sideslip;

namespace {

const VehicleParams kCar{};

sim::ScenarioData small_run(std::uint64_t seed = 5) {
  sim::ScenarioSpec spec = sim::default_scenario(sim::ScenarioName::SevereSingleLaneChange);
  spec.duration = 6.0;
  spec.seed = seed;
  return sim::generate_scenario(spec, kCar);
}

std::string header_without(std::string_view drop) {
  std::string h;
  for (auto c : kSensorColumns) {
    if (c == drop) continue;
    if (!h.empty()) h += ',';
    h += c;
  }
  return h;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(Rms, Examples) {
  const std::vector<double> a{1.0, -2.0, 3.5};
  EXPECT_EQ(rms(a, a), 0.0);
  const std::vector<double> shifted{1.25, -1.75, 3.75};
  EXPECT_NEAR(rms(shifted, a), 0.25, 1e-15);
  EXPECT_NEAR(rms(std::vector<double>{0, 0}, std::vector<double>{3, 4}), 3.5355339059327378, 1e-12);
  EXPECT_THROW(rms(std::vector<double>{1}, std::vector<double>{1, 2}), DomainError);
  EXPECT_THROW(rms(std::vector<double>{}, std::vector<double>{}), DomainError);
}

TEST(Metrics, PerfectTraceScoresZero) {
  std::vector<EstimateFrame> frames(10);
  std::vector<LogTruth> truth(10);
  for (int i = 0; i < 10; ++i) {
    frames[i].beta_hat = truth[i].beta = 0.01 * i;
    frames[i].sin_phi_hat = std::sin(truth[i].phi = 0.02 * i);
    frames[i].d_hat = truth[i].d = 0.3;
  }
  const Metrics m = compute_metrics(Variant::Algorithm2, frames, truth);
  EXPECT_EQ(*m.rms_beta, 0.0);
  EXPECT_NEAR(*m.rms_phi, 0.0, 1e-15);
  EXPECT_EQ(*m.rms_d, 0.0);
  EXPECT_FALSE(m.transition_jump);
  EXPECT_EQ(m.segments.size(), 2u);
  const Metrics none = compute_metrics(Variant::Algorithm2, frames, std::nullopt);
  EXPECT_FALSE(none.rms_beta);
}

TEST(Metrics, TransitionJumpOnGateChange) {
  std::vector<EstimateFrame> f(4);
  f[1].beta_hat = 0.001;
  f[2].yaw_gate = true;
  f[2].beta_hat = 0.05;
  f[3].yaw_gate = true;
  f[3].beta_hat = 0.2;
  EXPECT_NEAR(transition_jump(f), 0.049, 1e-15);
  EXPECT_NEAR(max_step_change(f), 0.15, 1e-15);
  EXPECT_TRUE(compute_metrics(Variant::HybridSwitch, f, std::nullopt).transition_jump);
}

TEST(Log, FormatIsExact) {
  for (double v : {0.1, -1e-300, 12345.678901234567, std::numeric_limits<double>::denorm_min(),
                   1.0 / 3.0}) {
    EXPECT_EQ(*parse_double(format_double(v)), v);
  }
  EXPECT_FALSE(parse_double("1.0x"));
  EXPECT_FALSE(parse_double(""));
  EXPECT_EQ(*parse_double(" 2.5 "), 2.5);
}

TEST(Log, StreamRoundTripIsExact) {
  const SensorLog log = to_log(small_run());
  std::stringstream ss;
  write_log(ss, log);
  const SensorLog back = read_log(ss, 0.01);
  EXPECT_EQ(back.samples, log.samples);
  ASSERT_TRUE(back.truth);
  EXPECT_EQ(*back.truth, *log.truth);
}

TEST(Log, ColumnsFoundByName) {
  std::stringstream ss("vx,delta_f,t,extra,r,ay_sen,ax\n20,0.01,0,9,0.1,2,0.5\n20,0.01,0.01,9,0.1,2,0.5\n");
  const SensorLog log = read_log(ss);
  ASSERT_EQ(log.samples.size(), 2u);
  EXPECT_EQ(log.samples[1].t, 0.01);
  EXPECT_EQ(log.samples[0].v_x, 20.0);
  EXPECT_EQ(log.samples[0].a_x, 0.5);
  EXPECT_FALSE(log.truth);
}

TEST(Log, SchemaErrorsNameTheColumn) {
  for (auto col : kSensorColumns) {
    std::stringstream ss(header_without(col) + "\n");
    try {
      read_log(ss);
      FAIL() << "no error for missing " << col;
    } catch (const LogError& e) {
      EXPECT_NE(std::string(e.what()).find("'" + std::string(col) + "'"), std::string::npos)
          << e.what();
    }
  }
  std::stringstream partial(header_without("") + ",beta_true\n");
  EXPECT_THROW(read_log(partial), LogError);
}

TEST(Log, RejectsBadRows) {
  const std::string h = header_without("") + "\n";
  auto fails_at = [&](const std::string& body, std::size_t frame, std::optional<double> dt = {}) {
    std::stringstream ss(h + body);
    try {
      read_log(ss, dt);
    } catch (const LogError& e) {
      return e.frame() == frame;
    }
    return false;
  };
  EXPECT_TRUE(fails_at("0,0,0,0,20,0\n0.01,0,abc,0,20,0\n", 1));
  EXPECT_TRUE(fails_at("0,0,0,0,20,0\n0.01,0,nan,0,20,0\n", 1));
  EXPECT_TRUE(fails_at("0,0,0,0,20,0\n0.01,0,0,0,20\n", 1));
  EXPECT_TRUE(fails_at("0.01,0,0,0,20,0\n0.01,0,0,0,20,0\n", 1));
  EXPECT_TRUE(fails_at("0,0,0,0,20,0\n0.0112,0,0,0,20,0\n", 1, 0.01));
  EXPECT_FALSE(fails_at("0,0,0,0,20,0\n0.0105,0,0,0,20,0\n", 1, 0.01));
  std::stringstream empty("");
  EXPECT_THROW(read_log(empty), LogError);
  std::stringstream header_only(h);
  EXPECT_THROW(read_log(header_only), LogError);
}

TEST(Harness, FileRoundTripEqualsInMemory) {
  const SensorLog log = to_log(small_run(9));
  const auto path = temp_file("sideslip_roundtrip.csv");
  write_log_file(path.string(), log);
  const SensorLog back = read_log_file(path.string(), 0.01);
  std::filesystem::remove(path);
  PipelineConfig cfg;
  cfg.variant = Variant::Algorithm2;
  const RunResult a = run(cfg, log);
  const RunResult b = run(cfg, back);
  EXPECT_EQ(a.frames, b.frames);
  std::stringstream ta, tb;
  write_trace(ta, a, log.truth);
  write_trace(tb, b, back.truth);
  EXPECT_EQ(ta.str(), tb.str());
}

TEST(Harness, RejectsMismatchedDt) {
  const SensorLog log = to_log(small_run());
  PipelineConfig cfg;
  cfg.dt = 0.02;
  EXPECT_THROW(run(cfg, log), RunAborted);
}

TEST(Harness, CompareKeepsVariantOrder) {
  const SensorLog log = to_log(small_run());
  const std::vector<Variant> vs{Variant::HybridSwitch, Variant::Algorithm2, Variant::DynamicsOnly};
  const std::vector<RunResult> rs = compare(PipelineConfig{}, log, vs);
  ASSERT_EQ(rs.size(), 3u);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    EXPECT_EQ(rs[i].variant, vs[i]);
    EXPECT_EQ(rs[i].metrics.variant, to_string(vs[i]));
    EXPECT_TRUE(rs[i].metrics.rms_beta);
    PipelineConfig cfg;
    cfg.variant = vs[i];
    EXPECT_EQ(rs[i].frames, run(cfg, log).frames);
  }
  const std::vector<Variant> rev{Variant::DynamicsOnly, Variant::Algorithm2, Variant::HybridSwitch};
  const std::vector<RunResult> rr = compare(PipelineConfig{}, log, rev);
  EXPECT_EQ(rr[0].frames, rs[2].frames);
  EXPECT_EQ(rr[2].frames, rs[0].frames);
}

TEST(Harness, TraceColumns) {
  const sim::ScenarioData data = small_run();
  const SensorLog log = to_log(data);
  PipelineConfig cfg;
  cfg.diagnostics = true;
  const RunResult r = run(cfg, log, stiffness_truth(data));
  std::stringstream ss;
  write_trace(ss, r, log.truth);
  std::string header, row;
  std::getline(ss, header);
  EXPECT_EQ(split_csv_line(header).size(), 14u + 4u + 12u);
  std::size_t rows = 0;
  while (std::getline(ss, row)) {
    ASSERT_EQ(split_csv_line(row).size(), 30u);
    ++rows;
  }
  EXPECT_EQ(rows, log.samples.size());
}

TEST(Config, DefaultsMatchPublishedTables) {
  const RunConfig rc;
  const PipelineConfig& c = rc.pipeline;
  EXPECT_EQ(c.params.m, 2300.132);
  EXPECT_EQ(c.params.I_z, 4400.0);
  EXPECT_EQ(c.params.L_f, 1.505);
  EXPECT_EQ(c.params.L_r, 1.504);
  EXPECT_EQ(c.params.C_f_nom, 160776.0);
  EXPECT_EQ(c.params.C_r_nom, 254100.0);
  EXPECT_EQ(c.dt, 0.01);
  EXPECT_EQ(c.adaptation.lambda, 0.975);
  EXPECT_EQ(c.adaptation.delta, 0.02);
  EXPECT_EQ(c.adaptation.r_t, 0.1);
  EXPECT_EQ(c.adaptation.c_t, 20.0);
  EXPECT_EQ(c.dyn_noise.W.diagonal(), Vec<4>(6.0, 0.5, 0.1, 0.0002));
  EXPECT_EQ(c.dyn_noise.V.diagonal(), Vec2(0.1, 0.01));
  EXPECT_EQ(c.bank_kin_noise.W.diagonal(), Vec<3>(0.2, 0.6, 0.05));
  EXPECT_EQ(c.bank_kin_noise.V(0, 0), 0.05);
  EXPECT_EQ(c.corrected_kin_noise.W.diagonal(), Vec2(0.2, 0.6));
  EXPECT_EQ(c.corrected_kin_noise.V(0, 0), 0.05);
  EXPECT_EQ(rc.noise_scale, 1.0);
}

TEST(Config, JsonRoundTrip) {
  RunConfig rc;
  rc.pipeline.variant = Variant::HybridSwitch;
  rc.pipeline.adaptation.lambda = 0.99;
  rc.pipeline.dyn_noise.W(3, 3) = 0.001;
  rc.noise_scale = 50.0;
  rc.scenario = sim::default_scenario(sim::ScenarioName::SteadyCircle);
  const RunConfig back = config_from_json(config_to_json(rc));
  EXPECT_EQ(back.pipeline.variant, Variant::HybridSwitch);
  EXPECT_EQ(back.pipeline.adaptation.lambda, 0.99);
  EXPECT_EQ(back.pipeline.dyn_noise.W(3, 3), 0.001);
  EXPECT_EQ(back.noise_scale, 50.0);
  ASSERT_TRUE(back.scenario);
  EXPECT_EQ(back.scenario->name, sim::ScenarioName::SteadyCircle);
  EXPECT_EQ(config_to_json(back), config_to_json(rc));
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"variant": "ukf"})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"adaptation": {"lambda": 1.5}})")),
               ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"dt": "fast"})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"dyn_noise": {"W": [1, 2]}})")),
               ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"noise_scale": 0})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse("[1]")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/sideslip.json"), ConfigError);
}
