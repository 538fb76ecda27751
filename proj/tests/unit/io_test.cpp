#include "mslddmm/io.hpp"

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace mslddmm {
namespace {

using testing::cols;
using testing::expect_error;
using testing::TempDir;

constexpr const char* kMinimalPoints = R"({"dim": 2, "source": [[[0, 0]]], "target": [[[1, 0]]]})";
constexpr const char* kMinimalConfig = R"({"sigmas": [1]})";

constexpr const char* kTwoScalePoints = R"({
  "dim": 2,
  "source": [[[0, 0]], [[0, 0], [1, 0.5]]],
  "target": [[[0.1, 0]], [[0.1, 0], [1.2, 0.4]]]
})";

std::string error_message(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(ParseConfig, MinimalFileUsesDefaults) {
  const RunConfig c = parse_config(kMinimalConfig);
  EXPECT_EQ(c.sigmas, std::vector<double>{1.0});
  EXPECT_EQ(c.integrator.scheme, Scheme::kRk4);
  EXPECT_EQ(c.integrator.steps, 50);
  EXPECT_EQ(c.optimizer.max_iters, 500);
  EXPECT_EQ(c.optimizer.step_policy, StepPolicy::kBarzilaiBorwein);
  EXPECT_TRUE(c.sim_enabled);
  EXPECT_FALSE(c.probe_grid.has_value());
  EXPECT_EQ(c.threads, 1u);
}

TEST(ParseConfig, ReadsEveryField) {
  const RunConfig c = parse_config(R"({
    "sigmas": [3, 1.5, 0.5],
    "integrator": {"scheme": "euler", "steps": 12, "project_rotation": true},
    "optimizer": {"max_iters": 7, "grad_tol": 1e-3, "armijo_c": 0.25, "initial_step": 0.5,
                  "max_halvings": 3, "step_policy": "grow", "complete_normal_momentum": false,
                  "energy_drift_tol": 1e-4, "starts": 3, "start_spread": 0.5},
    "data_weight": 4, "sim_enabled": false,
    "probe_grid": {"scale": 2, "lower": [-1, -2], "upper": [1, 2], "resolution": [3, 4]},
    "output_dir": "elsewhere", "seed": 99, "threads": 4
  })");
  EXPECT_EQ(c.sigmas, (std::vector<double>{3, 1.5, 0.5}));
  EXPECT_EQ(c.integrator.scheme, Scheme::kEuler);
  EXPECT_EQ(c.integrator.steps, 12);
  EXPECT_TRUE(c.integrator.project_rotation);
  EXPECT_EQ(c.optimizer.max_iters, 7);
  EXPECT_EQ(c.optimizer.armijo_c, 0.25);
  EXPECT_EQ(c.optimizer.step_policy, StepPolicy::kGrow);
  EXPECT_FALSE(c.optimizer.complete_normal_momentum);
  EXPECT_EQ(c.data_weight, 4.0);
  EXPECT_FALSE(c.sim_enabled);
  ASSERT_TRUE(c.probe_grid.has_value());
  EXPECT_EQ(c.probe_grid->scale, 2u);
  EXPECT_EQ(c.probe_grid->resolution, (std::vector<int>{3, 4}));
  EXPECT_EQ(c.output_dir, "elsewhere");
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.threads, 4u);
  const OptimizerOptions opts = c.optimizer_options();
  EXPECT_EQ(opts.setup.steps, 12);
  EXPECT_EQ(opts.max_halvings, 3);
  EXPECT_EQ(opts.energy_drift_tol, 1e-4);
  EXPECT_EQ(c.optimizer.starts, 3);
  EXPECT_EQ(c.optimizer.start_spread, 0.5);
}

TEST(ParseConfig, MalformedJsonReportsLineAndColumn) {
  const std::string text = "{\n  \"sigmas\": [1,\n  ]\n}";
  expect_error(ErrorCode::kParse, [&] { parse_config(text); });
  EXPECT_NE(error_message([&] { parse_config(text); }).find("config:3:"), std::string::npos);
}

TEST(ParseConfig, WrongTypesAndUnknownKeysNameTheField) {
  expect_error(ErrorCode::kParse, [] { parse_config(R"({"sigmas": "wide"})"); });
  expect_error(ErrorCode::kParse, [] { parse_config(R"({"sigmas": [1], "colour": 1})"); });
  EXPECT_NE(error_message([] { parse_config(R"({"sigmas": [1], "integrator": {"steps": "ten"}})"); })
                .find("config.integrator.steps"),
            std::string::npos);
  EXPECT_NE(error_message([] { parse_config(R"({"sigmas": [1], "optimizer": {"tol": 1}})"); })
                .find("config.optimizer.tol"),
            std::string::npos);
  expect_error(ErrorCode::kParse, [] { parse_config(R"({})"); });
  expect_error(ErrorCode::kParse, [] { parse_config(R"([1, 2])"); });
}

TEST(ParseConfig, InvalidValuesAreConfigErrors) {
  expect_error(ErrorCode::kConfig, [] { parse_config(R"({"sigmas": [1, 2]})"); });
  expect_error(ErrorCode::kConfig, [] { parse_config(R"({"sigmas": [1, 1]})"); });
  expect_error(ErrorCode::kConfig, [] { parse_config(R"({"sigmas": [-1]})"); });
  expect_error(ErrorCode::kConfig,
               [] { parse_config(R"({"sigmas": [1], "optimizer": {"energy_drift_tol": 0}})"); });
  expect_error(ErrorCode::kConfig, [] { parse_config(R"({"sigmas": [1], "optimizer": {"starts": 0}})"); });
  expect_error(ErrorCode::kConfig,
               [] { parse_config(R"({"sigmas": [1], "optimizer": {"start_spread": -1}})"); });
  expect_error(ErrorCode::kConfig, [] { parse_config(R"({"sigmas": [1], "data_weight": 0})"); });
  expect_error(ErrorCode::kConfig,
               [] { parse_config(R"({"sigmas": [1], "integrator": {"steps": 0}})"); });
  expect_error(ErrorCode::kConfig,
               [] { parse_config(R"({"sigmas": [1], "integrator": {"scheme": "leapfrog"}})"); });
  expect_error(ErrorCode::kConfig,
               [] { parse_config(R"({"sigmas": [1], "optimizer": {"armijo_c": 1.5}})"); });
  expect_error(ErrorCode::kConfig,
               [] { parse_config(R"({"sigmas": [1], "optimizer": {"step_policy": "cg"}})"); });
  expect_error(ErrorCode::kConfig, [] { parse_config(R"({"sigmas": [1], "threads": 0})"); });
  expect_error(ErrorCode::kConfig, [] {
    parse_config(R"({"sigmas": [1], "probe_grid": {"lower": [1], "upper": [0], "resolution": [2]}})");
  });
}

TEST(ParsePoints, MinimalFile) {
  const PointSet pts = parse_points(kMinimalPoints);
  EXPECT_EQ(pts.dim, 2);
  EXPECT_EQ(pts.source.num_scales(), 1u);
  EXPECT_EQ(pts.target.point(0, 0), (Vector{{1, 0}}));
  const RegistrationProblem prob = make_problem(pts, parse_config(kMinimalConfig));
  EXPECT_TRUE(prob.sim_enabled);
}

TEST(ParsePoints, ShapeErrors) {
  expect_error(ErrorCode::kShape,
               [] { parse_points(R"({"dim": 2, "source": [[[0, 0, 0]]], "target": [[[0, 0]]]})"); });
  expect_error(ErrorCode::kShape, [] {
    parse_points(R"({"dim": 2, "source": [[[0, 0]]], "target": [[[0, 0], [1, 1]]]})");
  });
  expect_error(ErrorCode::kShape, [] {
    parse_points(R"({"dim": 2, "source": [[[0, 0], [1, 1]], [[2, 2]]],
                     "target": [[[0, 0], [1, 1]], [[2, 2]]]})");
  });
  expect_error(ErrorCode::kShape, [] { parse_points(R"({"dim": 2, "source": [], "target": []})"); });
  expect_error(ErrorCode::kParse, [] { parse_points(R"({"dim": 2, "source": [[[0, 0]]]})"); });
  expect_error(ErrorCode::kParse,
               [] { parse_points(R"({"dim": 2, "source": [[[0, "x"]]], "target": [[[0, 0]]]})"); });
  expect_error(ErrorCode::kConfig,
               [] { parse_points(R"({"dim": 0, "source": [[[]]], "target": [[[]]]})"); });
}

TEST(MakeProblem, ScaleCountMustMatchSigmas) {
  const PointSet pts = parse_points(kTwoScalePoints);
  expect_error(ErrorCode::kShape, [&] { make_problem(pts, parse_config(kMinimalConfig)); });
  const RegistrationProblem prob = make_problem(pts, parse_config(R"({"sigmas": [2, 1], "data_weight": 3})"));
  EXPECT_EQ(prob.data_weight, 3.0);
  EXPECT_EQ(prob.cfg.num_scales(), 2u);
}

TEST(InitialGuesses, FirstStartIsZeroAndTheRestFollowTheSeed) {
  const RegistrationProblem prob = make_problem(parse_points(kTwoScalePoints),
                                                parse_config(R"({"sigmas": [2, 1]})"));
  RunConfig config = parse_config(R"({"sigmas": [2, 1], "seed": 5, "optimizer": {"starts": 3}})");
  const std::vector<InitialMomenta> a = initial_guesses(prob, config);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0].squared_norm(), 0.0);
  EXPECT_GT(a[1].squared_norm(), 0.0);
  EXPECT_TRUE(a[1].p.same_shape(prob.source));
  EXPECT_EQ(initial_guesses(prob, config)[2].p.scale(1), a[2].p.scale(1));
  config.seed = 6;
  EXPECT_NE(initial_guesses(prob, config)[1].p.scale(1), a[1].p.scale(1));
}

TEST(RoundTrip, ConfigSerializationIsAFixedPoint) {
  const RunConfig c = parse_config(R"({"sigmas": [0.1, 0.030000000000000002], "data_weight": 0.3,
    "probe_grid": {"lower": [-1], "upper": [1], "resolution": [5]}, "seed": 18446744073709551615})");
  const std::string text = serialize_config(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(back.sigmas, c.sigmas);
  EXPECT_EQ(back.data_weight, 0.3);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(serialize_config(back), text);
}

TEST(RoundTrip, PointsSerializationPreservesBits) {
  InstanceGenerator gen(71);
  PointSet pts{3, gen.configuration(3, {2, 5}, 1.0), gen.configuration(3, {2, 5}, 1.0)};
  const PointSet back = parse_points(serialize_points(pts));
  EXPECT_EQ(back.dim, 3);
  EXPECT_EQ(back.source, pts.source);
  EXPECT_EQ(back.target, pts.target);
  EXPECT_EQ(serialize_points(back), serialize_points(pts));
}

TEST(RoundTrip, SampleFileIsCanonical) {
  const std::string text = read_file(std::filesystem::path(MSLDDMM_DATA_DIR) / "similarity_2d.json");
  std::string canonical = serialize_points(parse_points(text));
  EXPECT_EQ(serialize_points(parse_points(canonical)), canonical);
  EXPECT_EQ(parse_points(canonical).source, parse_points(text).source);
}

TEST(RoundTrip, MomentaFiles) {
  InstanceGenerator gen(72);
  const MultiscaleConfiguration shape = gen.configuration(2, {1, 3}, 1.0);
  const MultiscaleMomentum p = gen.momentum(shape, 1.0);
  EXPECT_EQ(parse_landmark_momenta(serialize_landmark_momenta(p), shape), p);
  const SimMomentum pa = gen.sim_momentum(2, 1.0);
  const SimMomentum back = parse_sim_momentum(serialize_sim_momentum(pa), 2);
  EXPECT_EQ(back.p_rho, pa.p_rho);
  EXPECT_EQ(back.p_R, pa.p_R);
  EXPECT_EQ(back.p_tau, pa.p_tau);
  expect_error(ErrorCode::kShape, [&] {
    parse_landmark_momenta(serialize_landmark_momenta(p), gen.configuration(2, {1, 2}, 1.0));
  });
  expect_error(ErrorCode::kShape, [&] { parse_sim_momentum(serialize_sim_momentum(pa), 3); });
  expect_error(ErrorCode::kParse, [&] { parse_sim_momentum("{\"p_rho\": 1,", 2); });
}

TEST(GridSpec, ParsesRangesAndScale) {
  const ProbeGridConfig g = parse_grid_spec("-1:1:3,0:2.5:4@1");
  EXPECT_EQ(g.lower, (std::vector<double>{-1, 0}));
  EXPECT_EQ(g.upper, (std::vector<double>{1, 2.5}));
  EXPECT_EQ(g.resolution, (std::vector<int>{3, 4}));
  EXPECT_EQ(g.scale, 1u);
  EXPECT_EQ(parse_grid_spec("0:1:2").scale, 0u);
  const ProbeSet probes = make_probe_set(g, 2, 2);
  EXPECT_EQ(probes.points.cols(), 12);
  expect_error(ErrorCode::kShape, [&] { make_probe_set(g, 3, 2); });
  expect_error(ErrorCode::kConfig, [&] { make_probe_set(g, 2, 1); });
}

TEST(GridSpec, RejectsMalformedSpecs) {
  for (const char* bad : {"", "0:1", "0:1:x", "a:1:2", "0:1:2@", "0:1:2@x", "1:0:2", "0:1:0", "0:1:2,"}) {
    expect_error(ErrorCode::kConfig, [&] { parse_grid_spec(bad); });
  }
}

TEST(Files, WriteCreatesDirectoriesAndReadsBack) {
  TempDir dir;
  const auto path = dir / "nested/deeper/file.txt";
  write_file(path, "contents\n");
  EXPECT_EQ(read_file(path), "contents\n");
  expect_error(ErrorCode::kConfig, [&] { read_file(dir / "missing.json"); });
}

TEST(LoadProblem, ReadsBothFiles) {
  TempDir dir;
  write_file(dir / "pts.json", kTwoScalePoints);
  write_file(dir / "cfg.json", R"({"sigmas": [2, 1]})");
  const LoadedProblem loaded = load_problem(dir / "pts.json", dir / "cfg.json");
  EXPECT_EQ(loaded.problem.source.count(1), 2);
  EXPECT_EQ(loaded.config.sigmas.size(), 2u);
  write_file(dir / "bad.json", "{\"sigmas\": [2, 1]");
  expect_error(ErrorCode::kParse, [&] { load_problem(dir / "pts.json", dir / "bad.json"); });
}

class Tables : public ::testing::Test {
 protected:
  void SetUp() override {
    const PointSet pts = parse_points(kTwoScalePoints);
    prob_ = make_problem(pts, parse_config(R"({"sigmas": [2, 1]})"));
    InstanceGenerator gen(73);
    PhasePoint x0 = PhasePoint::at_rest(prob_->source);
    x0.p = gen.momentum(x0.q, 0.3);
    x0.pa = gen.sim_momentum(2, 0.2);
    traj_ = shoot(prob_->cfg, x0, 4);
  }

  static std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }

  std::optional<RegistrationProblem> prob_;
  Trajectory traj_;
};

TEST_F(Tables, TrajectoryHasOneRowPerLandmarkAndStep) {
  std::ostringstream out;
  write_trajectory_csv(out, traj_);
  const auto rows = lines(out.str());
  EXPECT_EQ(rows.front(), "step,t,scale,index,q_0,q_1,p_0,p_1");
  EXPECT_EQ(rows.size(), 1u + 5u * 3u);
  EXPECT_EQ(rows[1].substr(0, 8), "0,0,0,0,");
}

TEST_F(Tables, SimTrajectoryHeader) {
  std::ostringstream out;
  write_sim_trajectory_csv(out, prob_->cfg, traj_);
  const auto rows = lines(out.str());
  EXPECT_EQ(rows.front(),
            "step,t,rho,R_00,R_01,R_10,R_11,tau_0,tau_1,p_rho,p_R_00,p_R_01,p_R_10,p_R_11,"
            "p_tau_0,p_tau_1,energy");
  EXPECT_EQ(rows.size(), 6u);
}

TEST_F(Tables, TargetProbeAndHistoryHeaders) {
  std::ostringstream target;
  write_target_trajectory_csv(target, *prob_, traj_);
  EXPECT_EQ(lines(target.str()).front(), "step,t,scale,index,y_0,y_1");
  std::ostringstream probes;
  write_probes_csv(probes, traj_, advect_probes(prob_->cfg, traj_, make_probe_set(parse_grid_spec("0:1:2,0:1:2"), 2, 2)));
  EXPECT_EQ(lines(probes.str()).front(), "step,t,probe,x_0,x_1");
  EXPECT_EQ(lines(probes.str()).size(), 1u + 5u * 4u);
  std::ostringstream history;
  write_history_csv(history, {{0, 1.5, 0.5, 1.0, 0.1, 0.0, 0}});
  EXPECT_EQ(lines(history.str()).front(), "iteration,objective,kinetic,data,grad_norm,step,halvings");
  EXPECT_EQ(lines(history.str())[1], "0,1.5,0.5,1,0.10000000000000001,0,0");
}

TEST_F(Tables, OutputIsDeterministic) {
  std::ostringstream a;
  std::ostringstream b;
  write_trajectory_csv(a, traj_);
  write_trajectory_csv(b, shoot(prob_->cfg, traj_.initial(), 4));
  EXPECT_EQ(a.str(), b.str());
}

TEST_F(Tables, DiagnosticsAndReports) {
  const TrajectoryDiagnostics diag = diagnose(prob_->cfg, traj_);
  EXPECT_LT(diag.rho_p_rho_drift, 1e-12);
  EXPECT_LT(diag.p_tau_drift, 1e-15);
  EXPECT_GE(diag.energy_drift, 0.0);
  const RunConfig config = parse_config(R"({"sigmas": [2, 1]})");
  const std::string report = shoot_report(*prob_, config, traj_);
  EXPECT_NE(report.find("\"diagnostics\""), std::string::npos);
  OptimizerOptions opts = config.optimizer_options();
  opts.max_iters = 2;
  const std::string match = match_report(*prob_, config, optimize(*prob_, opts));
  EXPECT_NE(match.find("\"status\": \"max_iterations\""), std::string::npos);
  EXPECT_NE(match.find("\"transversality\""), std::string::npos);
  const std::string multi = match_report(
      *prob_, config, optimize_multistart(*prob_, opts, {InitialMomenta::zero(*prob_)}));
  EXPECT_NE(multi.find("\"best_start\": 0"), std::string::npos);
  EXPECT_NE(multi.find("\"starts\""), std::string::npos);
}

}  // namespace
}  // namespace mslddmm
