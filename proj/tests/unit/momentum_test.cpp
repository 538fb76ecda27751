#include "mslddmm/momentum.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace mslddmm {
namespace {

using testing::cols;
using testing::expect_error;
using testing::max_abs;

struct Instance {
  ScaleConfig cfg;
  PhasePoint x0;
};

Instance landmark_instance(std::uint64_t seed) {
  InstanceGenerator gen(seed);
  Instance inst{ScaleConfig::make(2, {1.5, 0.7}), {}};
  inst.x0 = PhasePoint::at_rest(gen.configuration(2, {2, 4}, 1.0));
  inst.x0.p = gen.momentum(inst.x0.q, 0.8);
  return inst;
}

double worst(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

TEST(MomentumTransport, ResidualShrinksAtFourthOrder) {
  const Instance inst = landmark_instance(61);
  std::vector<double> residual;
  for (int n : {25, 50, 100}) {
    const Trajectory traj = shoot(inst.cfg, inst.x0, n);
    residual.push_back(std::max(worst(momentum_transport_residual(inst.cfg, traj, 0)),
                                worst(momentum_transport_residual(inst.cfg, traj, 1))));
  }
  EXPECT_LT(residual[2], 1e-6);
  EXPECT_NEAR(std::log2(residual[0] / residual[1]), 4.0, 0.5);
  EXPECT_NEAR(std::log2(residual[1] / residual[2]), 4.0, 0.5);
}

TEST(MomentumTransport, OneEntryPerLandmark) {
  const Instance inst = landmark_instance(62);
  const Trajectory traj = shoot(inst.cfg, inst.x0, 10);
  EXPECT_EQ(momentum_transport_residual(inst.cfg, traj, 0).size(), 2u);
  EXPECT_EQ(momentum_transport_residual(inst.cfg, traj, 1).size(), 4u);
  expect_error(ErrorCode::kIndex, [&] { momentum_transport_residual(inst.cfg, traj, 2); });
}

TEST(AdvectProbes, ProbeOnALandmarkFollowsIt) {
  // A probe of the finest scale sitting on a finest landmark moves with the
  // same velocity, so the coupled discrete system keeps them together.
  const Instance inst = landmark_instance(63);
  const Trajectory traj = shoot(inst.cfg, inst.x0, 40);
  const ProbeSet probes{1, inst.x0.q.scale(1)};
  const ProbePaths paths = advect_probes(inst.cfg, traj, probes);
  ASSERT_EQ(paths.positions.size(), 41u);
  for (std::size_t k = 0; k < paths.positions.size(); ++k) {
    EXPECT_LT(max_abs(paths.positions[k] - traj.samples[k].q.scale(1)), 1e-14) << k;
  }
}

TEST(AdvectProbes, ThreadCountDoesNotChangeResults) {
  const Instance inst = landmark_instance(64);
  const Trajectory traj = shoot(inst.cfg, inst.x0, 20);
  const ProbeSet grid = make_probe_grid(0, Vector{{-2, -2}}, Vector{{2, 2}}, {7, 5});
  const ProbePaths serial = advect_probes(inst.cfg, traj, grid, 1);
  for (unsigned threads : {2u, 3u, 8u, 64u}) {
    const ProbePaths parallel = advect_probes(inst.cfg, traj, grid, threads);
    for (std::size_t k = 0; k < serial.positions.size(); ++k) {
      ASSERT_EQ(parallel.positions[k], serial.positions[k]) << threads;
    }
  }
}

TEST(AdvectProbes, RejectsBadProbeSets) {
  const Instance inst = landmark_instance(65);
  const Trajectory traj = shoot(inst.cfg, inst.x0, 2);
  expect_error(ErrorCode::kIndex, [&] { advect_probes(inst.cfg, traj, {2, Matrix::Zero(2, 1)}); });
  expect_error(ErrorCode::kShape, [&] { advect_probes(inst.cfg, traj, {0, Matrix::Zero(3, 1)}); });
}

TEST(ProbeGrid, LaysOutPointsRegularly) {
  const ProbeSet grid = make_probe_grid(1, Vector{{0, -1}}, Vector{{2, 1}}, {3, 2});
  EXPECT_EQ(grid.scale, 1u);
  ASSERT_EQ(grid.points.cols(), 6);
  Matrix sorted = grid.points;
  std::vector<std::pair<double, double>> pts;
  for (Index j = 0; j < sorted.cols(); ++j) pts.emplace_back(sorted(0, j), sorted(1, j));
  std::sort(pts.begin(), pts.end());
  const std::vector<std::pair<double, double>> expected{{0, -1}, {0, 1}, {1, -1}, {1, 1}, {2, -1}, {2, 1}};
  EXPECT_EQ(pts, expected);
  EXPECT_EQ(make_probe_grid(0, Vector{{3}}, Vector{{3}}, {1}).points, Matrix::Constant(1, 1, 3.0));
}

TEST(ProbeGrid, ErrorPaths) {
  expect_error(ErrorCode::kShape, [] { make_probe_grid(0, Vector{{0, 0}}, Vector{{1, 1}}, {2}); });
  expect_error(ErrorCode::kShape, [] { make_probe_grid(0, Vector{{0}}, Vector{{1, 1}}, {2, 2}); });
  expect_error(ErrorCode::kConfig, [] { make_probe_grid(0, Vector{{0}}, Vector{{1}}, {0}); });
  expect_error(ErrorCode::kConfig, [] { make_probe_grid(0, Vector{{1}}, Vector{{0}}, {2}); });
}

TEST(SplitLandmarks, DistributesMomentumAcrossCopies) {
  const MultiscaleConfiguration q({cols({{0, 0}}), cols({{0, 0}, {1, 1}})});
  const MultiscaleMomentum p({cols({{2, 4}}), cols({{1, 0}, {0, 1}})});
  const auto [q2, p2] = split_landmarks(q, p, {{1, 1, {0.25, 0.75}}});
  ASSERT_EQ(q2.count(1), 3);
  EXPECT_EQ(q2.point(1, 2), q.point(1, 1));
  EXPECT_EQ(p2.point(1, 1), (Vector{{0, 0.25}}));
  EXPECT_EQ(p2.point(1, 2), (Vector{{0, 0.75}}));
  EXPECT_EQ(p2.scale(0), p.scale(0));
}

TEST(SplitLandmarks, ErrorPaths) {
  const MultiscaleConfiguration q({cols({{0, 0}}), cols({{0, 0}, {1, 1}})});
  const MultiscaleMomentum p = MultiscaleMomentum::zeros_like(q);
  expect_error(ErrorCode::kContract, [&] { split_landmarks(q, p, {{0, 0, {0.5, 0.4}}}); });
  expect_error(ErrorCode::kContract, [&] { split_landmarks(q, p, {{0, 0, {}}}); });
  expect_error(ErrorCode::kIndex, [&] { split_landmarks(q, p, {{1, 2, {1.0}}}); });
  // Three coarse landmarks would exceed the two on the finer scale.
  expect_error(ErrorCode::kShape, [&] { split_landmarks(q, p, {{0, 0, {0.5, 0.25, 0.25}}}); });
  expect_error(ErrorCode::kShape,
               [&] { split_landmarks(q, MultiscaleMomentum({cols({{0, 0}})}), {}); });
}

TEST(LiftUniqueness, SplitRepresentationsMoveProbesIdentically) {
  const Instance inst = landmark_instance(66);
  const ProbeSet grid = make_probe_grid(1, Vector{{-1.5, -1.5}}, Vector{{1.5, 1.5}}, {4, 4});
  const double gap = lift_uniqueness_check(
      inst.cfg, inst.x0.q, inst.x0.p,
      {{0, 1, {0.3, 0.7}}, {1, 3, {0.5, 0.25, 0.25}}, {1, 0, {1.5, -0.5}}}, grid, 60);
  EXPECT_LT(gap, 1e-10);
}

}  // namespace
}  // namespace mslddmm
