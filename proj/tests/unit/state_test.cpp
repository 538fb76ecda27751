#include "mslddmm/state.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace mslddmm {
namespace {

using testing::cols;
using testing::expect_error;

MultiscaleConfiguration two_scale() {
  return MultiscaleConfiguration({cols({{0, 0}}), cols({{1, 0}, {0, 2}, {3, 3}})});
}

TEST(ScaleStack, ReportsShape) {
  const MultiscaleConfiguration q = two_scale();
  EXPECT_EQ(q.num_scales(), 2u);
  EXPECT_EQ(q.dim(), 2);
  EXPECT_EQ(q.count(0), 1);
  EXPECT_EQ(q.count(1), 3);
  EXPECT_EQ(q.total_count(), 4);
  EXPECT_EQ(q.point(1, 2), Vector::Constant(2, 3.0));
  EXPECT_EQ(MultiscaleConfiguration().dim(), 0);
}

TEST(ScaleStack, RejectsMixedDimensions) {
  expect_error(ErrorCode::kShape,
               [] { MultiscaleConfiguration({Matrix::Zero(2, 1), Matrix::Zero(3, 1)}); });
}

TEST(ScaleStack, ScaleIndexOutOfRange) {
  const MultiscaleConfiguration q = two_scale();
  expect_error(ErrorCode::kIndex, [&] { q.scale(2); });
  expect_error(ErrorCode::kIndex, [&] { q.count(5); });
}

TEST(ScaleStack, ArithmeticIsElementwise) {
  const MultiscaleConfiguration q = two_scale();
  const MultiscaleConfiguration doubled = q + q;
  EXPECT_EQ(doubled, 2.0 * q);
  EXPECT_EQ(doubled - q, q);
  MultiscaleConfiguration r = q;
  r.axpy(-1.0, q);
  EXPECT_EQ(r, MultiscaleConfiguration::zeros_like(q));
  EXPECT_DOUBLE_EQ(q.squared_norm(), 0 + 1 + 4 + 18);
  EXPECT_DOUBLE_EQ(q.dot(q), q.squared_norm());
  EXPECT_TRUE(q.all_finite());
  r.scale(0)(0, 0) = NAN;
  EXPECT_FALSE(r.all_finite());
}

TEST(ScaleStack, ShapeMismatchThrows) {
  MultiscaleConfiguration a = two_scale();
  const MultiscaleConfiguration b({cols({{0, 0}}), cols({{1, 0}})});
  expect_error(ErrorCode::kShape, [&] { a += b; });
  expect_error(ErrorCode::kShape, [&] { a.dot(b); });
  expect_error(ErrorCode::kShape, [&] { a.axpy(1.0, b); });
  EXPECT_FALSE(a == b);
}

TEST(ScaleStack, ZerosLikeCrossesTags) {
  const MultiscaleMomentum p = MultiscaleMomentum::zeros_like(two_scale());
  EXPECT_TRUE(p.same_shape(two_scale()));
  EXPECT_EQ(p.squared_norm(), 0.0);
}

TEST(RequireNested, AcceptsNonDecreasingCounts) {
  EXPECT_NO_THROW(require_nested(two_scale()));
  EXPECT_NO_THROW(require_nested(MultiscaleConfiguration({cols({{0, 0}}), cols({{1, 1}})})));
}

TEST(RequireNested, RejectsShrinkingCounts) {
  const MultiscaleConfiguration q({cols({{0, 0}, {1, 1}}), cols({{2, 2}})});
  expect_error(ErrorCode::kShape, [&] { require_nested(q); });
}

TEST(BandsFrom, CollectsFinerScalesInOrder) {
  const MultiscaleConfiguration q = two_scale();
  MultiscaleMomentum p = MultiscaleMomentum::zeros_like(q);
  p.scale(0) = cols({{9, 9}});
  p.scale(1) = cols({{1, 1}, {2, 2}, {3, 3}});
  const ControlField field = bands_from(q, p);
  ASSERT_EQ(field.bands.size(), 2u);
  EXPECT_EQ(field.bands[0].size(), 4);
  EXPECT_EQ(field.bands[1].size(), 3);
  EXPECT_EQ(field.bands[0].locations.col(0), q.point(0, 0));
  EXPECT_EQ(field.bands[0].weights.col(0), p.point(0, 0));
  EXPECT_EQ(field.bands[0].locations.rightCols(3), q.scale(1));
  EXPECT_EQ(field.bands[1].weights, p.scale(1));
  expect_error(ErrorCode::kShape, [&] {
    bands_from(q, MultiscaleMomentum({cols({{0, 0}})}));
  });
}

TEST(CenterOfMass, AveragesEachScale) {
  const auto centers = centers_of_mass(two_scale());
  EXPECT_EQ(centers[0], Vector::Zero(2));
  EXPECT_DOUBLE_EQ(centers[1][0], 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(centers[1][1], 5.0 / 3.0);
}

TEST(CenterOfMass, EmptyScaleIsDegenerate) {
  const MultiscaleConfiguration q({Matrix(2, 0), cols({{1, 1}})});
  expect_error(ErrorCode::kDegenerate, [&] { center_of_mass(q, 0); });
}

TEST(RegistrationProblem, ComputesTargetCenters) {
  const auto prob = RegistrationProblem::make(two_scale(), 2.0 * two_scale(),
                                              ScaleConfig::make(2, {1.0, 0.5}), 3.0, true);
  EXPECT_EQ(prob.target_centers.size(), 2u);
  EXPECT_DOUBLE_EQ(prob.target_centers[1][0], 8.0 / 3.0);
  EXPECT_EQ(prob.data_weight, 3.0);
  EXPECT_TRUE(prob.sim_enabled);
}

TEST(RegistrationProblem, ValidatesInputs) {
  const ScaleConfig cfg = ScaleConfig::make(2, {1.0, 0.5});
  const MultiscaleConfiguration one_scale({cols({{0, 0}})});
  expect_error(ErrorCode::kShape, [&] { RegistrationProblem::make(two_scale(), one_scale, cfg); });
  const MultiscaleConfiguration fewer({cols({{0, 0}}), cols({{1, 1}})});
  expect_error(ErrorCode::kShape, [&] { RegistrationProblem::make(two_scale(), fewer, cfg); });
  expect_error(ErrorCode::kShape, [&] {
    RegistrationProblem::make(two_scale(), two_scale(), ScaleConfig::make(2, {1.0}));
  });
  expect_error(ErrorCode::kShape, [&] {
    RegistrationProblem::make(two_scale(), two_scale(), ScaleConfig::make(3, {1.0, 0.5}));
  });
  expect_error(ErrorCode::kConfig, [&] {
    RegistrationProblem::make(two_scale(), two_scale(), ScaleConfig{2, {0.5, 1.0}});
  });
  expect_error(ErrorCode::kConfig,
               [&] { RegistrationProblem::make(two_scale(), two_scale(), cfg, 0.0); });
  expect_error(ErrorCode::kConfig,
               [&] { RegistrationProblem::make(two_scale(), two_scale(), cfg, NAN); });
  const MultiscaleConfiguration shrinking({cols({{0, 0}, {1, 1}}), cols({{2, 2}})});
  expect_error(ErrorCode::kShape,
               [&] { RegistrationProblem::make(shrinking, shrinking, cfg); });
}

}  // namespace
}  // namespace mslddmm
