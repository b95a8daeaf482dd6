#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gatgrasp/geometry.hpp"
#include "test_support.hpp"

using namespace gatgrasp;

namespace {

CameraIntrinsics unit_camera() { return {1.0, 1.0, 0.0, 0.0, 1, 1}; }
CameraIntrinsics camera_100() { return {100.0, 100.0, 50.0, 50.0, 200, 200}; }

// Direction comparison up to sign.
double axis_error(const Vec3& a, const Vec3& b) { return std::min((a - b).norm(), (a + b).norm()); }

}  // namespace

TEST(Project, PrincipalAxisPointLandsOnPrincipalPoint) {
  const auto p = project({0, 0, 1}, unit_camera());
  EXPECT_EQ(p.u, 0.0);
  EXPECT_EQ(p.v, 0.0);
}

TEST(Project, HandEvaluatedPinhole) {
  const auto p = project({1, 2, 2}, camera_100());
  EXPECT_DOUBLE_EQ(p.u, 100.0);
  EXPECT_DOUBLE_EQ(p.v, 150.0);
}

TEST(Project, BehindCameraIsRejected) {
  EXPECT_ERROR_CODE(project({0, 0, -1}, unit_camera()), ErrorCode::NonPositiveDepth);
  EXPECT_ERROR_CODE(project({0, 0, 0}, unit_camera()), ErrorCode::NonPositiveDepth);
}

TEST(Backproject, Examples) {
  EXPECT_TRUE(backproject({0, 0}, 1.0, unit_camera()).isApprox(Vec3(0, 0, 1)));
  const Vec3 p = backproject({100, 150}, 2.0, camera_100());
  EXPECT_NEAR((p - Vec3(1, 2, 2)).norm(), 0.0, 1e-12);
  EXPECT_ERROR_CODE(backproject({0, 0}, 0.0, unit_camera()), ErrorCode::NonPositiveDepth);
}

TEST(Backproject, RoundTripOnRandomPoints) {
  const CameraIntrinsics k{525.0, 530.0, 319.5, 239.5, 640, 480};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> xy(-2.0, 2.0), z(0.1, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(xy(rng), xy(rng), z(rng));
    const PixelPoint px = project(p, k);
    const PixelPoint again = project(backproject(px, p.z(), k), k);
    EXPECT_LT(std::hypot(again.u - px.u, again.v - px.v), 1e-9);
  }
}

TEST(Intrinsics, ValidationRejectsBadValues) {
  EXPECT_ERROR_CODE((CameraIntrinsics{0.0, 1.0, 0.0, 0.0, 10, 10}.validate()), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE((CameraIntrinsics{1.0, 1.0, 20.0, 0.0, 10, 10}.validate()), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE((CameraIntrinsics{1.0, 1.0, 0.0, 0.0, 0, 10}.validate()), ErrorCode::InvalidArgument);
}

TEST(PixelFootprint, ContainsUsesHalfOpenCellBounds) {
  const ImageDims dims{4, 3};
  EXPECT_TRUE(contains(dims, {-0.5, -0.5}));
  EXPECT_TRUE(contains(dims, {3.49, 2.49}));
  EXPECT_FALSE(contains(dims, {3.5, 0.0}));
  EXPECT_FALSE(contains(dims, {0.0, -0.51}));
  EXPECT_EQ(nearest_cell(2.5), 3);
  EXPECT_EQ(nearest_cell(2.49), 2);
  EXPECT_EQ(nearest_cell(-0.5), 0);
}

TEST(Rotation, RejectsNonRotations) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = -1.0;  // reflection
  EXPECT_ERROR_CODE(Rotation3::from_matrix(m), ErrorCode::InvalidRotation);
  EXPECT_ERROR_CODE(Rotation3::from_matrix(2.0 * Eigen::Matrix3d::Identity()), ErrorCode::InvalidRotation);
}

TEST(Rotation, QuaternionAndAxisAngleAgree) {
  const auto a = Rotation3::from_axis_angle(Vec3(1, 0, 0), M_PI / 2);
  const auto q = Rotation3::from_quaternion(std::cos(M_PI / 4), std::sin(M_PI / 4), 0, 0);
  EXPECT_LT((a.matrix() - q.matrix()).norm(), 1e-12);
  EXPECT_LT((a * Vec3(0, 1, 0) - Vec3(0, 0, 1)).norm(), 1e-12);
}

TEST(Ray, NormalizesAndMeasures) {
  const Ray r(Vec3(1, 0, 0), Vec3(0, 0, 2));
  EXPECT_DOUBLE_EQ(r.direction().z(), 1.0);
  EXPECT_DOUBLE_EQ(r.parameter_of(Vec3(1, 3, 5)), 5.0);
  EXPECT_DOUBLE_EQ(r.line_distance(Vec3(1, 3, 5)), 3.0);
  EXPECT_ERROR_CODE(Ray(Vec3::Zero(), Vec3::Zero()), ErrorCode::DegenerateInput);
}

TEST(LineFit, CollinearPointsAreAllInliers) {
  const std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  const LineFit fit = fit_line_ransac(pts);
  EXPECT_EQ(fit.inlier_count, 4u);
  EXPECT_LT(axis_error(fit.ray.direction(), Vec3::UnitX()), 1e-12);
  EXPECT_NEAR(fit.residual, 0.0, 1e-12);
}

TEST(LineFit, OutlierIsFlaggedOut) {
  const std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}, {1.5, 5, 0}};
  const LineFit fit = fit_line_ransac(pts, {0.01, 100, 3});
  ASSERT_EQ(fit.inliers.size(), 5u);
  EXPECT_EQ(fit.inlier_count, 4u);
  EXPECT_FALSE(fit.inliers[4]);
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(fit.inliers[static_cast<std::size_t>(i)]);
  EXPECT_LT(axis_error(fit.ray.direction(), Vec3::UnitX()), 1e-12);
}

TEST(LineFit, TwoPointsDefineTheLine) {
  const std::vector<Vec3> pts = {{0, 0, 0}, {0, 0, 1}};
  const LineFit fit = fit_line_ransac(pts);
  EXPECT_EQ(fit.inlier_count, 2u);
  EXPECT_LT(axis_error(fit.ray.direction(), Vec3::UnitZ()), 1e-12);
  EXPECT_LT(fit.ray.line_distance(Vec3(0, 0, 0)), 1e-12);
  EXPECT_LT(fit.ray.line_distance(Vec3(0, 0, 1)), 1e-12);
}

TEST(LineFit, FewerThanTwoPointsIsDegenerate) {
  const std::vector<Vec3> pts = {{0, 0, 0}};
  EXPECT_ERROR_CODE(fit_line_ransac(pts), ErrorCode::DegenerateInput);
  const std::vector<Vec3> same = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  EXPECT_ERROR_CODE(fit_line_ransac(same), ErrorCode::DegenerateInput);
}

TEST(LineFit, RigidMotionMovesTheFit) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 0.002);
  std::vector<Vec3> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(Vec3(0.1 * i, 0.05 * i, -0.02 * i) + Vec3(n(rng), n(rng), n(rng)));
  pts.push_back({0.3, 0.8, 0.1});
  const LineFit base = fit_line_ransac(pts, {0.01, 200, 5});

  const auto r = Rotation3::from_axis_angle(Vec3(1, 2, 3), 0.7);
  const Vec3 t(0.4, -1.0, 2.0);
  std::vector<Vec3> moved;
  for (const auto& p : pts) moved.push_back(r * p + t);
  const LineFit fit = fit_line_ransac(moved, {0.01, 200, 5});

  EXPECT_EQ(fit.inliers, base.inliers);
  EXPECT_LT(axis_error(fit.ray.direction(), r * base.ray.direction()), 1e-9);
  EXPECT_LT(fit.ray.line_distance(r * base.ray.origin() + t), 1e-9);
}

TEST(LineFit, SameSeedSameResult) {
  std::vector<Vec3> pts;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 40; ++i) pts.push_back(i % 3 ? Vec3(0.05 * i, 0, 0) : Vec3(u(rng), u(rng), u(rng)));
  const auto a = fit_line_ransac(pts, {0.01, 50, 9});
  const auto b = fit_line_ransac(pts, {0.01, 50, 9});
  EXPECT_EQ(a.inliers, b.inliers);
  EXPECT_EQ(a.ray.direction(), b.ray.direction());
}

TEST(Angle, BetweenVectors) {
  EXPECT_NEAR(angle_between(Vec3::UnitX(), Vec3::UnitY()), M_PI / 2, 1e-12);
  EXPECT_NEAR(angle_between(Vec3::UnitX(), Vec3::UnitX()), 0.0, 1e-12);
}
