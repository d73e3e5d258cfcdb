#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "relloc/geometry.hpp"

using namespace relloc;

namespace {

constexpr double kTol = 1e-9;

void expect_vec_near(const Vec3& a, const Vec3& b, double tol = kTol) {
  EXPECT_NEAR(a.x(), b.x(), tol);
  EXPECT_NEAR(a.y(), b.y(), tol);
  EXPECT_NEAR(a.z(), b.z(), tol);
}

void expect_pose_near(const Pose6DoF& a, const Pose6DoF& b, double tol = kTol) {
  EXPECT_LE((a.rotation - b.rotation).cwiseAbs().maxCoeff(), tol);
  expect_vec_near(a.translation, b.translation, tol);
}

// Arbitrary gravity-aligned pose plus a small pitch so the rotation is not
// a pure yaw.
Pose6DoF tilted_pose(double yaw, double pitch, const Vec3& t) {
  Pose6DoF p = Pose6DoF::from_yaw(yaw, t);
  const Mat3 pitch_m = Eigen::AngleAxisd(pitch, Vec3::UnitX()).toRotationMatrix();
  p.rotation = p.rotation * pitch_m;
  return p;
}

}  // namespace

TEST(Geometry_Angles, NormalizeIntoZeroTwoPi) {
  EXPECT_DOUBLE_EQ(normalize_angle(0.0), 0.0);
  EXPECT_NEAR(normalize_angle(-kPi / 2), 1.5 * kPi, 1e-15);
  EXPECT_NEAR(normalize_angle(5.0 * kPi), kPi, 1e-12);
  EXPECT_LT(normalize_angle(-1e-18), kTwoPi);
  EXPECT_GE(normalize_angle(-1e-18), 0.0);
}

TEST(Geometry_Angles, WrapToPi) {
  EXPECT_NEAR(wrap_to_pi(1.5 * kPi), -0.5 * kPi, 1e-12);
  EXPECT_NEAR(wrap_to_pi(kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_to_pi(-0.25), -0.25, 1e-12);
}

TEST(Geometry_RelState, ThetaNormalizedOnEveryWrite) {
  RelState s(1.0, 2.0, 3.0, -kPi / 2);
  EXPECT_NEAR(s.theta(), 1.5 * kPi, 1e-12);
  s.set_theta(7.0 * kPi);
  EXPECT_NEAR(s.theta(), kPi, 1e-12);
  expect_vec_near(s.position(), Vec3(1.0, 2.0, 3.0));
}

TEST(Geometry_Compose, IdentityIsNeutral) {
  const Pose6DoF p = tilted_pose(0.7, 0.2, Vec3(1.0, -2.0, 0.5));
  expect_pose_near(compose(Pose6DoF::identity(), p), p);
  expect_pose_near(compose(p, Pose6DoF::identity()), p);
}

TEST(Geometry_Compose, PoseTimesInverseIsIdentity) {
  const Pose6DoF p = tilted_pose(-2.1, 0.4, Vec3(3.0, 1.0, -4.0));
  expect_pose_near(compose(p, invert(p)), Pose6DoF::identity());
  expect_pose_near(compose(invert(p), p), Pose6DoF::identity());
}

TEST(Geometry_Compose, TranslationsAdd) {
  const Pose6DoF a = Pose6DoF::from_yaw(0.0, Vec3(1.0, 0.0, 0.0));
  const Pose6DoF b = Pose6DoF::from_yaw(0.0, Vec3(0.0, 2.0, 0.0));
  expect_vec_near(compose(a, b).translation, Vec3(1.0, 2.0, 0.0));
}

TEST(Geometry_Compose, MatchesMatrixProduct) {
  const Pose6DoF a = tilted_pose(0.3, -0.1, Vec3(0.5, 0.2, 1.0));
  const Pose6DoF b = tilted_pose(1.9, 0.3, Vec3(-1.0, 0.0, 2.0));
  const Eigen::Matrix4d expected = a.matrix() * b.matrix();
  EXPECT_LE((compose(a, b).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(compose(a, b).is_valid());
}

TEST(Geometry_Invert, IdentityAndPureTranslation) {
  expect_pose_near(invert(Pose6DoF::identity()), Pose6DoF::identity());
  const Pose6DoF t = Pose6DoF::from_yaw(0.0, Vec3(1.0, -2.0, 3.0));
  expect_pose_near(invert(t), Pose6DoF::from_yaw(0.0, Vec3(-1.0, 2.0, -3.0)));
}

TEST(Geometry_Invert, YawPlusTranslationRoundTrip) {
  const Pose6DoF p = Pose6DoF::from_yaw(kPi / 2, Vec3(2.0, 0.0, 1.0));
  expect_pose_near(compose(p, invert(p)), Pose6DoF::identity());
  expect_pose_near(invert(invert(p)), p);
}

TEST(Geometry_Pose, ValidityChecks) {
  EXPECT_TRUE(Pose6DoF::identity().is_valid());
  Pose6DoF mirrored;
  mirrored.rotation(0, 0) = -1.0;
  EXPECT_FALSE(mirrored.is_valid());
  Pose6DoF scaled;
  scaled.rotation *= 1.01;
  EXPECT_FALSE(scaled.is_valid());
  EXPECT_NEAR(Pose6DoF::from_yaw(0.8, Vec3::Zero()).yaw(), 0.8, 1e-12);
}

TEST(Geometry_RelativePosition, IdentityDisplay) {
  expect_vec_near(relative_position(Pose6DoF::identity(), Vec3(1.0, 2.0, 3.0)), Vec3(1.0, 2.0, 3.0));
}

TEST(Geometry_RelativePosition, TranslatedDisplay) {
  const Pose6DoF d = Pose6DoF::from_yaw(0.0, Vec3(1.0, 0.0, 0.0));
  expect_vec_near(relative_position(d, Vec3(1.0, 0.0, 0.0)), Vec3::Zero());
}

TEST(Geometry_RelativePosition, YawedDisplayMatchesMatrixOracle) {
  const Pose6DoF d = Pose6DoF::from_yaw(kPi / 2, Vec3(0.5, 1.4, -1.0));
  // A point ahead of the camera: the camera looks along the display's -z.
  const Vec3 ahead = d.apply(Vec3(0.0, 0.0, -3.0));
  const Eigen::Vector4d h(ahead.x(), ahead.y(), ahead.z(), 1.0);
  const Eigen::Vector4d oracle = d.matrix().inverse() * h;
  const Vec3 got = relative_position(d, ahead);
  expect_vec_near(got, oracle.head<3>());
  expect_vec_near(got, Vec3(0.0, 0.0, -3.0));
}

TEST(Geometry_RelativePosition, DisplayOriginMapsToZero) {
  const Pose6DoF d = tilted_pose(1.2, 0.3, Vec3(4.0, 1.0, -2.0));
  expect_vec_near(relative_position(d, d.translation), Vec3::Zero());
}

TEST(Geometry_Project, OpticalAxis) {
  CameraIntrinsics k;
  k.f_x = k.f_y = 1000.0;
  k.c_x = 640.0;
  k.c_y = 360.0;
  k.h_x = 1280.0;
  k.h_y = 720.0;
  const auto px = project(k, Vec3(0.0, 0.0, -2.0));
  ASSERT_TRUE(px.has_value());
  EXPECT_DOUBLE_EQ(px->u, 640.0);
  EXPECT_DOUBLE_EQ(px->v, 360.0);
}

TEST(Geometry_Project, LateralOffset) {
  CameraIntrinsics k;
  k.f_x = k.f_y = 1000.0;
  k.c_x = 640.0;
  k.c_y = 360.0;
  k.h_x = 1280.0;
  k.h_y = 720.0;
  const auto px = project(k, Vec3(1.0, 0.0, -2.0));
  ASSERT_TRUE(px.has_value());
  EXPECT_DOUBLE_EQ(px->u, 1140.0);
  EXPECT_DOUBLE_EQ(px->v, 360.0);
  // +y is up, so a point above the axis lands nearer the top edge.
  const auto up = project(k, Vec3(0.0, 1.0, -2.0));
  ASSERT_TRUE(up.has_value());
  EXPECT_DOUBLE_EQ(up->v, -140.0);
}

TEST(Geometry_Project, BehindCameraIsRejected) {
  const CameraIntrinsics k;
  EXPECT_FALSE(project(k, Vec3(0.0, 0.0, 1.0)).has_value());
  EXPECT_FALSE(project(k, Vec3(0.3, 0.1, 0.0)).has_value());
}

TEST(Geometry_Project, ProjectiveInvariance) {
  const CameraIntrinsics k;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> depth(0.2, 20.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(u(rng), u(rng), -depth(rng));
    const double s = scale(rng);
    const auto a = project(k, p);
    const auto b = project(k, s * p);
    ASSERT_TRUE(a && b);
    EXPECT_NEAR(a->u, b->u, 1e-9);
    EXPECT_NEAR(a->v, b->v, 1e-9);
  }
}

TEST(Geometry_Camera, ValidateRejectsBadIntrinsics) {
  CameraIntrinsics k;
  EXPECT_NO_THROW(k.validate());
  k.f_x = 0.0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  k = CameraIntrinsics{};
  k.c_x = k.h_x + 1.0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
}

TEST(Geometry_RotateYaw, ZeroIsIdentity) {
  expect_vec_near(rotate_yaw(Vec3(1.0, 2.0, 3.0), 0.0), Vec3(1.0, 2.0, 3.0), 0.0);
}

TEST(Geometry_RotateYaw, QuarterTurn) {
  expect_vec_near(rotate_yaw(Vec3(1.0, 0.0, 0.0), kPi / 2), Vec3(0.0, 0.0, -1.0), 1e-15);
}

TEST(Geometry_RotateYaw, PreservesNormAndHeight) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 v(u(rng), u(rng), u(rng));
    const double theta = u(rng);
    const Vec3 r = rotate_yaw(v, theta);
    EXPECT_NEAR(r.norm(), v.norm(), 1e-12);
    EXPECT_EQ(r.y(), v.y());
  }
}

TEST(Geometry_RotateYaw, AgreesWithPoseRotation) {
  // from_yaw builds the same rotation the VIO update applies.
  const Vec3 v(0.3, -1.2, 2.5);
  const double theta = 2.2;
  expect_vec_near(rotate_yaw(v, theta), Pose6DoF::from_yaw(theta, Vec3::Zero()).apply(v), 1e-12);
}
