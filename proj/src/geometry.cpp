#include "relloc/geometry.hpp"

#include <cmath>

namespace relloc {

double normalize_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2*pi.
  if (t >= kTwoPi) t = 0.0;
  return t;
}

double wrap_to_pi(double theta) {
  double t = normalize_angle(theta);
  return t > kPi ? t - kTwoPi : t;
}

Pose6DoF Pose6DoF::from_yaw(double yaw, const Vec3& translation) {
  Pose6DoF p;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  p.rotation << c, 0.0, s,
                0.0, 1.0, 0.0,
                -s, 0.0, c;
  p.translation = translation;
  return p;
}

Eigen::Matrix4d Pose6DoF::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool Pose6DoF::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  if (err.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

double Pose6DoF::yaw() const {
  // Inverse of from_yaw: R(0,2) = sin, R(0,0) = cos.
  return std::atan2(rotation(0, 2), rotation(0, 0));
}

void CameraIntrinsics::validate() const {
  if (!(f_x > 0.0 && f_y > 0.0 && h_x > 0.0 && h_y > 0.0)) {
    throw std::invalid_argument("camera focal lengths and resolution must be positive");
  }
  if (c_x < 0.0 || c_x > h_x || c_y < 0.0 || c_y > h_y) {
    throw std::invalid_argument("camera principal point outside the image");
  }
}

Pose6DoF compose(const Pose6DoF& a, const Pose6DoF& b) {
  Pose6DoF out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose6DoF invert(const Pose6DoF& p) {
  Pose6DoF out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Vec3 relative_position(const Pose6DoF& display, const Vec3& world_point) {
  return display.rotation.transpose() * (world_point - display.translation);
}

std::optional<PixelCoord> project(const CameraIntrinsics& k, const Vec3& p) {
  if (!(p.z() < 0.0)) return std::nullopt;
  const double w = -p.z();
  return PixelCoord{k.c_x + k.f_x * (p.x() / w), k.c_y - k.f_y * (p.y() / w)};
}

Vec3 rotate_yaw(const Vec3& v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {v.x() * c + v.z() * s, v.y(), v.z() * c - v.x() * s};
}

}  // namespace relloc
