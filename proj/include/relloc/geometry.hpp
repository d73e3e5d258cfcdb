#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>

namespace relloc {

using NodeId = std::uint32_t;

// Display frame: +x right, +y up (gravity aligned), +z out of the display
// toward the viewer. The camera looks along -z.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kPi = 3.141592653589793238462643383279;

/// Wraps an angle into [0, 2*pi).
double normalize_angle(double theta);

/// Wraps an angle into (-pi, pi].
double wrap_to_pi(double theta);

/// Rigid transform. Applying the pose maps a point from the local frame into
/// the parent frame: p_parent = rotation * p_local + translation.
struct Pose6DoF {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose6DoF identity() { return {}; }
  /// Pure yaw about +y followed by a translation.
  static Pose6DoF from_yaw(double yaw, const Vec3& translation);

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Eigen::Matrix4d matrix() const;
  /// Orthonormal with det = +1, within `tol`.
  bool is_valid(double tol = 1e-9) const;
  /// Heading about +y, assuming the rotation is gravity aligned.
  double yaw() const;
};

struct CameraIntrinsics {
  double f_x = 1440.0;
  double f_y = 1440.0;
  double c_x = 960.0;
  double c_y = 540.0;
  double h_x = 1920.0;
  double h_y = 1080.0;

  /// Throws std::invalid_argument when the intrinsics are not usable.
  void validate() const;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Target position in the display's VIO origin frame plus the yaw offset
/// between the target's VIO origin orientation and the display's.
class RelState {
 public:
  RelState() = default;
  RelState(double x, double y, double z, double theta)
      : x(x), y(y), z(z), theta_(normalize_angle(theta)) {}
  RelState(const Vec3& p, double theta) : RelState(p.x(), p.y(), p.z(), theta) {}

  double theta() const { return theta_; }
  void set_theta(double t) { theta_ = normalize_angle(t); }
  Vec3 position() const { return {x, y, z}; }
  void set_position(const Vec3& p) {
    x = p.x();
    y = p.y();
    z = p.z();
  }

  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

 private:
  double theta_ = 0.0;
};

/// Matrix product a * b: pose b expressed in frame a.
Pose6DoF compose(const Pose6DoF& a, const Pose6DoF& b);
Pose6DoF invert(const Pose6DoF& p);

/// world_point expressed in the display frame (display^-1 * point).
Vec3 relative_position(const Pose6DoF& display, const Vec3& world_point);

/// Pinhole projection of a point already in the display frame. Returns
/// nullopt when the point is on or behind the image plane (z >= 0), i.e. it
/// cannot be drawn. v grows downward from the top edge.
std::optional<PixelCoord> project(const CameraIntrinsics& k, const Vec3& point_in_display_frame);

/// Yaw rotation about +y in the form used by the VIO update:
/// x' = x cos + z sin, y' = y, z' = z cos - x sin.
Vec3 rotate_yaw(const Vec3& v, double theta);

}  // namespace relloc
