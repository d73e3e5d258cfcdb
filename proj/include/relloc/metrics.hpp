#pragma once

#include "relloc/geometry.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace relloc {

/// Error split into a horizontal part (the frame's x-y plane) and a signed
/// z part; geom_3d^2 = eps_xy^2 + eps_z^2.
struct ErrorComponents {
  double geom_3d = 0.0;
  double eps_xy = 0.0;
  double eps_z = 0.0;
};

/// Components of est - truth in the frame both are expressed in.
ErrorComponents geometric_error_3d(const RelState& est, const RelState& truth);

/// Same split after rotating into the line-of-sight frame of `truth`: +z
/// points from the display toward the true target, so eps_z is the depth
/// error (positive when the estimate is too far) and eps_xy the error across
/// the view direction.
ErrorComponents line_of_sight_error(const Vec3& est, const Vec3& truth);

class DegenerateDepth : public std::domain_error {
 public:
  DegenerateDepth() : std::domain_error("estimated depth is zero") {}
};

/// (eps_xy / |dist + eps_z|) * (f_x / H_x). Throws DegenerateDepth when
/// |dist + eps_z| < 1e-6.
double display_proportional_error(double eps_xy, double eps_z, double dist,
                                  const CameraIntrinsics& camera);

struct ErrorSample {
  double time = 0.0;
  NodeId display = 0;
  NodeId target = 0;
  double geom_3d = 0.0;
  double eps_xy = 0.0;
  double eps_z = 0.0;
  double true_dist = 0.0;
  double dpe = 0.0;
  double pixel_err = 0.0;
};

/// Scores one estimate of the target's position relative to the display
/// (both in the display's VIO frame). Throws DegenerateDepth as above.
ErrorSample make_error_sample(double time, NodeId display, NodeId target, const Vec3& est,
                              const Vec3& truth, const CameraIntrinsics& camera);

/// Linear-interpolation percentile, q in [0, 100]. NaN for empty input.
double percentile(std::vector<double> values, double q);
double median(std::vector<double> values);

/// Spearman rank correlation with average ranks for ties. NaN when either
/// input is constant or fewer than two points are given.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct SeparationBucket {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double median_geom = 0.0;
  double median_dpe = 0.0;
};

/// Groups samples by true distance into [lo, lo + width) bins over
/// [0, max_dist); samples beyond max_dist are ignored. Empty bins are kept.
std::vector<SeparationBucket> bucket_by_separation(const std::vector<ErrorSample>& samples,
                                                   double width = 2.0, double max_dist = 28.0);

}  // namespace relloc
