#pragma once

#include "relloc/geometry.hpp"
#include "relloc/pf_core.hpp"
#include "relloc/world.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace relloc {

/// Estimated world pose of one node: position and the heading of its VIO
/// frame in the world.
struct PoseEstimate {
  Vec3 position = Vec3::Zero();
  double frame_yaw = 0.0;
};

/// Pose estimates per node at each requested time. A node may be missing at
/// a time when the method has no estimate yet.
struct PoseSeries {
  std::vector<double> times;
  std::vector<std::map<NodeId, PoseEstimate>> poses;
};

struct KnownStart {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

/// Dead reckoning from known start poses: the VIO deltas of each node are
/// rotated by its start heading and summed. Nodes without VIO (fixed tags)
/// stay at their start. `times` must be non-decreasing.
PoseSeries vio_only_baseline(const EventLog& log, const std::map<NodeId, KnownStart>& starts,
                             const std::vector<double>& times);

class NoAnchors : public std::invalid_argument {
 public:
  NoAnchors() : std::invalid_argument("anchor baseline needs at least one anchor") {}
};

struct AnchorBaselineParams {
  std::size_t particles = 1000;
  VioNoiseParams vio;
  RangeNoiseParams range;
  double vertical_extent = 6.0;
  double recovery_fraction = 0.02;
  ResamplePolicy resample;
  RougheningParams roughening;
  /// VIO is integrated in batches at this rate.
  double vio_rate = 10.0;
  std::uint64_t seed = 1;
};

/// Per-node global-frame particle filter driven by the node's VIO and its
/// ranges to anchors at known positions. Nodes that are anchors themselves
/// report their known position. Throws NoAnchors when `anchors` is empty.
PoseSeries anchor_oracle_baseline(const EventLog& log, const std::map<NodeId, Vec3>& anchors,
                                  const std::vector<double>& times,
                                  const AnchorBaselineParams& params);

/// Position of `target` relative to `display`, in the display's VIO frame as
/// the method believes it to be.
Vec3 relative_in_display_frame(const PoseEstimate& display, const PoseEstimate& target);

}  // namespace relloc
