#pragma once

#include "relloc/building.hpp"
#include "relloc/geometry.hpp"
#include "relloc/pf_core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace relloc {

enum class Mobility { kRandomWalk, kWaypoint, kPairs, kStress, kStatic };
const char* to_string(Mobility mode);
/// Throws std::invalid_argument for unknown names.
Mobility parse_mobility(const std::string& name);

struct TrajectorySample {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  /// Device heading about +y (see Pose6DoF::from_yaw).
  double yaw = 0.0;
};

/// Ground-truth path sampled on a fixed tick grid.
struct Trajectory {
  NodeId node = 0;
  double hz = 60.0;
  std::vector<TrajectorySample> samples;

  std::size_t size() const { return samples.size(); }
  /// Index of the last tick at or before t (clamped to the valid range).
  std::size_t tick_of(double t) const;
  Vec3 position_at(double t) const { return samples[tick_of(t)].position; }
  double yaw_at(double t) const { return samples[tick_of(t)].yaw; }
  /// Largest per-tick displacement divided by the tick length.
  double max_speed() const;
};

struct MobilityParams {
  /// Walking speed ceiling; stress mode uses twice this.
  double v_max = 3.0;
  double min_speed = 0.8;
  double max_speed = 1.4;
  /// Mean time between voluntary stops, and their duration range.
  double stop_interval = 30.0;
  double stop_min = 2.0;
  double stop_max = 8.0;
  /// Heading diffusion in rad / sqrt(s).
  double heading_diffusion = 0.5;
};

/// Uniformly random walkable point on the given level. Throws
/// InfeasibleGeometry when none can be found.
Vec3 sample_walkable_point(const BuildingModel& building, std::size_t level, Rng& rng);

/// Generates a trajectory of round(duration * hz) samples. kPairs produces the
/// leader; use follow() for its partner. Throws InfeasibleGeometry when the
/// mode cannot be realised in the building.
Trajectory gen_trajectory(const BuildingModel& building, Mobility mode, double duration,
                          double hz, std::size_t level, std::uint64_t seed,
                          const MobilityParams& params = {},
                          std::optional<Vec3> start = std::nullopt);

/// Same path as `leader`, `lag` seconds behind (holding the start pose until
/// then).
Trajectory follow(const Trajectory& leader, double lag);

/// Constant pose for a fixed tag.
Trajectory static_trajectory(const Vec3& position, double yaw, double duration, double hz);

}  // namespace relloc
