#pragma once

#include "relloc/geometry.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace relloc {

enum class Axis { kX = 0, kY = 1, kZ = 2 };

/// Axis-aligned rectangle lying in the plane {p[normal] = offset}. The two
/// in-plane axes are taken in increasing order (e.g. y then z for kX).
struct Rect {
  Axis normal = Axis::kX;
  double offset = 0.0;
  double min_a = 0.0;
  double max_a = 0.0;
  double min_b = 0.0;
  double max_b = 0.0;

  /// Whether the closed segment p-q crosses the rectangle. Segments lying in
  /// the plane do not count.
  bool intersects(const Vec3& p, const Vec3& q) const;
};

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

class InfeasibleGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BuildingModel {
  std::string name;
  /// Vertical walls (normal kX or kZ).
  std::vector<Rect> walls;
  /// Horizontal slabs (normal kY), ordered by height.
  std::vector<Rect> floors;
  Box bounds;
  /// Heights of the walkable floor levels.
  std::vector<double> levels;
  /// Height above the level at which devices are carried.
  double device_height = 1.4;

  /// Throws std::invalid_argument on non-finite geometry or unordered floors.
  void validate() const;
  double device_y(std::size_t level) const { return levels.at(level) + device_height; }

  /// Inside the footprint (with margin) and at least `clearance` from any
  /// wall of the level containing p.
  bool walkable(const Vec3& p, double clearance = 0.25) const;
  /// Straight move p -> q stays walkable and crosses no wall.
  bool step_clear(const Vec3& p, const Vec3& q) const;
};

struct NlosResult {
  bool nlos = false;
  int obstruction_count = 0;
};

/// Counts wall and floor rectangles crossed by the segment a-b.
NlosResult is_nlos(const Vec3& a, const Vec3& b, const BuildingModel& building);

/// Open single floor, no walls.
BuildingModel make_open_building(double size_x = 40.0, double size_z = 30.0);
/// Corridor with rooms on both sides, `floors` levels 4 m apart separated by
/// slabs.
BuildingModel make_office_building(int floors = 1);
/// Per floor: open-plan area, a row of rooms along one side and two
/// meeting rooms in a corner.
BuildingModel make_open_office_building(int floors = 1);
/// Parking-garage-like level: long concrete walls with gaps plus pillars.
BuildingModel make_garage_building();
/// Looks a preset up by name ("open", "office", "open-office",
/// "three-floor", "garage").
BuildingModel make_building(const std::string& preset, int floors);

}  // namespace relloc
