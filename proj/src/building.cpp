#include "relloc/building.hpp"

#include <algorithm>
#include <cmath>

namespace relloc {
namespace {

int axis_index(Axis a) { return static_cast<int>(a); }

/// In-plane axes (in increasing order) for a plane with the given normal.
std::pair<int, int> plane_axes(Axis normal) {
  switch (normal) {
    case Axis::kX:
      return {1, 2};
    case Axis::kY:
      return {0, 2};
    case Axis::kZ:
      return {0, 1};
  }
  return {0, 1};
}

bool lexicographic_less(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

Rect wall_x(double x, double z0, double z1, double y0, double y1) {
  return Rect{Axis::kX, x, y0, y1, z0, z1};
}

Rect wall_z(double z, double x0, double x1, double y0, double y1) {
  return Rect{Axis::kZ, z, x0, x1, y0, y1};
}

Rect slab(double y, double x0, double x1, double z0, double z1) {
  return Rect{Axis::kY, y, x0, x1, z0, z1};
}

/// Square pillar as four walls.
void add_pillar(std::vector<Rect>& walls, double cx, double cz, double half, double y0, double y1) {
  walls.push_back(wall_x(cx - half, cz - half, cz + half, y0, y1));
  walls.push_back(wall_x(cx + half, cz - half, cz + half, y0, y1));
  walls.push_back(wall_z(cz - half, cx - half, cx + half, y0, y1));
  walls.push_back(wall_z(cz + half, cx - half, cx + half, y0, y1));
}

/// 2-D distance from (px, pz) to the footprint segment of a vertical wall.
double footprint_distance(const Rect& w, double px, double pz) {
  if (w.normal == Axis::kX) {
    const double cz = std::clamp(pz, w.min_b, w.max_b);
    return std::hypot(px - w.offset, pz - cz);
  }
  const double cx = std::clamp(px, w.min_a, w.max_a);
  return std::hypot(px - cx, pz - w.offset);
}

bool finite_rect(const Rect& r) {
  return std::isfinite(r.offset) && std::isfinite(r.min_a) && std::isfinite(r.max_a) &&
         std::isfinite(r.min_b) && std::isfinite(r.max_b) && r.min_a <= r.max_a &&
         r.min_b <= r.max_b;
}

}  // namespace

bool Rect::intersects(const Vec3& p, const Vec3& q) const {
  const int n = axis_index(normal);
  const double denom = q[n] - p[n];
  if (denom == 0.0) return false;
  const double t = (offset - p[n]) / denom;
  if (t < 0.0 || t > 1.0) return false;
  const auto [ia, ib] = plane_axes(normal);
  const double a = p[ia] + t * (q[ia] - p[ia]);
  const double b = p[ib] + t * (q[ib] - p[ib]);
  return a >= min_a && a <= max_a && b >= min_b && b <= max_b;
}

void BuildingModel::validate() const {
  for (const Rect& w : walls) {
    if (!finite_rect(w) || w.normal == Axis::kY) {
      throw std::invalid_argument("building '" + name + "': malformed wall");
    }
  }
  for (std::size_t i = 0; i < floors.size(); ++i) {
    if (!finite_rect(floors[i]) || floors[i].normal != Axis::kY) {
      throw std::invalid_argument("building '" + name + "': malformed floor slab");
    }
    if (i > 0 && floors[i].offset < floors[i - 1].offset) {
      throw std::invalid_argument("building '" + name + "': floor slabs not ordered by height");
    }
  }
  if (levels.empty()) throw std::invalid_argument("building '" + name + "': no walkable level");
  if (!bounds.min.allFinite() || !bounds.max.allFinite() ||
      (bounds.min.array() >= bounds.max.array()).any()) {
    throw std::invalid_argument("building '" + name + "': empty bounds");
  }
}

bool BuildingModel::walkable(const Vec3& p, double clearance) const {
  constexpr double kMargin = 0.3;
  if (p.x() < bounds.min.x() + kMargin || p.x() > bounds.max.x() - kMargin) return false;
  if (p.z() < bounds.min.z() + kMargin || p.z() > bounds.max.z() - kMargin) return false;
  for (const Rect& w : walls) {
    // Only walls spanning the device height matter; the vertical span is the
    // a axis for kX walls and the b axis for kZ walls.
    const double y0 = w.normal == Axis::kX ? w.min_a : w.min_b;
    const double y1 = w.normal == Axis::kX ? w.max_a : w.max_b;
    if (p.y() < y0 || p.y() > y1) continue;
    if (footprint_distance(w, p.x(), p.z()) < clearance) return false;
  }
  return true;
}

bool BuildingModel::step_clear(const Vec3& p, const Vec3& q) const {
  if (!walkable(q)) return false;
  for (const Rect& w : walls) {
    if (w.intersects(p, q)) return false;
  }
  return true;
}

NlosResult is_nlos(const Vec3& a, const Vec3& b, const BuildingModel& building) {
  // A canonical endpoint order makes the count exactly symmetric.
  const bool swap = lexicographic_less(b, a);
  const Vec3& p = swap ? b : a;
  const Vec3& q = swap ? a : b;
  NlosResult out;
  for (const Rect& w : building.walls) {
    if (w.intersects(p, q)) ++out.obstruction_count;
  }
  for (const Rect& f : building.floors) {
    if (f.intersects(p, q)) ++out.obstruction_count;
  }
  out.nlos = out.obstruction_count > 0;
  return out;
}

BuildingModel make_open_building(double size_x, double size_z) {
  BuildingModel b;
  b.name = "open";
  b.bounds = Box{Vec3(0.0, 0.0, 0.0), Vec3(size_x, 4.0, size_z)};
  b.levels = {0.0};
  return b;
}

BuildingModel make_office_building(int floors) {
  if (floors < 1) throw std::invalid_argument("office building needs at least one floor");
  constexpr double kSizeX = 40.0;
  constexpr double kSizeZ = 24.0;
  constexpr double kStorey = 4.0;
  constexpr double kWallHeight = 3.5;
  constexpr double kRoomWidth = 8.0;
  constexpr double kDoor = 1.2;
  constexpr double kCorridorLo = 10.0;
  constexpr double kCorridorHi = 14.0;

  BuildingModel b;
  b.name = floors == 1 ? "office" : "office-" + std::to_string(floors) + "f";
  b.bounds = Box{Vec3(0.0, 0.0, 0.0), Vec3(kSizeX, kStorey * floors, kSizeZ)};
  for (int level = 0; level < floors; ++level) {
    const double y0 = kStorey * level;
    const double y1 = y0 + kWallHeight;
    b.levels.push_back(y0);
    // Corridor walls, with a door centred on each room.
    for (double corridor_z : {kCorridorLo, kCorridorHi}) {
      double x = 0.0;
      for (double room = 0.0; room < kSizeX; room += kRoomWidth) {
        const double door_lo = room + 0.5 * (kRoomWidth - kDoor);
        b.walls.push_back(wall_z(corridor_z, x, door_lo, y0, y1));
        x = door_lo + kDoor;
      }
      b.walls.push_back(wall_z(corridor_z, x, kSizeX, y0, y1));
    }
    // Room dividers.
    for (double x = kRoomWidth; x < kSizeX; x += kRoomWidth) {
      b.walls.push_back(wall_x(x, 0.0, kCorridorLo, y0, y1));
      b.walls.push_back(wall_x(x, kCorridorHi, kSizeZ, y0, y1));
    }
    if (level > 0) b.floors.push_back(slab(y0, 0.0, kSizeX, 0.0, kSizeZ));
  }
  b.validate();
  return b;
}

BuildingModel make_open_office_building(int floors) {
  if (floors < 1) throw std::invalid_argument("open-office building needs at least one floor");
  constexpr double kSizeX = 40.0;
  constexpr double kSizeZ = 24.0;
  constexpr double kStorey = 4.0;
  constexpr double kWallHeight = 3.5;
  constexpr double kRoomWidth = 8.0;
  constexpr double kRoomDepth = 8.0;
  constexpr double kDoor = 1.2;
  constexpr double kMeetX = 28.0;
  constexpr double kMeetZ = 7.0;

  BuildingModel b;
  b.name = floors == 1 ? "open-office" : "open-office-" + std::to_string(floors) + "f";
  b.bounds = Box{Vec3(0.0, 0.0, 0.0), Vec3(kSizeX, kStorey * floors, kSizeZ)};
  for (int level = 0; level < floors; ++level) {
    const double y0 = kStorey * level;
    const double y1 = y0 + kWallHeight;
    b.levels.push_back(y0);
    // A row of rooms along the far wall, doors facing the open-plan area.
    const double front = kSizeZ - kRoomDepth;
    double x = 0.0;
    for (double room = 0.0; room < kSizeX; room += kRoomWidth) {
      const double door_lo = room + 0.5 * (kRoomWidth - kDoor);
      b.walls.push_back(wall_z(front, x, door_lo, y0, y1));
      x = door_lo + kDoor;
      if (room > 0.0) b.walls.push_back(wall_x(room, front, kSizeZ, y0, y1));
    }
    b.walls.push_back(wall_z(front, x, kSizeX, y0, y1));
    // Two meeting rooms in one corner of the open area.
    b.walls.push_back(wall_x(kMeetX, 0.0, kMeetZ, y0, y1));
    b.walls.push_back(wall_x(34.0, 0.0, kMeetZ, y0, y1));
    b.walls.push_back(wall_z(kMeetZ, kMeetX, 30.4, y0, y1));
    b.walls.push_back(wall_z(kMeetZ, 31.6, 36.4, y0, y1));
    b.walls.push_back(wall_z(kMeetZ, 37.6, kSizeX, y0, y1));
    if (level > 0) b.floors.push_back(slab(y0, 0.0, kSizeX, 0.0, kSizeZ));
  }
  b.validate();
  return b;
}

BuildingModel make_garage_building() {
  constexpr double kSizeX = 50.0;
  constexpr double kSizeZ = 40.0;
  constexpr double kHeight = 3.0;
  BuildingModel b;
  b.name = "garage";
  b.bounds = Box{Vec3(0.0, 0.0, 0.0), Vec3(kSizeX, kHeight, kSizeZ)};
  b.levels = {0.0};
  // Long concrete walls with a drive-through gap in the middle.
  for (double x : {12.5, 25.0, 37.5}) {
    b.walls.push_back(wall_x(x, 4.0, 18.0, 0.0, kHeight));
    b.walls.push_back(wall_x(x, 22.0, 36.0, 0.0, kHeight));
  }
  // Pillar grid between the walls.
  for (double x = 6.25; x < kSizeX; x += 12.5) {
    for (double z = 8.0; z < kSizeZ; z += 8.0) add_pillar(b.walls, x, z, 0.3, 0.0, kHeight);
  }
  b.validate();
  return b;
}

BuildingModel make_building(const std::string& preset, int floors) {
  if (preset == "open") return make_open_building();
  if (preset == "office") return make_office_building(std::max(floors, 1));
  if (preset == "three-floor") return make_open_office_building(3);
  if (preset == "garage") return make_garage_building();
  if (preset == "open-office") return make_open_office_building(std::max(floors, 1));
  throw std::invalid_argument("unknown building preset '" + preset + "'");
}

}  // namespace relloc
