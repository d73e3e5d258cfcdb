#include "relloc/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>

namespace relloc {
namespace {

constexpr double kGridStep = 0.5;

/// Heading of a device facing along horizontal direction (dx, dz).
double facing_yaw(double dx, double dz) { return std::atan2(-dx, -dz); }

std::size_t sample_count(double duration, double hz) {
  if (!(duration > 0.0) || !(hz > 0.0)) {
    throw std::invalid_argument("trajectory duration and rate must be positive");
  }
  return static_cast<std::size_t>(std::llround(duration * hz));
}

/// Walkability grid for one level, used for waypoint routing.
class NavGrid {
 public:
  NavGrid(const BuildingModel& b, std::size_t level) : building_(b), y_(b.device_y(level)) {
    nx_ = static_cast<int>((b.bounds.max.x() - b.bounds.min.x()) / kGridStep);
    nz_ = static_cast<int>((b.bounds.max.z() - b.bounds.min.z()) / kGridStep);
    free_.assign(static_cast<std::size_t>(nx_ * nz_), false);
    for (int i = 0; i < nx_; ++i) {
      for (int j = 0; j < nz_; ++j) free_[index(i, j)] = building_.walkable(center(i, j));
    }
  }

  Vec3 center(int i, int j) const {
    return Vec3(building_.bounds.min.x() + (i + 0.5) * kGridStep, y_,
                building_.bounds.min.z() + (j + 0.5) * kGridStep);
  }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i * nz_ + j); }
  bool free(int i, int j) const {
    return i >= 0 && j >= 0 && i < nx_ && j < nz_ && free_[index(i, j)];
  }
  int nx() const { return nx_; }
  int nz() const { return nz_; }

  std::vector<std::pair<int, int>> free_cells() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < nx_; ++i) {
      for (int j = 0; j < nz_; ++j) {
        if (free_[index(i, j)]) out.emplace_back(i, j);
      }
    }
    return out;
  }

  /// Shortest 8-connected path between free cells; empty when unreachable.
  std::vector<Vec3> route(std::pair<int, int> from, std::pair<int, int> to) const {
    const std::size_t n = free_.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> prev(n, n);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> open;
    const std::size_t src = index(from.first, from.second);
    const std::size_t dst = index(to.first, to.second);
    dist[src] = 0.0;
    open.emplace(0.0, src);
    while (!open.empty()) {
      const auto [d, u] = open.top();
      open.pop();
      if (d > dist[u]) continue;
      if (u == dst) break;
      const int ui = static_cast<int>(u) / nz_;
      const int uj = static_cast<int>(u) % nz_;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const int vi = ui + di;
          const int vj = uj + dj;
          if (!free(vi, vj)) continue;
          if (!edge_clear(center(ui, uj), center(vi, vj))) continue;
          const std::size_t v = index(vi, vj);
          const double nd = d + kGridStep * std::hypot(di, dj);
          if (nd < dist[v]) {
            dist[v] = nd;
            prev[v] = u;
            open.emplace(nd, v);
          }
        }
      }
    }
    if (!std::isfinite(dist[dst])) return {};
    std::vector<Vec3> path;
    for (std::size_t v = dst; v != n; v = prev[v]) {
      path.push_back(center(static_cast<int>(v) / nz_, static_cast<int>(v) % nz_));
      if (v == src) break;
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

 private:
  /// Straight move between cell centres keeps the wall clearance throughout,
  /// so diagonal steps cannot clip a door jamb.
  bool edge_clear(const Vec3& a, const Vec3& b) const {
    if (!building_.step_clear(a, b)) return false;
    for (double f : {0.25, 0.5, 0.75}) {
      if (!building_.walkable(a + f * (b - a))) return false;
    }
    return true;
  }

  const BuildingModel& building_;
  double y_;
  int nx_ = 0;
  int nz_ = 0;
  std::vector<bool> free_;
};

Trajectory make_empty(std::size_t n, double hz) {
  Trajectory tr;
  tr.hz = hz;
  tr.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) tr.samples[k].time = static_cast<double>(k) / hz;
  return tr;
}

/// Random walk with heading diffusion, voluntary stops and wall rejection.
/// Stress mode adds fast speeds, frequent short stops and small jumps.
Trajectory random_walk(const BuildingModel& b, double duration, double hz, std::size_t level,
                       Rng& rng, const MobilityParams& mp, const Vec3& start, bool stress) {
  const std::size_t n = sample_count(duration, hz);
  const double dt = 1.0 / hz;
  Trajectory tr = make_empty(n, hz);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double v_cap = stress ? 2.0 * mp.v_max : mp.v_max;
  const double stop_interval = stress ? 6.0 : mp.stop_interval;
  const double stop_min = stress ? 0.3 : mp.stop_min;
  const double stop_max = stress ? 1.5 : mp.stop_max;
  const double diffusion = stress ? 1.5 : mp.heading_diffusion;
  const double jump_interval = 5.0;
  const double jump_height = 0.25;
  const double jump_duration = 0.4;

  auto draw_speed = [&]() {
    const double lo = stress ? 0.5 * v_cap : mp.min_speed;
    const double hi = stress ? 0.8 * v_cap : mp.max_speed;
    return std::min(lo + (hi - lo) * unit(rng), v_cap);
  };

  Vec3 ground = start;
  double heading = kTwoPi * unit(rng);
  double speed = draw_speed();
  double next_speed_change = 3.0;
  double pause_left = 0.0;
  double jump_age = -1.0;
  double yaw = facing_yaw(std::sin(heading), std::cos(heading));
  tr.samples[0].position = ground;
  tr.samples[0].yaw = yaw;

  for (std::size_t k = 1; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (stress && t >= next_speed_change) {
      speed = draw_speed();
      next_speed_change = t + 3.0;
    }
    if (pause_left > 0.0) {
      pause_left -= dt;
    } else if (unit(rng) < dt / stop_interval) {
      pause_left = stop_min + (stop_max - stop_min) * unit(rng);
    } else {
      heading += diffusion * std::sqrt(dt) * gauss(rng);
      Vec3 step(std::sin(heading), 0.0, std::cos(heading));
      Vec3 next = ground + speed * dt * step;
      if (!b.step_clear(ground, next)) {
        bool found = false;
        for (int attempt = 0; attempt < 24 && !found; ++attempt) {
          const double h = kTwoPi * unit(rng);
          const Vec3 s(std::sin(h), 0.0, std::cos(h));
          const Vec3 candidate = ground + speed * dt * s;
          if (b.step_clear(ground, candidate)) {
            heading = h;
            step = s;
            next = candidate;
            found = true;
          }
        }
        if (!found) next = ground;
      }
      if (next != ground) yaw = facing_yaw(step.x(), step.z());
      ground = next;
    }
    Vec3 p = ground;
    if (stress) {
      if (jump_age < 0.0 && unit(rng) < dt / jump_interval) jump_age = 0.0;
      if (jump_age >= 0.0) {
        jump_age += dt;
        if (jump_age >= jump_duration) {
          jump_age = -1.0;
        } else {
          p.y() += jump_height * std::sin(kPi * jump_age / jump_duration);
        }
      }
    }
    tr.samples[k].position = p;
    tr.samples[k].yaw = yaw;
  }
  (void)level;
  return tr;
}

Trajectory waypoint_walk(const BuildingModel& b, double duration, double hz, std::size_t level,
                         Rng& rng, const MobilityParams& mp) {
  const std::size_t n = sample_count(duration, hz);
  const double dt = 1.0 / hz;
  const NavGrid grid(b, level);
  const auto cells = grid.free_cells();
  if (cells.empty()) throw InfeasibleGeometry("no walkable cell on level " + std::to_string(level));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);

  Trajectory tr = make_empty(n, hz);
  std::pair<int, int> cell = cells[pick(rng)];
  Vec3 pos = grid.center(cell.first, cell.second);
  double yaw = kTwoPi * unit(rng) - kPi;
  std::vector<Vec3> path;
  std::size_t path_index = 0;
  std::pair<int, int> goal = cell;
  double pause_left = 0.0;
  double speed = mp.min_speed + (mp.max_speed - mp.min_speed) * unit(rng);

  auto plan = [&]() {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const auto candidate = cells[pick(rng)];
      if (candidate == cell) continue;
      auto route = grid.route(cell, candidate);
      if (route.size() >= 2) {
        path = std::move(route);
        path_index = 1;
        goal = candidate;
        speed = mp.min_speed + (mp.max_speed - mp.min_speed) * unit(rng);
        return;
      }
    }
    path.clear();
    pause_left = 1.0;
  };

  tr.samples[0].position = pos;
  tr.samples[0].yaw = yaw;
  plan();
  for (std::size_t k = 1; k < n; ++k) {
    if (pause_left > 0.0) {
      pause_left -= dt;
      if (pause_left <= 0.0) plan();
    } else if (path_index < path.size()) {
      double budget = speed * dt;
      while (budget > 0.0 && path_index < path.size()) {
        const Vec3 to = path[path_index] - pos;
        const double d = to.norm();
        if (d <= budget) {
          pos = path[path_index];
          ++path_index;
          budget -= d;
        } else {
          pos += to * (budget / d);
          budget = 0.0;
        }
        if (d > 1e-9) yaw = facing_yaw(to.x(), to.z());
      }
      if (path_index >= path.size()) {
        cell = goal;
        pause_left = 1.0 + 4.0 * unit(rng);
      }
    } else {
      plan();
    }
    tr.samples[k].position = pos;
    tr.samples[k].yaw = yaw;
  }
  return tr;
}

}  // namespace

const char* to_string(Mobility mode) {
  switch (mode) {
    case Mobility::kRandomWalk:
      return "random_walk";
    case Mobility::kWaypoint:
      return "waypoint";
    case Mobility::kPairs:
      return "pairs";
    case Mobility::kStress:
      return "stress";
    case Mobility::kStatic:
      return "static";
  }
  return "?";
}

Mobility parse_mobility(const std::string& name) {
  for (Mobility m : {Mobility::kRandomWalk, Mobility::kWaypoint, Mobility::kPairs,
                     Mobility::kStress, Mobility::kStatic}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown mobility mode '" + name + "'");
}

std::size_t Trajectory::tick_of(double t) const {
  if (samples.empty()) throw std::out_of_range("empty trajectory");
  if (!(t > 0.0)) return 0;
  // A small tolerance keeps exact tick times on their own tick.
  const auto k = static_cast<std::size_t>(std::floor(t * hz + 1e-9));
  return std::min(k, samples.size() - 1);
}

double Trajectory::max_speed() const {
  double best = 0.0;
  for (std::size_t k = 1; k < samples.size(); ++k) {
    best = std::max(best, (samples[k].position - samples[k - 1].position).norm() * hz);
  }
  return best;
}

Vec3 sample_walkable_point(const BuildingModel& building, std::size_t level, Rng& rng) {
  if (level >= building.levels.size()) {
    throw InfeasibleGeometry("level " + std::to_string(level) + " does not exist in '" +
                             building.name + "'");
  }
  std::uniform_real_distribution<double> ux(building.bounds.min.x(), building.bounds.max.x());
  std::uniform_real_distribution<double> uz(building.bounds.min.z(), building.bounds.max.z());
  const double y = building.device_y(level);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Vec3 p(ux(rng), y, uz(rng));
    if (building.walkable(p)) return p;
  }
  throw InfeasibleGeometry("no walkable point on level " + std::to_string(level) + " of '" +
                           building.name + "'");
}

Trajectory gen_trajectory(const BuildingModel& building, Mobility mode, double duration,
                          double hz, std::size_t level, std::uint64_t seed,
                          const MobilityParams& params, std::optional<Vec3> start) {
  Rng rng(seed);
  if (level >= building.levels.size()) {
    throw InfeasibleGeometry("level " + std::to_string(level) + " does not exist in '" +
                             building.name + "'");
  }
  switch (mode) {
    case Mobility::kStatic: {
      const Vec3 p = start ? *start : sample_walkable_point(building, level, rng);
      return static_trajectory(p, 0.0, duration, hz);
    }
    case Mobility::kWaypoint:
      return waypoint_walk(building, duration, hz, level, rng, params);
    case Mobility::kRandomWalk:
    case Mobility::kPairs:
    case Mobility::kStress: {
      const Vec3 p = start ? *start : sample_walkable_point(building, level, rng);
      if (!building.walkable(p)) throw InfeasibleGeometry("start position is not walkable");
      return random_walk(building, duration, hz, level, rng, params, p, mode == Mobility::kStress);
    }
  }
  throw std::invalid_argument("unhandled mobility mode");
}

Trajectory follow(const Trajectory& leader, double lag) {
  Trajectory tr;
  tr.hz = leader.hz;
  tr.samples.resize(leader.samples.size());
  const auto lag_ticks = static_cast<std::size_t>(std::llround(std::max(lag, 0.0) * leader.hz));
  for (std::size_t k = 0; k < leader.samples.size(); ++k) {
    const std::size_t src = k > lag_ticks ? k - lag_ticks : 0;
    tr.samples[k] = leader.samples[src];
    tr.samples[k].time = leader.samples[k].time;
  }
  return tr;
}

Trajectory static_trajectory(const Vec3& position, double yaw, double duration, double hz) {
  Trajectory tr = make_empty(sample_count(duration, hz), hz);
  for (auto& s : tr.samples) {
    s.position = position;
    s.yaw = yaw;
  }
  return tr;
}

}  // namespace relloc
