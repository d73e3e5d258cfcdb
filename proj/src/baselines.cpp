#include "relloc/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace relloc {

Vec3 relative_in_display_frame(const PoseEstimate& display, const PoseEstimate& target) {
  return rotate_yaw(target.position - display.position, -display.frame_yaw);
}

PoseSeries vio_only_baseline(const EventLog& log, const std::map<NodeId, KnownStart>& starts,
                             const std::vector<double>& times) {
  PoseSeries out;
  out.times = times;
  std::map<NodeId, Vec3> odometer;
  for (const auto& [id, _] : starts) odometer[id] = Vec3::Zero();

  auto record = [&]() {
    std::map<NodeId, PoseEstimate> poses;
    for (const auto& [id, s] : starts) {
      poses[id] = PoseEstimate{s.position + rotate_yaw(odometer[id], s.yaw), s.yaw};
    }
    out.poses.push_back(std::move(poses));
  };

  std::size_t next = 0;
  for (const Event& e : log.events) {
    while (next < times.size() && times[next] < e.time) {
      record();
      ++next;
    }
    if (e.kind != EventKind::kVio) continue;
    const auto it = odometer.find(e.src);
    if (it != odometer.end()) it->second += Vec3(e.v[0], e.v[1], e.v[2]);
  }
  while (next < times.size()) {
    record();
    ++next;
  }
  return out;
}

namespace {

struct AnchorTrack {
  ParticleSet set;
  bool initialized = false;
  double last_resample = 0.0;
  VioDelta batch;
  double batch_start = 0.0;
};

}  // namespace

PoseSeries anchor_oracle_baseline(const EventLog& log, const std::map<NodeId, Vec3>& anchors,
                                  const std::vector<double>& times,
                                  const AnchorBaselineParams& params) {
  if (anchors.empty()) throw NoAnchors();
  PoseSeries out;
  out.times = times;
  std::map<NodeId, AnchorTrack> tracks;
  const double batch_period = 1.0 / params.vio_rate;

  auto flush = [&](AnchorTrack& tr) {
    if (tr.batch.dt <= 0.0) return;
    if (tr.initialized) propagate_vio(tr.set, tr.batch, params.vio);
    tr.batch = VioDelta{};
    tr.batch.dt = 0.0;
  };

  auto record = [&]() {
    std::map<NodeId, PoseEstimate> poses;
    for (const auto& [id, p] : anchors) poses[id] = PoseEstimate{p, 0.0};
    for (auto& [id, tr] : tracks) {
      if (!tr.initialized) continue;
      flush(tr);
      const PointEstimate e = estimate(tr.set);
      poses[id] = PoseEstimate{e.state.position(), e.state.theta()};
    }
    out.poses.push_back(std::move(poses));
  };

  std::size_t next = 0;
  for (const Event& e : log.events) {
    while (next < times.size() && times[next] < e.time) {
      record();
      ++next;
    }
    if (e.kind == EventKind::kVio) {
      if (anchors.count(e.src)) continue;
      AnchorTrack& tr = tracks[e.src];
      if (tr.batch.dt <= 0.0) {
        tr.batch.dt = 0.0;
        tr.batch_start = e.time - e.v[3];
      }
      tr.batch.dx += e.v[0];
      tr.batch.dy += e.v[1];
      tr.batch.dz += e.v[2];
      tr.batch.dt += e.v[3];
      tr.batch.timestamp = e.time;
      if (e.time - tr.batch_start >= batch_period - 1e-9) flush(tr);
      continue;
    }
    if (e.kind != EventKind::kRange) continue;
    const bool src_anchor = anchors.count(e.src) > 0;
    const bool dst_anchor = anchors.count(e.dst) > 0;
    if (src_anchor == dst_anchor) continue;
    const NodeId node = src_anchor ? e.dst : e.src;
    const Vec3 anchor = anchors.at(src_anchor ? e.src : e.dst);
    AnchorTrack& tr = tracks[node];
    const double z = e.v[0];
    if (!tr.initialized) {
      tr.set = init_from_first_range(params.particles, anchor, z, params.range,
                                     params.vertical_extent,
                                     derive_seed(params.seed, node));
      tr.initialized = true;
      tr.last_resample = e.time;
      tr.batch = VioDelta{};
      tr.batch.dt = 0.0;
      continue;
    }
    flush(tr);
    const RangeMeasurement m{e.src, e.dst, z, e.time};
    weight_range(tr.set, anchor, m, params.range);
    if (params.resample.due(tr.set, e.time, tr.last_resample)) {
      resample(tr.set, params.recovery_fraction,
               SphericalShell{anchor, z, params.range.half_window(), params.vertical_extent});
      roughen(tr.set, params.roughening);
      tr.last_resample = e.time;
    }
  }
  while (next < times.size()) {
    record();
    ++next;
  }
  return out;
}

}  // namespace relloc
