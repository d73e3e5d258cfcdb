#include "relloc/world.hpp"

#include "relloc/peer_message.hpp"
#include "relloc/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <memory>
#include <ostream>
#include <sstream>
#include <tuple>

namespace relloc {
namespace {

// Sub-stream identifiers for derive_seed.
constexpr std::uint64_t kStreamRange = 1;
constexpr std::uint64_t kStreamTransport = 2;
constexpr std::uint64_t kStreamProtocol = 3;
constexpr std::uint64_t kStreamTrajectory = 100;
constexpr std::uint64_t kStreamTagPlacement = 200;
constexpr std::uint64_t kStreamVio = 300;
constexpr std::uint64_t kStreamFilter = 400;

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

EventKind from_radio(RadioEventKind k) {
  switch (k) {
    case RadioEventKind::kAdvertisement:
      return EventKind::kAdvertisement;
    case RadioEventKind::kDiscovery:
      return EventKind::kDiscovery;
    case RadioEventKind::kTwrStart:
      return EventKind::kTwrStart;
    case RadioEventKind::kTwrSuccess:
      return EventKind::kTwrSuccess;
    case RadioEventKind::kTwrCollision:
      return EventKind::kTwrCollision;
    case RadioEventKind::kEviction:
      return EventKind::kEviction;
    case RadioEventKind::kWake:
      return EventKind::kWake;
    case RadioEventKind::kSleep:
      return EventKind::kSleep;
  }
  return EventKind::kAdvertisement;
}

class TrajectoryMedium : public CollisionDomainView {
 public:
  TrajectoryMedium(const std::vector<Trajectory>& trajectories, double radius)
      : trajectories_(trajectories), radius_(radius) {}

  Vec3 position(NodeId node, double time) const override {
    return trajectories_.at(node - 1).position_at(time);
  }
  double radio_radius() const override { return radius_; }

 private:
  const std::vector<Trajectory>& trajectories_;
  double radius_;
};

struct UserState {
  std::unique_ptr<VioSensor> sensor;
  std::unique_ptr<JointFilter> filter;
  VioDelta batch;
  Vec3 odometer = Vec3::Zero();
  std::uint64_t next_sequence = 1;
};

/// Accumulates the thread CPU time of a scope into `sink`.
class CpuTimer {
 public:
  explicit CpuTimer(double& sink) : sink_(sink), start_(thread_cpu_seconds()) {}
  ~CpuTimer() { sink_ += thread_cpu_seconds() - start_; }
  CpuTimer(const CpuTimer&) = delete;
  CpuTimer& operator=(const CpuTimer&) = delete;

 private:
  double& sink_;
  double start_;
};

void account_link(LinkUsage& link, double time, std::size_t bytes) {
  ++link.messages;
  link.bytes += bytes;
  link.max_message_bytes = std::max(link.max_message_bytes, bytes);
  const auto second = static_cast<std::int64_t>(std::floor(time + 1e-9));
  if (second != link.window_second) {
    link.window_second = second;
    link.window_bytes = 0;
  }
  link.window_bytes += bytes;
  link.peak_bits_per_second =
      std::max(link.peak_bits_per_second, 8.0 * static_cast<double>(link.window_bytes));
}

}  // namespace

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kVio:
      return "vio";
    case EventKind::kMsgSend:
      return "msg_send";
    case EventKind::kMsgDeliver:
      return "msg_deliver";
    case EventKind::kMsgDrop:
      return "msg_drop";
    case EventKind::kAdvertisement:
      return "advertisement";
    case EventKind::kDiscovery:
      return "discovery";
    case EventKind::kWake:
      return "wake";
    case EventKind::kSleep:
      return "sleep";
    case EventKind::kEviction:
      return "eviction";
    case EventKind::kTwrStart:
      return "twr_start";
    case EventKind::kTwrSuccess:
      return "twr_success";
    case EventKind::kTwrCollision:
      return "twr_collision";
    case EventKind::kRange:
      return "range";
  }
  return "?";
}

void EventLog::write_csv(std::ostream& out) const {
  out << "time_s,kind,src,dst,seq,v0,v1,v2,v3\n";
  char buf[256];
  for (const Event& e : events) {
    std::snprintf(buf, sizeof(buf), "%.17g,%s,%u,%u,%llu,%.17g,%.17g,%.17g,%.17g\n", e.time,
                  to_string(e.kind), static_cast<unsigned>(e.src), static_cast<unsigned>(e.dst),
                  static_cast<unsigned long long>(e.seq), e.v[0], e.v[1], e.v[2], e.v[3]);
    out << buf;
  }
}

std::string EventLog::to_csv() const {
  std::ostringstream ss;
  write_csv(ss);
  return ss.str();
}

std::vector<Trajectory> build_trajectories(const ScenarioConfig& cfg, const BuildingModel& building,
                                           std::vector<NodeInfo>& nodes) {
  std::vector<Trajectory> out;
  nodes.clear();
  const std::size_t levels = building.levels.size();
  for (std::size_t i = 0; i < cfg.users; ++i) {
    const NodeId id = static_cast<NodeId>(i + 1);
    const std::size_t level = cfg.user_levels.empty() ? i % levels : cfg.user_levels[i];
    Trajectory tr;
    if (cfg.mobility == Mobility::kPairs && i % 2 == 1) {
      // Partner of the previous user.
      tr = follow(out.back(), cfg.pair_lag);
    } else {
      tr = gen_trajectory(building, cfg.mobility, cfg.duration, cfg.tick_hz, level,
                          derive_seed(cfg.seed, kStreamTrajectory + id), cfg.mobility_params);
    }
    tr.node = id;
    nodes.push_back(NodeInfo{id, true, level, tr.samples.front().position, tr.samples.front().yaw});
    out.push_back(std::move(tr));
  }
  for (std::size_t j = 0; j < cfg.tags; ++j) {
    const NodeId id = static_cast<NodeId>(cfg.users + j + 1);
    const std::size_t level = j % levels;
    Rng rng(derive_seed(cfg.seed, kStreamTagPlacement + id));
    const Vec3 p = sample_walkable_point(building, level, rng);
    Trajectory tr = static_trajectory(p, 0.0, cfg.duration, cfg.tick_hz);
    tr.node = id;
    nodes.push_back(NodeInfo{id, false, level, p, 0.0});
    out.push_back(std::move(tr));
  }
  return out;
}

WorldRun run_world(const ScenarioConfig& cfg) {
  cfg.validate();
  WorldRun run;
  run.config = cfg;
  run.building = make_building(cfg.building, cfg.floors);
  const std::vector<Trajectory> trajectories = build_trajectories(cfg, run.building, run.nodes);

  ProtocolConfig pcfg = cfg.protocol;
  if (cfg.auto_t_uwb) pcfg.t_uwb = lookup_t_uwb(default_density_table(), cfg.node_count());
  pcfg.validate();
  run.t_uwb = pcfg.t_uwb;
  UwbChannelParams uwb = cfg.uwb;
  uwb.radio_radius = pcfg.radio_radius;

  const TrajectoryMedium medium(trajectories, pcfg.radio_radius);
  ProtocolSimulator protocol(pcfg, medium, derive_seed(cfg.seed, kStreamProtocol));
  for (const NodeInfo& n : run.nodes) protocol.add_node(n.id, n.user, 0.0);

  Rng range_rng(derive_seed(cfg.seed, kStreamRange));
  Rng transport_rng(derive_seed(cfg.seed, kStreamTransport));

  std::map<NodeId, UserState> users;
  for (const NodeInfo& n : run.nodes) {
    if (!n.user) continue;
    UserState u;
    u.sensor = std::make_unique<VioSensor>(trajectories[n.id - 1], cfg.vio,
                                           derive_seed(cfg.seed, kStreamVio + n.id));
    FilterConfig fc = cfg.filter;
    fc.seed = derive_seed(cfg.seed, kStreamFilter + n.id);
    u.filter = std::make_unique<JointFilter>(n.id, fc);
    u.filter->set_independent_mode(cfg.independent);
    u.batch.dt = 0.0;
    users.emplace(n.id, std::move(u));
    run.filters[n.id] = FilterUsage{};
  }

  const std::size_t n_ticks = trajectories.front().size();
  const double dt = 1.0 / cfg.tick_hz;
  const auto msg_every =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.tick_hz / cfg.message_rate)));
  const auto snap_every = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.snapshot_interval * cfg.tick_hz)));

  // Messages in flight, keyed by (deliver_at, send order).
  std::map<std::pair<double, std::uint64_t>, std::pair<NodeId, PeerMessage>> in_flight;
  std::uint64_t send_order = 0;
  // Payloads of delivery events of the current tick, keyed by (src, dst, seq).
  std::map<std::tuple<NodeId, NodeId, std::uint64_t>, PeerMessage> arriving;

  const std::vector<NodeId> used_tags = cfg.used_tags();
  auto feeds_filter = [&](NodeId self, NodeId other) {
    if (!users.count(self)) return false;
    if (cfg.is_user(other)) return true;
    return cfg.use_tag_ranges && std::binary_search(used_tags.begin(), used_tags.end(), other);
  };
  auto note_memory = [&](NodeId id) {
    FilterUsage& fu = run.filters[id];
    const JointFilter& f = *users.at(id).filter;
    fu.peak_memory_bytes = std::max(fu.peak_memory_bytes, f.memory_bytes());
    fu.tracked_nodes = std::max(fu.tracked_nodes, f.targets().size());
  };

  std::vector<Event> tick;
  for (std::size_t k = 1; k < n_ticks; ++k) {
    const double t = static_cast<double>(k) * dt;
    try {
      tick.clear();

      protocol.run_until(t);
      for (const RadioEvent& re : protocol.take_events()) {
        Event e;
        e.time = re.time;
        e.kind = from_radio(re.kind);
        e.src = re.initiator;
        e.dst = re.responder;
        e.v[0] = re.active_flag ? 1.0 : 0.0;
        tick.push_back(e);
      }
      for (const CompletedExchange& ex : protocol.take_exchanges()) {
        if (ex.outcome != ExchangeOutcome::kSuccess) continue;
        const Vec3 a = medium.position(ex.attempt.initiator, ex.attempt.start);
        const Vec3 b = medium.position(ex.attempt.responder, ex.attempt.start);
        const double true_dist = (a - b).norm();
        const NlosResult los = is_nlos(a, b, run.building);
        const auto z = sample_uwb_range(true_dist, los.nlos, uwb, range_rng);
        if (!z) continue;
        Event e;
        e.time = ex.end;
        e.kind = EventKind::kRange;
        e.src = ex.attempt.initiator;
        e.dst = ex.attempt.responder;
        e.v = {*z, true_dist, static_cast<double>(los.obstruction_count), 0.0};
        tick.push_back(e);
      }

      for (auto& [id, u] : users) {
        const VioDelta d = u.sensor->measure(k);
        Event e;
        e.time = d.timestamp;
        e.kind = EventKind::kVio;
        e.src = id;
        e.dst = id;
        e.seq = d.sequence;
        e.v = {d.dx, d.dy, d.dz, d.dt};
        tick.push_back(e);
        u.batch.dx += d.dx;
        u.batch.dy += d.dy;
        u.batch.dz += d.dz;
        u.batch.dt += d.dt;
        u.odometer += d.displacement();
        if (k % msg_every != 0) continue;

        PeerMessage msg;
        msg.source = id;
        msg.sequence = u.next_sequence++;
        msg.timestamp = t;
        msg.payload = u.batch;
        msg.payload.source_node = id;
        msg.payload.sequence = msg.sequence;
        msg.payload.timestamp = t;
        msg.odometer = u.odometer;
        msg.size_bytes = encode(msg).size();
        u.batch = VioDelta{};
        u.batch.dt = 0.0;
        const RadioNode& radio = protocol.nodes().at(id);
        for (const auto& [peer, _] : users) {
          if (peer == id || !radio.has_neighbor(peer)) continue;
          account_link(run.links[{id, peer}], t, msg.size_bytes);
          Event send;
          send.time = t;
          send.kind = EventKind::kMsgSend;
          send.src = id;
          send.dst = peer;
          send.seq = msg.sequence;
          send.v[0] = static_cast<double>(msg.size_bytes);
          tick.push_back(send);
          if (const auto at = transport_deliver(msg, cfg.transport, transport_rng)) {
            in_flight.emplace(std::make_pair(*at, send_order++), std::make_pair(peer, msg));
          } else {
            send.kind = EventKind::kMsgDrop;
            tick.push_back(send);
          }
        }
      }

      while (!in_flight.empty() && in_flight.begin()->first.first <= t) {
        const auto node = in_flight.extract(in_flight.begin());
        const auto& [peer, msg] = node.mapped();
        Event e;
        e.time = node.key().first;
        e.kind = EventKind::kMsgDeliver;
        e.src = msg.source;
        e.dst = peer;
        e.seq = msg.sequence;
        e.v[0] = static_cast<double>(msg.size_bytes);
        tick.push_back(e);
        arriving[{msg.source, peer, msg.sequence}] = msg;
      }

      std::stable_sort(tick.begin(), tick.end(), [](const Event& a, const Event& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.src != b.src) return a.src < b.src;
        return a.kind < b.kind;
      });

      for (const Event& e : tick) {
        switch (e.kind) {
          case EventKind::kVio: {
            UserState& u = users.at(e.src);
            VioDelta d{e.v[0], e.v[1], e.v[2], e.v[3], e.src, e.seq, e.time};
            CpuTimer timer(run.filters[e.src].cpu_seconds);
            u.filter->on_vio_self(d);
            break;
          }
          case EventKind::kMsgDeliver: {
            const auto it = arriving.find({e.src, e.dst, e.seq});
            UserState& u = users.at(e.dst);
            {
              CpuTimer timer(run.filters[e.dst].cpu_seconds);
              u.filter->on_peer_message(it->second);
            }
            arriving.erase(it);
            break;
          }
          case EventKind::kRange: {
            const RangeMeasurement m{e.src, e.dst, e.v[0], e.time};
            for (const auto& [self, other] : {std::pair{e.src, e.dst}, std::pair{e.dst, e.src}}) {
              if (!feeds_filter(self, other)) continue;
              {
                CpuTimer timer(run.filters[self].cpu_seconds);
                users.at(self).filter->on_range(m);
              }
              note_memory(self);
            }
            break;
          }
          default:
            break;
        }
        run.log.events.push_back(e);
      }

      if (k % snap_every == 0) {
        Snapshot snap;
        snap.time = t;
        for (const NodeInfo& n : run.nodes) {
          const TrajectorySample& s = trajectories[n.id - 1].samples[k];
          TruthRecord rec{n.id, s.position, s.yaw, s.yaw};
          if (n.user) rec.frame_yaw = users.at(n.id).sensor->frame_yaw();
          snap.truth.push_back(rec);
        }
        for (auto& [id, u] : users) {
          snap.estimates[id] = u.filter->joint_estimate();
          note_memory(id);
        }
        run.snapshots.push_back(std::move(snap));
      }
    } catch (const WorldError&) {
      throw;
    } catch (const std::exception& e) {
      throw WorldError(t, e.what());
    }
  }

  protocol.finalize(static_cast<double>(n_ticks - 1) * dt);
  run.protocol = protocol.stats();
  for (const auto& [id, radio] : protocol.nodes()) run.energy_mj[id] = radio.energy_mj;
  for (auto& [id, u] : users) run.filters[id].counters = u.filter->counters();
  return run;
}

void write_truth_csv(const WorldRun& run, std::ostream& out) {
  out << "time_s,node,x,y,z,yaw\n";
  char buf[256];
  for (const Snapshot& s : run.snapshots) {
    for (const TruthRecord& r : s.truth) {
      std::snprintf(buf, sizeof(buf), "%.17g,%u,%.17g,%.17g,%.17g,%.17g\n", s.time,
                    static_cast<unsigned>(r.node), r.position.x(), r.position.y(), r.position.z(),
                    r.yaw);
      out << buf;
    }
  }
}

}  // namespace relloc
