#include "relloc/ranging_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace relloc {

std::vector<DensityEntry> default_density_table() {
  return {{3, 0.1}, {6, 0.2}, {10, 0.22}, {15, 0.33}, {25, 0.55}};
}

double lookup_t_uwb(const std::vector<DensityEntry>& table, std::size_t nodes) {
  if (table.empty()) throw std::invalid_argument("empty density table");
  for (const auto& e : table) {
    if (nodes <= e.max_nodes) return e.t_uwb;
  }
  // Beyond the table: keep the per-node share of airtime of the last row.
  const auto& last = table.back();
  return last.t_uwb * static_cast<double>(nodes) / static_cast<double>(last.max_nodes);
}

void ProtocolConfig::validate() const {
  if (!(t_ble > 0.0 && t_uwb > 0.0 && eviction_timeout > 0.0 && exchange_duration > 0.0)) {
    throw std::invalid_argument("protocol periods must be positive");
  }
  if (!(exchange_duration < t_uwb)) {
    throw std::invalid_argument("exchange_duration must be shorter than t_uwb");
  }
  if (discovery_latency_max < discovery_latency_min || discovery_latency_min < 0.0) {
    throw std::invalid_argument("invalid discovery latency range");
  }
}

double rssi_at(double distance) { return -41.0 - 20.0 * std::log10(std::max(distance, 0.1)); }

const char* to_string(RadioMode mode) {
  switch (mode) {
    case RadioMode::kSleeping: return "sleeping";
    case RadioMode::kScanning: return "scanning";
    case RadioMode::kActive: return "active";
  }
  return "?";
}

const char* to_string(RadioEventKind kind) {
  switch (kind) {
    case RadioEventKind::kAdvertisement: return "advertisement";
    case RadioEventKind::kDiscovery: return "discovery";
    case RadioEventKind::kTwrStart: return "twr_start";
    case RadioEventKind::kTwrSuccess: return "twr_success";
    case RadioEventKind::kTwrCollision: return "twr_collision";
    case RadioEventKind::kEviction: return "eviction";
    case RadioEventKind::kWake: return "wake";
    case RadioEventKind::kSleep: return "sleep";
  }
  return "?";
}

bool RadioNode::has_neighbor(NodeId id) const {
  return std::any_of(neighbors.begin(), neighbors.end(),
                     [id](const NeighborEntry& n) { return n.node_id == id; });
}

bool CollisionDomainView::in_range(NodeId a, NodeId b, double time) const {
  if (a == b) return true;
  return (position(a, time) - position(b, time)).norm() <= radio_radius();
}

std::vector<RadioEvent> evict_stale(RadioNode& node, double now, const ProtocolConfig& cfg) {
  std::vector<RadioEvent> out;
  std::vector<NeighborEntry> kept;
  kept.reserve(node.neighbors.size());
  std::size_t removed_before_cursor = 0;
  for (std::size_t i = 0; i < node.neighbors.size(); ++i) {
    const auto& n = node.neighbors[i];
    if (now - n.last_seen > cfg.eviction_timeout) {
      out.push_back({RadioEventKind::kEviction, now, node.node_id, n.node_id, false});
      if (i < node.round_robin_index) ++removed_before_cursor;
    } else {
      kept.push_back(n);
    }
  }
  if (out.empty()) return out;
  node.neighbors = std::move(kept);
  node.round_robin_index -= removed_before_cursor;
  if (node.round_robin_index >= node.neighbors.size()) node.round_robin_index = 0;
  return out;
}

std::vector<RadioEvent> duty_cycle(RadioNode& node, double now, bool any_active_advertisement,
                                   const ProtocolConfig& cfg) {
  std::vector<RadioEvent> out;
  if (now > node.last_time) {
    const double power = node.mode == RadioMode::kActive ? cfg.active_power_mw : cfg.idle_power_mw;
    node.energy_mj[static_cast<std::size_t>(node.mode)] += power * (now - node.last_time);
    node.last_time = now;
  }
  if (any_active_advertisement) {
    node.last_active_adv_heard = now;
    if (node.mode != RadioMode::kActive) {
      node.mode = RadioMode::kActive;
      node.next_poll_at = now + cfg.t_uwb;
      out.push_back({RadioEventKind::kWake, now, node.node_id, node.node_id, false});
    }
  } else if (node.mode == RadioMode::kActive && !node.wants_session &&
             now - node.last_active_adv_heard > cfg.active_timeout) {
    node.mode = RadioMode::kScanning;
    out.push_back({RadioEventKind::kSleep, now, node.node_id, node.node_id, false});
  }
  return out;
}

std::vector<RadioEvent> advance(RadioNode& node, double now,
                                [[maybe_unused]] const CollisionDomainView& medium,
                                const ProtocolConfig& cfg) {
  std::vector<RadioEvent> out = evict_stale(node, now, cfg);
  if (now >= node.next_adv_at) {
    const bool active_flag = node.wants_session && node.mode == RadioMode::kActive;
    out.push_back({RadioEventKind::kAdvertisement, now, node.node_id, node.node_id, active_flag});
    while (node.next_adv_at <= now) node.next_adv_at += cfg.t_ble;
  }
  if (node.mode == RadioMode::kActive && now >= node.next_poll_at) {
    if (!node.neighbors.empty()) {
      const std::size_t idx = node.round_robin_index % node.neighbors.size();
      const NodeId peer = node.neighbors[idx].node_id;
      out.push_back({RadioEventKind::kTwrStart, now, node.node_id, peer, false});
      ++node.polls[peer];
      node.round_robin_index = (idx + 1) % node.neighbors.size();
    }
    node.next_poll_at = now + cfg.t_uwb;
    node.pending_backoff = false;
  }
  return out;
}

std::vector<ExchangeOutcome> resolve_medium(const std::vector<ExchangeAttempt>& attempts,
                                            double exchange_duration) {
  std::vector<ExchangeOutcome> out(attempts.size(), ExchangeOutcome::kSuccess);
  for (std::size_t i = 0; i < attempts.size(); ++i) {
    for (std::size_t j = i + 1; j < attempts.size(); ++j) {
      if (std::abs(attempts[i].start - attempts[j].start) < exchange_duration) {
        out[i] = ExchangeOutcome::kCollision;
        out[j] = ExchangeOutcome::kCollision;
      }
    }
  }
  return out;
}

double apply_backoff(RadioNode& node, Rng& rng, const ProtocolConfig& cfg) {
  const double mean = cfg.t_uwb / 2.0;
  const double tail = 1.0 - std::exp(-cfg.t_uwb / mean);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double offset = std::min(cfg.t_uwb, -mean * std::log1p(-u01(rng) * tail));
  node.pending_backoff = true;
  return offset;
}

ProtocolSimulator::ProtocolSimulator(ProtocolConfig cfg, const CollisionDomainView& medium,
                                     std::uint64_t seed)
    : cfg_(std::move(cfg)), medium_(medium), rng_(seed) {
  cfg_.validate();
}

void ProtocolSimulator::add_node(NodeId id, bool wants_session, double start_time) {
  RadioNode node;
  node.node_id = id;
  node.wants_session = wants_session;
  node.mode = wants_session ? RadioMode::kActive : RadioMode::kSleeping;
  node.last_time = start_time;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  node.next_adv_at = start_time + u01(rng_) * cfg_.t_ble;
  node.next_poll_at = start_time + u01(rng_) * cfg_.t_uwb;
  auto [it, inserted] = nodes_.emplace(id, std::move(node));
  if (!inserted) throw std::invalid_argument("duplicate radio node id");
  schedule_node(it->second);
}

void ProtocolSimulator::schedule(double time, ActionKind kind, NodeId a, NodeId b,
                                 std::size_t exchange) {
  queue_.push(Action{time, seq_++, kind, a, b, exchange});
}

void ProtocolSimulator::schedule_node(RadioNode& node) {
  double due = node.next_adv_at;
  if (node.mode == RadioMode::kActive) {
    due = std::min(due, node.next_poll_at);
    if (!node.wants_session) {
      // Slightly past the timeout so the strict comparison in duty_cycle holds.
      due = std::min(due, std::nextafter(node.last_active_adv_heard + cfg_.active_timeout,
                                         std::numeric_limits<double>::infinity()));
    }
  }
  due = std::max(due, node.last_time);
  scheduled_wake_[node.node_id] = due;
  schedule(due, ActionKind::kNodeWake, node.node_id);
}

void ProtocolSimulator::run_until(double t) {
  while (!queue_.empty() && queue_.top().time <= t) {
    const Action act = queue_.top();
    queue_.pop();
    switch (act.kind) {
      case ActionKind::kNodeWake:
        if (scheduled_wake_[act.a] == act.time) handle_node(act.a, act.time);
        break;
      case ActionKind::kDiscovery: {
        discovery_pending_[{act.a, act.b}] = false;
        RadioNode& node = nodes_.at(act.a);
        if (!node.has_neighbor(act.b) && medium_.in_range(act.a, act.b, act.time)) {
          const double d = (medium_.position(act.a, act.time) - medium_.position(act.b, act.time)).norm();
          node.neighbors.push_back({act.b, act.time, rssi_at(d)});
          emit({RadioEventKind::kDiscovery, act.time, act.a, act.b, false});
        }
        break;
      }
      case ActionKind::kExchangeEnd:
        finish_exchange(act.exchange, act.time);
        break;
    }
  }
}

void ProtocolSimulator::handle_node(NodeId id, double now) {
  RadioNode& node = nodes_.at(id);
  const RadioMode before = node.mode;
  for (const auto& ev : duty_cycle(node, now, false, cfg_)) emit(ev);
  (void)before;
  for (const auto& ev : advance(node, now, medium_, cfg_)) {
    emit(ev);
    if (ev.kind == RadioEventKind::kAdvertisement) deliver_advertisement(ev);
    if (ev.kind == RadioEventKind::kTwrStart) start_exchange(ev);
  }
  schedule_node(node);
}

void ProtocolSimulator::deliver_advertisement(const RadioEvent& adv) {
  std::uniform_real_distribution<double> latency(cfg_.discovery_latency_min,
                                                 cfg_.discovery_latency_max);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const NodeId src = adv.initiator;
  for (auto& [id, node] : nodes_) {
    if (id == src || !medium_.in_range(id, src, adv.time)) continue;
    const double d = (medium_.position(id, adv.time) - medium_.position(src, adv.time)).norm();
    const double rssi = rssi_at(d);
    if (rssi < cfg_.rssi_threshold) continue;
    const RadioMode before = node.mode;
    for (const auto& ev : duty_cycle(node, adv.time, adv.active_flag, cfg_)) emit(ev);
    if (before != RadioMode::kActive && node.mode == RadioMode::kActive) {
      // Woken radios pick a random polling phase.
      node.next_poll_at = adv.time + u01(rng_) * cfg_.t_uwb;
    }
    auto nb = std::find_if(node.neighbors.begin(), node.neighbors.end(),
                           [src](const NeighborEntry& n) { return n.node_id == src; });
    if (nb != node.neighbors.end()) {
      nb->last_seen = adv.time;
      nb->rssi = rssi;
    } else if (!discovery_pending_[{id, src}]) {
      discovery_pending_[{id, src}] = true;
      schedule(adv.time + latency(rng_), ActionKind::kDiscovery, id, src);
    }
    if (node.mode != before || adv.active_flag) schedule_node(node);
  }
}

void ProtocolSimulator::start_exchange(const RadioEvent& start) {
  InFlight ex;
  ex.attempt = {start.time, start.initiator, start.responder};
  const double dur = cfg_.exchange_duration;
  // Responder must be listening on UWB and reachable.
  const auto resp = nodes_.find(start.responder);
  if (resp == nodes_.end() || resp->second.mode != RadioMode::kActive ||
      !medium_.in_range(start.initiator, start.responder, start.time)) {
    ex.collided = true;
  }
  const auto interferes = [&](const ExchangeAttempt& a, const ExchangeAttempt& b) {
    const NodeId pa[2] = {a.initiator, a.responder};
    const NodeId pb[2] = {b.initiator, b.responder};
    for (NodeId x : pa) {
      for (NodeId y : pb) {
        if (medium_.in_range(x, y, start.time)) return true;
      }
    }
    return false;
  };
  std::erase_if(live_exchanges_, [&](std::size_t i) {
    return exchanges_[i].attempt.start + dur <= start.time;
  });
  const std::size_t index = exchanges_.size();
  for (std::size_t i : live_exchanges_) {
    if (interferes(exchanges_[i].attempt, ex.attempt)) {
      exchanges_[i].collided = true;
      ex.collided = true;
    }
  }
  exchanges_.push_back(ex);
  live_exchanges_.push_back(index);
  ++stats_.attempts;
  schedule(start.time + dur, ActionKind::kExchangeEnd, start.initiator, start.responder, index);
}

void ProtocolSimulator::finish_exchange(std::size_t index, double now) {
  InFlight& ex = exchanges_[index];
  ex.done = true;
  CompletedExchange done{ex.attempt, ex.collided ? ExchangeOutcome::kCollision : ExchangeOutcome::kSuccess,
                         now};
  if (ex.collided) {
    ++stats_.collisions;
    emit({RadioEventKind::kTwrCollision, now, ex.attempt.initiator, ex.attempt.responder, false});
    RadioNode& init = nodes_.at(ex.attempt.initiator);
    init.next_poll_at += apply_backoff(init, rng_, cfg_);
    schedule_node(init);
  } else {
    ++stats_.successes;
    const auto key = std::minmax(ex.attempt.initiator, ex.attempt.responder);
    ++stats_.pair_successes[{key.first, key.second}];
    emit({RadioEventKind::kTwrSuccess, now, ex.attempt.initiator, ex.attempt.responder, false});
  }
  completed_.push_back(done);
}

std::vector<RadioEvent> ProtocolSimulator::take_events() {
  std::vector<RadioEvent> out;
  out.swap(events_);
  return out;
}

std::vector<CompletedExchange> ProtocolSimulator::take_exchanges() {
  std::vector<CompletedExchange> out;
  out.swap(completed_);
  return out;
}

void ProtocolSimulator::finalize(double t) {
  for (auto& [id, node] : nodes_) duty_cycle(node, t, false, cfg_);
}

}  // namespace relloc
