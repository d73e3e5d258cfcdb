#pragma once

#include "relloc/geometry.hpp"
#include "relloc/pf_core.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

namespace relloc {

/// Maximum clique size -> UWB polling period. Data, not code: scenarios may
/// override it.
struct DensityEntry {
  std::size_t max_nodes = 0;
  double t_uwb = 0.1;
};
std::vector<DensityEntry> default_density_table();
double lookup_t_uwb(const std::vector<DensityEntry>& table, std::size_t nodes);

struct ProtocolConfig {
  double t_ble = 0.2;
  double t_uwb = 0.1;
  /// RSSI is a log-distance function of range; see rssi_at().
  double rssi_threshold = -100.0;
  double eviction_timeout = 15.0;
  double exchange_duration = 0.003;
  double radio_radius = 60.0;
  /// An active node returns to scanning after this long without hearing an
  /// active-ranging advertisement.
  double active_timeout = 5.0;
  double discovery_latency_min = 1.0;
  double discovery_latency_max = 2.0;
  double idle_power_mw = 10.0;
  double active_power_mw = 800.0;

  /// Throws std::invalid_argument when periods are not positive or the
  /// exchange does not fit in one polling period.
  void validate() const;
};

/// dBm at `distance` meters: -41 - 20 log10(d), d clamped to >= 0.1 m.
double rssi_at(double distance);

enum class RadioMode { kSleeping, kScanning, kActive };
const char* to_string(RadioMode mode);

struct NeighborEntry {
  NodeId node_id = 0;
  double last_seen = 0.0;
  double rssi = 0.0;
};

struct RadioNode {
  NodeId node_id = 0;
  RadioMode mode = RadioMode::kSleeping;
  std::vector<NeighborEntry> neighbors;
  std::size_t round_robin_index = 0;
  double next_poll_at = 0.0;
  double next_adv_at = 0.0;
  bool pending_backoff = false;
  /// Advertises active ranging (a user with an AR session).
  bool wants_session = false;
  double last_active_adv_heard = -1e300;
  double last_time = 0.0;
  /// Energy in millijoules spent in each mode.
  std::array<double, 3> energy_mj{};
  /// Per-neighbor poll counter, indexed by node id.
  std::map<NodeId, std::uint64_t> polls;

  bool has_neighbor(NodeId id) const;
};

enum class RadioEventKind {
  kAdvertisement,
  kDiscovery,
  kTwrStart,
  kTwrSuccess,
  kTwrCollision,
  kEviction,
  kWake,
  kSleep,
};
const char* to_string(RadioEventKind kind);

struct RadioEvent {
  RadioEventKind kind = RadioEventKind::kAdvertisement;
  double time = 0.0;
  NodeId initiator = 0;
  /// Responder / evicted neighbor / discovered node; equals initiator for
  /// single-node events.
  NodeId responder = 0;
  /// Advertisements: whether they carry the active-ranging flag.
  bool active_flag = false;
};

/// What a node can observe of the shared channel.
class CollisionDomainView {
 public:
  virtual ~CollisionDomainView() = default;
  virtual Vec3 position(NodeId node, double time) const = 0;
  virtual double radio_radius() const = 0;

  bool in_range(NodeId a, NodeId b, double time) const;
};

/// Emits due advertisements (every t_ble) and, for an active node whose poll
/// is due, a DS-TWR start toward the next neighbor in round-robin order.
std::vector<RadioEvent> advance(RadioNode& node, double now, const CollisionDomainView& medium,
                                const ProtocolConfig& cfg);

struct ExchangeAttempt {
  double start = 0.0;
  NodeId initiator = 0;
  NodeId responder = 0;
};
enum class ExchangeOutcome { kSuccess, kCollision };

/// Exchanges whose airtime [start, start + duration) overlaps another's in
/// the same domain collide; the rest succeed.
std::vector<ExchangeOutcome> resolve_medium(const std::vector<ExchangeAttempt>& attempts,
                                            double exchange_duration);

/// Random offset added to the next poll after a failed exchange:
/// Exponential(mean t_uwb / 2) truncated to [0, t_uwb].
double apply_backoff(RadioNode& node, Rng& rng, const ProtocolConfig& cfg);

/// Drops neighbors silent for longer than the eviction timeout, keeping the
/// round-robin cursor on the same next neighbor.
std::vector<RadioEvent> evict_stale(RadioNode& node, double now, const ProtocolConfig& cfg);

/// Mode transitions and energy accounting up to `now`.
std::vector<RadioEvent> duty_cycle(RadioNode& node, double now, bool any_active_advertisement,
                                   const ProtocolConfig& cfg);

struct ProtocolStats {
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
  std::uint64_t collisions = 0;
  /// Successful exchanges per unordered pair (min id, max id).
  std::map<std::pair<NodeId, NodeId>, std::uint64_t> pair_successes;
};

struct CompletedExchange {
  ExchangeAttempt attempt;
  ExchangeOutcome outcome = ExchangeOutcome::kSuccess;
  double end = 0.0;
};

/// Discrete-event simulation of discovery, round-robin ranging and backoff
/// for a set of radios sharing one channel.
class ProtocolSimulator {
 public:
  ProtocolSimulator(ProtocolConfig cfg, const CollisionDomainView& medium, std::uint64_t seed);

  /// Adds a radio. Nodes that want a session start active.
  void add_node(NodeId id, bool wants_session, double start_time = 0.0);

  /// Processes every scheduled action with time <= t. Emitted events are in
  /// non-decreasing time order.
  void run_until(double t);

  /// Drains events and finished exchanges produced since the last call.
  std::vector<RadioEvent> take_events();
  std::vector<CompletedExchange> take_exchanges();

  const ProtocolConfig& config() const { return cfg_; }
  const std::map<NodeId, RadioNode>& nodes() const { return nodes_; }
  const ProtocolStats& stats() const { return stats_; }
  /// Settles energy accounting up to `t` for every node.
  void finalize(double t);

 private:
  enum class ActionKind { kNodeWake, kDiscovery, kExchangeEnd };
  struct Action {
    double time;
    std::uint64_t seq;
    ActionKind kind;
    NodeId a;
    NodeId b;
    std::size_t exchange;
    bool operator>(const Action& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };
  struct InFlight {
    ExchangeAttempt attempt;
    bool collided = false;
    bool done = false;
  };

  void schedule(double time, ActionKind kind, NodeId a, NodeId b = 0, std::size_t exchange = 0);
  void schedule_node(RadioNode& node);
  void handle_node(NodeId id, double now);
  void deliver_advertisement(const RadioEvent& adv);
  void start_exchange(const RadioEvent& start);
  void finish_exchange(std::size_t index, double now);
  void emit(const RadioEvent& ev) { events_.push_back(ev); }

  ProtocolConfig cfg_;
  const CollisionDomainView& medium_;
  Rng rng_;
  std::map<NodeId, RadioNode> nodes_;
  std::map<NodeId, double> scheduled_wake_;
  std::map<std::pair<NodeId, NodeId>, bool> discovery_pending_;
  std::priority_queue<Action, std::vector<Action>, std::greater<Action>> queue_;
  std::uint64_t seq_ = 0;
  std::vector<InFlight> exchanges_;
  std::vector<std::size_t> live_exchanges_;
  std::vector<RadioEvent> events_;
  std::vector<CompletedExchange> completed_;
  ProtocolStats stats_;
};

}  // namespace relloc
