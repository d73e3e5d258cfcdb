#pragma once

#include "relloc/building.hpp"
#include "relloc/joint_filter.hpp"
#include "relloc/ranging_protocol.hpp"
#include "relloc/scenario.hpp"
#include "relloc/trajectory.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace relloc {

/// Kinds in the order used to break ties between events of one node at the
/// same instant.
enum class EventKind : std::uint8_t {
  kVio,
  kMsgSend,
  kMsgDeliver,
  kMsgDrop,
  kAdvertisement,
  kDiscovery,
  kWake,
  kSleep,
  kEviction,
  kTwrStart,
  kTwrSuccess,
  kTwrCollision,
  kRange,
};
const char* to_string(EventKind kind);

/// One log line. Payload meaning by kind:
///   vio:        v = (dx, dy, dz, dt) in the node's VIO frame
///   msg_*:      seq = message sequence, v[0] = size in bytes
///   advertisement: v[0] = 1 when it carries the active flag
///   range:      v = (measured, true distance, obstruction count, 0)
struct Event {
  double time = 0.0;
  EventKind kind = EventKind::kVio;
  NodeId src = 0;
  NodeId dst = 0;
  std::uint64_t seq = 0;
  std::array<double, 4> v{};
};

struct EventLog {
  std::vector<Event> events;

  void write_csv(std::ostream& out) const;
  std::string to_csv() const;
};

struct NodeInfo {
  NodeId id = 0;
  bool user = false;
  std::size_t level = 0;
  Vec3 start_position = Vec3::Zero();
  double start_yaw = 0.0;
};

/// Exact world state of one node at a snapshot instant.
struct TruthRecord {
  NodeId node = 0;
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  /// Heading of the node's VIO frame (start yaw plus accumulated drift).
  double frame_yaw = 0.0;
};

struct Snapshot {
  double time = 0.0;
  std::vector<TruthRecord> truth;
  /// display -> target -> joint estimate.
  std::map<NodeId, std::map<NodeId, TargetEstimate>> estimates;
};

struct FilterUsage {
  std::size_t peak_memory_bytes = 0;
  std::size_t tracked_nodes = 0;
  /// Thread CPU time spent inside the filter (not deterministic).
  double cpu_seconds = 0.0;
  FilterCounters counters;
};

struct LinkUsage {
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  std::size_t max_message_bytes = 0;
  /// Largest number of bits sent within one whole second of simulated time.
  double peak_bits_per_second = 0.0;
  std::int64_t window_second = -1;
  std::uint64_t window_bytes = 0;
};

struct WorldRun {
  ScenarioConfig config;
  BuildingModel building;
  std::vector<NodeInfo> nodes;
  EventLog log;
  std::vector<Snapshot> snapshots;
  ProtocolStats protocol;
  double t_uwb = 0.0;
  std::map<NodeId, std::array<double, 3>> energy_mj;
  std::map<NodeId, FilterUsage> filters;
  /// Directed links (sender, receiver).
  std::map<std::pair<NodeId, NodeId>, LinkUsage> links;
};

/// Module failure annotated with the simulated time at which it happened.
class WorldError : public std::runtime_error {
 public:
  WorldError(double time, const std::string& what)
      : std::runtime_error("t=" + std::to_string(time) + "s: " + what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Builds every trajectory of the scenario (users then tags).
std::vector<Trajectory> build_trajectories(const ScenarioConfig& cfg, const BuildingModel& building,
                                           std::vector<NodeInfo>& nodes);

/// Runs the closed loop: trajectories, VIO, message transport, ranging
/// protocol, range sampling and the per-user joint filters.
WorldRun run_world(const ScenarioConfig& cfg);

/// Ground truth at the snapshot instants as CSV (time_s,node,x,y,z,yaw).
void write_truth_csv(const WorldRun& run, std::ostream& out);

}  // namespace relloc
