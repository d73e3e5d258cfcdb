#pragma once

#include "relloc/geometry.hpp"
#include "relloc/joint_filter.hpp"
#include "relloc/ranging_protocol.hpp"
#include "relloc/sensors.hpp"
#include "relloc/trajectory.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relloc {

/// Malformed scenario text. `line` is 1-based, or 0 for whole-file problems.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, int line, const std::string& message);
  const std::string& source() const { return source_; }
  int line() const { return line_; }

 private:
  std::string source_;
  int line_;
};

/// Which ordered (display, target) pairs are scored.
enum class PairSelection { kUsers, kUserToAll };

struct ScenarioConfig {
  std::string name = "custom";
  double duration = 600.0;
  double tick_hz = 60.0;
  double snapshot_interval = 5.0;
  double message_rate = 10.0;

  // Building.
  std::string building = "office";
  int floors = 1;

  // Nodes. Users get ids 1..users, tags follow.
  std::size_t users = 4;
  std::size_t tags = 0;
  Mobility mobility = Mobility::kRandomWalk;
  /// Level per user; empty means round-robin over the building's levels.
  std::vector<std::size_t> user_levels;
  double pair_lag = 0.5;
  MobilityParams mobility_params;

  // Ground-truth noise injected by the world.
  VioNoiseParams vio{0.005, 5e-5, 1.0 / 60.0};
  UwbChannelParams uwb;

  TransportParams transport;

  ProtocolConfig protocol;
  /// Derive t_uwb from the density table and the node count.
  bool auto_t_uwb = true;

  FilterConfig filter;
  bool independent = false;
  /// Feed ranges to static tags into the user filters.
  bool use_tag_ranges = false;
  /// Number of deployed tags the filters and metrics use (0 = all). The
  /// subset is drawn from the seed; every deployed tag still takes part in
  /// the ranging protocol, so airtime does not depend on the subset size.
  std::size_t tag_subset = 0;

  // Metrics.
  PairSelection pairs = PairSelection::kUsers;
  CameraIntrinsics camera;
  bool baselines = true;
  /// Rate at which the anchor baseline batches VIO.
  double anchor_vio_rate = 10.0;

  std::uint64_t seed = 1;

  std::size_t node_count() const { return users + tags; }
  bool is_user(NodeId id) const { return id >= 1 && id <= users; }
  /// Tags selected by tag_subset, in increasing id order.
  std::vector<NodeId> used_tags() const;
  bool is_used_tag(NodeId id) const;
  /// Throws ConfigError (line 0) on inconsistent values.
  void validate() const;
};

/// Parses INI-style text: [section] headers, `key = value` lines, '#' or ';'
/// comments. Unknown sections or keys and malformed values are errors.
/// Keys not given keep the values of `base`.
ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<string>",
                              const ScenarioConfig& base = {});
ScenarioConfig load_scenario_file(const std::string& path);
/// Canonical text form; parse_scenario(to_ini(c)) reproduces c.
std::string to_ini(const ScenarioConfig& config);

/// Applies one `section.key = value` override (used by sweeps and --set).
void apply_override(ScenarioConfig& config, const std::string& dotted_key, const std::string& value);

struct BuiltinScenario {
  std::string name;
  std::string description;
  std::string text;
};
const std::vector<BuiltinScenario>& builtin_scenarios();
/// Throws ConfigError when the name is unknown.
ScenarioConfig builtin_scenario(const std::string& name);

}  // namespace relloc
