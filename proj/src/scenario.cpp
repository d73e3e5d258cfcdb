#include "relloc/scenario.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace relloc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Failure inside a setter; turned into a ConfigError with line context.
struct BadValue {
  std::string message;
};

double to_double(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(x)) {
    throw BadValue{"expected a finite number, got '" + v + "'"};
  }
  return x;
}

std::uint64_t to_u64(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  if (v.empty() || v.front() == '-') throw BadValue{"expected a non-negative integer, got '" + v + "'"};
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || errno == ERANGE) {
    throw BadValue{"expected a non-negative integer, got '" + v + "'"};
  }
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw BadValue{"expected a boolean, got '" + v + "'"};
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string section;
  std::string key;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

Field real(const std::string& section, const std::string& key,
           std::function<double&(ScenarioConfig&)> ref) {
  return Field{section, key,
               [ref](ScenarioConfig& c, const std::string& v) { ref(c) = to_double(v); },
               [ref](const ScenarioConfig& c) {
                 return fmt_double(ref(const_cast<ScenarioConfig&>(c)));
               }};
}

template <typename Int>
Field integer(const std::string& section, const std::string& key,
              std::function<Int&(ScenarioConfig&)> ref) {
  return Field{section, key,
               [ref](ScenarioConfig& c, const std::string& v) {
                 const std::uint64_t x = to_u64(v);
                 if (x > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) {
                   throw BadValue{"value '" + v + "' is too large"};
                 }
                 ref(c) = static_cast<Int>(x);
               },
               [ref](const ScenarioConfig& c) {
                 return std::to_string(ref(const_cast<ScenarioConfig&>(c)));
               }};
}

Field boolean(const std::string& section, const std::string& key,
              std::function<bool&(ScenarioConfig&)> ref) {
  return Field{section, key,
               [ref](ScenarioConfig& c, const std::string& v) { ref(c) = to_bool(v); },
               [ref](const ScenarioConfig& c) {
                 return fmt_bool(ref(const_cast<ScenarioConfig&>(c)));
               }};
}

Field text(const std::string& section, const std::string& key,
           std::function<std::string&(ScenarioConfig&)> ref) {
  return Field{section, key,
               [ref](ScenarioConfig& c, const std::string& v) {
                 if (v.empty()) throw BadValue{"expected a non-empty string"};
                 ref(c) = v;
               },
               [ref](const ScenarioConfig& c) { return ref(const_cast<ScenarioConfig&>(c)); }};
}

const std::vector<Field>& fields() {
  using C = ScenarioConfig;
  static const std::vector<Field> table = {
      text("scenario", "name", [](C& c) -> std::string& { return c.name; }),
      real("scenario", "duration", [](C& c) -> double& { return c.duration; }),
      real("scenario", "tick_hz", [](C& c) -> double& { return c.tick_hz; }),
      real("scenario", "snapshot_interval", [](C& c) -> double& { return c.snapshot_interval; }),
      real("scenario", "message_rate", [](C& c) -> double& { return c.message_rate; }),

      text("building", "preset", [](C& c) -> std::string& { return c.building; }),
      integer<int>("building", "floors", [](C& c) -> int& { return c.floors; }),

      integer<std::size_t>("nodes", "users", [](C& c) -> std::size_t& { return c.users; }),
      integer<std::size_t>("nodes", "tags", [](C& c) -> std::size_t& { return c.tags; }),
      Field{"nodes", "mobility",
            [](C& c, const std::string& v) {
              try {
                c.mobility = parse_mobility(v);
              } catch (const std::invalid_argument& e) {
                throw BadValue{e.what()};
              }
            },
            [](const C& c) { return std::string(to_string(c.mobility)); }},
      Field{"nodes", "user_levels",
            [](C& c, const std::string& v) {
              c.user_levels.clear();
              if (v == "auto") return;
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                c.user_levels.push_back(static_cast<std::size_t>(to_u64(trim(item))));
              }
            },
            [](const C& c) {
              if (c.user_levels.empty()) return std::string("auto");
              std::string out;
              for (std::size_t i = 0; i < c.user_levels.size(); ++i) {
                if (i) out += ",";
                out += std::to_string(c.user_levels[i]);
              }
              return out;
            }},
      real("nodes", "pair_lag", [](C& c) -> double& { return c.pair_lag; }),
      real("nodes", "v_max", [](C& c) -> double& { return c.mobility_params.v_max; }),
      real("nodes", "min_speed", [](C& c) -> double& { return c.mobility_params.min_speed; }),
      real("nodes", "max_speed", [](C& c) -> double& { return c.mobility_params.max_speed; }),
      real("nodes", "stop_interval",
           [](C& c) -> double& { return c.mobility_params.stop_interval; }),

      real("noise", "vio_sigma_xyz", [](C& c) -> double& { return c.vio.sigma_xyz; }),
      real("noise", "vio_sigma_theta", [](C& c) -> double& { return c.vio.sigma_theta; }),
      real("noise", "sigma_r", [](C& c) -> double& { return c.uwb.sigma_r; }),
      real("noise", "p_nlos", [](C& c) -> double& { return c.uwb.p_nlos; }),
      real("noise", "outlier_factor", [](C& c) -> double& { return c.uwb.outlier_factor; }),
      real("noise", "outlier_cap", [](C& c) -> double& { return c.uwb.outlier_cap; }),
      real("noise", "outlier_mean", [](C& c) -> double& { return c.uwb.outlier_mean; }),
      real("noise", "nlos_sigma_factor", [](C& c) -> double& { return c.uwb.nlos_sigma_factor; }),

      real("transport", "drop_prob", [](C& c) -> double& { return c.transport.drop_prob; }),
      real("transport", "latency_mean", [](C& c) -> double& { return c.transport.delay_mean; }),
      real("transport", "jitter_std", [](C& c) -> double& { return c.transport.delay_std; }),

      real("protocol", "t_ble", [](C& c) -> double& { return c.protocol.t_ble; }),
      Field{"protocol", "t_uwb",
            [](C& c, const std::string& v) {
              if (v == "auto") {
                c.auto_t_uwb = true;
              } else {
                c.auto_t_uwb = false;
                c.protocol.t_uwb = to_double(v);
              }
            },
            [](const C& c) { return c.auto_t_uwb ? std::string("auto") : fmt_double(c.protocol.t_uwb); }},
      real("protocol", "rssi_threshold", [](C& c) -> double& { return c.protocol.rssi_threshold; }),
      real("protocol", "eviction_timeout",
           [](C& c) -> double& { return c.protocol.eviction_timeout; }),
      real("protocol", "exchange_duration",
           [](C& c) -> double& { return c.protocol.exchange_duration; }),
      real("protocol", "radio_radius", [](C& c) -> double& { return c.protocol.radio_radius; }),
      real("protocol", "active_timeout", [](C& c) -> double& { return c.protocol.active_timeout; }),

      integer<std::size_t>("filter", "display_particles",
                           [](C& c) -> std::size_t& { return c.filter.display_particles; }),
      integer<std::size_t>("filter", "target_particles",
                           [](C& c) -> std::size_t& { return c.filter.target_particles; }),
      real("filter", "sigma_xyz", [](C& c) -> double& { return c.filter.vio.sigma_xyz; }),
      real("filter", "sigma_theta", [](C& c) -> double& { return c.filter.vio.sigma_theta; }),
      real("filter", "sigma_r", [](C& c) -> double& { return c.filter.range.sigma_r; }),
      real("filter", "p_nlos", [](C& c) -> double& { return c.filter.range.p_nlos; }),
      real("filter", "vertical_extent", [](C& c) -> double& { return c.filter.vertical_extent; }),
      real("filter", "recovery_fraction",
           [](C& c) -> double& { return c.filter.recovery_fraction; }),
      real("filter", "ess_fraction", [](C& c) -> double& { return c.filter.resample.ess_fraction; }),
      real("filter", "resample_interval",
           [](C& c) -> double& { return c.filter.resample.interval; }),
      real("filter", "roughening_scale",
           [](C& c) -> double& { return c.filter.roughening.scale; }),
      real("filter", "roughening_min_position",
           [](C& c) -> double& { return c.filter.roughening.min_position; }),
      real("filter", "roughening_min_theta",
           [](C& c) -> double& { return c.filter.roughening.min_theta; }),
      real("filter", "stale_range_age", [](C& c) -> double& { return c.filter.stale_range_age; }),
      real("filter", "buffer_window", [](C& c) -> double& { return c.filter.buffer_window; }),
      Field{"filter", "mode",
            [](C& c, const std::string& v) {
              if (v == "collaborative") {
                c.independent = false;
              } else if (v == "independent") {
                c.independent = true;
              } else {
                throw BadValue{"mode must be 'collaborative' or 'independent'"};
              }
            },
            [](const C& c) {
              return std::string(c.independent ? "independent" : "collaborative");
            }},
      boolean("filter", "use_tag_ranges", [](C& c) -> bool& { return c.use_tag_ranges; }),
      integer<std::size_t>("filter", "tag_subset", [](C& c) -> std::size_t& { return c.tag_subset; }),

      Field{"metrics", "pairs",
            [](C& c, const std::string& v) {
              if (v == "users") {
                c.pairs = PairSelection::kUsers;
              } else if (v == "user_to_all") {
                c.pairs = PairSelection::kUserToAll;
              } else {
                throw BadValue{"pairs must be 'users' or 'user_to_all'"};
              }
            },
            [](const C& c) {
              return std::string(c.pairs == PairSelection::kUsers ? "users" : "user_to_all");
            }},
      real("metrics", "f_x", [](C& c) -> double& { return c.camera.f_x; }),
      real("metrics", "f_y", [](C& c) -> double& { return c.camera.f_y; }),
      real("metrics", "c_x", [](C& c) -> double& { return c.camera.c_x; }),
      real("metrics", "c_y", [](C& c) -> double& { return c.camera.c_y; }),
      real("metrics", "h_x", [](C& c) -> double& { return c.camera.h_x; }),
      real("metrics", "h_y", [](C& c) -> double& { return c.camera.h_y; }),
      boolean("metrics", "baselines", [](C& c) -> bool& { return c.baselines; }),
      real("metrics", "anchor_vio_rate", [](C& c) -> double& { return c.anchor_vio_rate; }),

      integer<std::uint64_t>("seeds", "seed", [](C& c) -> std::uint64_t& { return c.seed; }),
  };
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const Field& f : fields()) {
    if (f.section == section) return true;
  }
  return false;
}

// Bundled scenario texts. Keys not listed keep their defaults.
const char* const kThreeFloor = R"(# Five users across three floors plus nine fixed tags.
[scenario]
name = three-floor
[building]
preset = three-floor
[nodes]
users = 5
tags = 9
mobility = random_walk
[filter]
use_tag_ranges = true
[metrics]
pairs = user_to_all
)";

const char* const kOfficeBusy = R"(# Eight users walking between rooms of one office floor.
[scenario]
name = office-busy
[building]
preset = office
[nodes]
users = 8
mobility = waypoint
)";

const char* const kGarageNlos = R"(# Concrete walls and pillars; frequent obstructed links.
[scenario]
name = garage-nlos
[building]
preset = garage
[nodes]
users = 4
mobility = random_walk
[noise]
p_nlos = 0.2
)";

const char* const kOutdoorOpen = R"(# Open area without obstructions.
[scenario]
name = outdoor-open
[building]
preset = open
[nodes]
users = 4
mobility = random_walk
)";

const char* const kPairs = R"(# Two pairs of users walking together.
[scenario]
name = pairs
[building]
preset = office
[nodes]
users = 4
mobility = pairs
)";

const char* const kNormal = R"(# Ordinary walking in an office.
[scenario]
name = normal
[building]
preset = office
[nodes]
users = 4
mobility = random_walk
)";

const char* const kStress = R"(# Fast movement, sudden stops and jumps.
[scenario]
name = stress
[building]
preset = office
[nodes]
users = 4
mobility = stress
)";

const char* const kLos = R"(# Line of sight between all users.
[scenario]
name = los
[building]
preset = open
[nodes]
users = 4
mobility = random_walk
)";

const char* const kMixed = R"(# Open-plan floor with rooms: a mix of clear and obstructed links.
[scenario]
name = mixed
[building]
preset = open-office
[nodes]
users = 4
mobility = random_walk
)";

const char* const kHeavyNlos = R"(# Garage with a high obstruction outlier rate.
[scenario]
name = heavy-nlos
[building]
preset = garage
[nodes]
users = 4
mobility = random_walk
[noise]
p_nlos = 0.4
)";

const char* const kCollab = R"(# One walking user ranging to fixed tags.
[scenario]
name = collab
duration = 300
[building]
preset = open
[nodes]
users = 1
tags = 9
mobility = random_walk
[filter]
use_tag_ranges = true
[metrics]
pairs = user_to_all
)";

}  // namespace

ConfigError::ConfigError(std::string source, int line, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                         message),
      source_(std::move(source)),
      line_(line) {}

std::vector<NodeId> ScenarioConfig::used_tags() const {
  std::vector<NodeId> ids;
  for (std::size_t j = 0; j < tags; ++j) ids.push_back(static_cast<NodeId>(users + 1 + j));
  if (tag_subset == 0 || tag_subset >= ids.size()) return ids;
  // Partial Fisher-Yates draw; written out so the choice is portable.
  Rng rng(derive_seed(seed, 600));
  for (std::size_t i = 0; i < tag_subset; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(tag_subset);
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool ScenarioConfig::is_used_tag(NodeId id) const {
  if (is_user(id) || id > users + tags) return false;
  const auto used = used_tags();
  return std::binary_search(used.begin(), used.end(), id);
}

void ScenarioConfig::validate() const {
  auto fail = [&](const std::string& msg) { throw ConfigError(name, 0, msg); };
  if (!(duration > 0.0)) fail("duration must be positive");
  if (!(tick_hz > 0.0)) fail("tick_hz must be positive");
  if (!(snapshot_interval > 0.0)) fail("snapshot_interval must be positive");
  if (!(message_rate > 0.0) || message_rate > tick_hz) fail("message_rate must be in (0, tick_hz]");
  if (users == 0) fail("at least one user is required");
  if (floors < 1) fail("floors must be at least 1");
  if (!user_levels.empty() && user_levels.size() != users) {
    fail("user_levels must list one level per user");
  }
  if (!(pair_lag >= 0.0)) fail("pair_lag must be non-negative");
  if (mobility == Mobility::kStatic) fail("users cannot be static; use tags");
  if (tag_subset > tags) fail("tag_subset exceeds the number of tags");
  if (vio.sigma_xyz < 0.0 || vio.sigma_theta < 0.0) fail("VIO noise must be non-negative");
  if (uwb.sigma_r < 0.0 || uwb.p_nlos < 0.0 || uwb.p_nlos > 1.0) fail("bad range noise");
  if (!(transport.drop_prob >= 0.0 && transport.drop_prob < 1.0)) fail("drop_prob must be in [0, 1)");
  if (transport.delay_mean < 0.0 || transport.delay_std < 0.0) fail("latency must be non-negative");
  if (filter.display_particles == 0 || filter.target_particles == 0) {
    fail("particle counts must be positive");
  }
  if (!(filter.range.sigma_r > 0.0)) fail("filter sigma_r must be positive");
  if (filter.range.p_nlos < 0.0 || filter.range.p_nlos >= 0.5) fail("filter p_nlos must be in [0, 0.5)");
  if (filter.recovery_fraction < 0.0 || filter.recovery_fraction > 1.0) {
    fail("recovery_fraction must be in [0, 1]");
  }
  if (!(anchor_vio_rate > 0.0)) fail("anchor_vio_rate must be positive");
  try {
    protocol.validate();
    camera.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& source,
                              const ScenarioConfig& base) {
  ScenarioConfig cfg = base;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) {
        throw ConfigError(source, line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line_no, "expected 'key = value'");
    if (section.empty()) throw ConfigError(source, line_no, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* f = find_field(section, key);
    if (!f) throw ConfigError(source, line_no, "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second) {
      throw ConfigError(source, line_no, "duplicate key '" + key + "' in [" + section + "]");
    }
    try {
      f->set(cfg, value);
    } catch (const BadValue& e) {
      throw ConfigError(source, line_no, section + "." + key + ": " + e.message);
    }
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

std::string to_ini(const ScenarioConfig& config) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

void apply_override(ScenarioConfig& config, const std::string& dotted_key,
                    const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("override", 0, "expected section.key, got '" + dotted_key + "'");
  }
  const Field* f = find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
  if (!f) throw ConfigError("override", 0, "unknown key '" + dotted_key + "'");
  try {
    f->set(config, trim(value));
  } catch (const BadValue& e) {
    throw ConfigError("override", 0, dotted_key + ": " + e.message);
  }
  config.validate();
}

const std::vector<BuiltinScenario>& builtin_scenarios() {
  static const std::vector<BuiltinScenario> list = {
      {"three-floor", "5 users and 9 fixed tags over three floors", kThreeFloor},
      {"office-busy", "8 users on one office floor, waypoint walking", kOfficeBusy},
      {"garage-nlos", "4 users among concrete walls and pillars", kGarageNlos},
      {"outdoor-open", "4 users in an open area", kOutdoorOpen},
      {"pairs", "4 users walking in two pairs", kPairs},
      {"normal", "4 users walking normally", kNormal},
      {"stress", "4 users with fast movement, stops and jumps", kStress},
      {"los", "4 users with clear line of sight", kLos},
      {"mixed", "4 users on an open-plan floor with rooms", kMixed},
      {"heavy-nlos", "4 users in a garage with frequent outliers", kHeavyNlos},
      {"collab", "1 user ranging to 9 fixed tags", kCollab},
  };
  return list;
}

ScenarioConfig builtin_scenario(const std::string& name) {
  for (const auto& s : builtin_scenarios()) {
    if (s.name == name) return parse_scenario(s.text, "builtin:" + name);
  }
  throw ConfigError("builtin", 0, "unknown scenario '" + name + "'");
}

}  // namespace relloc
