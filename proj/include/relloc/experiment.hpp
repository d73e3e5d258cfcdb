#pragma once

#include "relloc/metrics.hpp"
#include "relloc/scenario.hpp"
#include "relloc/world.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace relloc {

enum class Method { kRbpf, kVioOnly, kAnchorOracle };
const char* to_string(Method method);
/// Throws std::invalid_argument for unknown names.
Method parse_method(const std::string& name);

struct Summary {
  std::size_t count = 0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double mean = 0.0;
};
/// Percentiles use linear interpolation; all fields are NaN for no values.
Summary summarize(const std::vector<double>& values);

struct MethodResult {
  Method method = Method::kRbpf;
  bool available = true;
  /// Why the method produced no series (when unavailable).
  std::string note;
  std::vector<ErrorSample> samples;
  Summary geom;
  Summary dpe;
  /// Pairs without an estimate at a snapshot.
  std::size_t missing = 0;
};

struct ProtocolSummary {
  double t_uwb = 0.0;
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
  std::uint64_t collisions = 0;
  /// Successful exchanges per second over the whole run.
  double range_rate_hz = 0.0;
  double collision_rate = 0.0;
  /// Mean over ranged pairs of their successful exchange rate.
  double mean_pair_rate_hz = 0.0;
};

struct NodeResources {
  NodeId node = 0;
  std::size_t peak_memory_bytes = 0;
  std::size_t tracked_nodes = 0;
  FilterCounters counters;
};

struct RunReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string config_echo;
  std::vector<MethodResult> methods;
  ProtocolSummary protocol;
  std::vector<NodeResources> resources;
  std::size_t max_message_bytes = 0;
  double peak_link_bits_per_second = 0.0;
  double bucket_width = 2.0;
  /// RBPF geometric error and DPE by true separation.
  std::vector<SeparationBucket> buckets;
  /// Pairs skipped because display and target coincided.
  std::size_t degenerate_samples = 0;

  // Measurements that vary between runs; kept out of the summary.
  std::map<NodeId, double> cpu_seconds;

  const MethodResult& method(Method m) const;
};

/// Scores a finished world run against its ground truth.
RunReport evaluate_run(const WorldRun& run, double bucket_width = 2.0);

/// Runs the world and scores it.
RunReport run_experiment(const ScenarioConfig& config, double bucket_width = 2.0);
/// Loads a config file (or "builtin:NAME"), optionally overriding the seed.
RunReport run_experiment_file(const std::string& config_path,
                              std::optional<std::uint64_t> seed = std::nullopt);
ScenarioConfig load_config(const std::string& config_path);

/// Deterministic report contents (summaries, protocol, resources, config).
std::string summary_json(const RunReport& report);
/// CPU timing per node filter.
std::string timing_json(const RunReport& report);
/// One row per sample: method,time_s,display,target,geom_3d,eps_xy,eps_z,
/// true_dist,dpe,pixel_err.
void write_samples_csv(const RunReport& report, std::ostream& out);

struct MethodSample {
  Method method = Method::kRbpf;
  ErrorSample sample;
};
/// Parses a samples CSV. Throws ConfigError with the line number on
/// malformed rows.
std::vector<MethodSample> read_samples_csv(std::istream& in, const std::string& source = "<csv>");
/// Per-method summaries and separation buckets recomputed from samples.
std::string reaggregate_json(const std::vector<MethodSample>& samples, double bucket_width = 2.0);

/// Writes summary.json, timing.json, samples.csv and config.ini into dir.
void write_report(const RunReport& report, const std::string& dir);

enum class SweepAxis { kNumStaticTags, kNlosLevel, kMobility, kTransportDrop, kSeparationBucket };
const char* to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& name);

/// Config for one sweep point. For kSeparationBucket the value is the bucket
/// width and the config is unchanged.
ScenarioConfig apply_sweep_value(const ScenarioConfig& base, SweepAxis axis,
                                 const std::string& value);

/// One run per value, all with the base seed (paired comparison), executed
/// on up to `threads` threads. Results are in value order.
std::vector<RunReport> sweep(const ScenarioConfig& base, SweepAxis axis,
                             const std::vector<std::string>& values, unsigned threads = 0);

}  // namespace relloc
