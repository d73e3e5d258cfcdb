#include "relloc/experiment.hpp"

#include "relloc/baselines.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace relloc {
namespace {

using nlohmann::json;

constexpr const char* kBuiltinPrefix = "builtin:";

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json summary_to_json(const Summary& s) {
  return json{{"count", s.count},
              {"p50", number(s.p50)},
              {"p90", number(s.p90)},
              {"p99", number(s.p99)},
              {"mean", number(s.mean)}};
}

json buckets_to_json(const std::vector<SeparationBucket>& buckets) {
  json out = json::array();
  for (const auto& b : buckets) {
    out.push_back(json{{"lo", b.lo},
                       {"hi", b.hi},
                       {"count", b.count},
                       {"median_geom", number(b.median_geom)},
                       {"median_dpe", number(b.median_dpe)}});
  }
  return out;
}

void finish_method(MethodResult& m) {
  std::vector<double> geom;
  std::vector<double> dpe;
  for (const auto& s : m.samples) {
    geom.push_back(s.geom_3d);
    dpe.push_back(s.dpe);
  }
  m.geom = summarize(geom);
  m.dpe = summarize(dpe);
}

/// Targets scored for `display` under the pair selection.
bool scored_pair(const ScenarioConfig& cfg, NodeId display, NodeId target) {
  if (display == target || !cfg.is_user(display)) return false;
  if (cfg.is_user(target)) return true;
  return cfg.pairs == PairSelection::kUserToAll && cfg.is_used_tag(target);
}

double parse_field(const std::string& v, const std::string& source, int line) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ConfigError(source, line, "malformed number '" + v + "'");
  }
  return x;
}

}  // namespace

const char* to_string(Method method) {
  switch (method) {
    case Method::kRbpf:
      return "rbpf";
    case Method::kVioOnly:
      return "vio_only";
    case Method::kAnchorOracle:
      return "anchor_oracle";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kRbpf, Method::kVioOnly, Method::kAnchorOracle}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + name + "'");
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  s.p50 = percentile(values, 50.0);
  s.p90 = percentile(values, 90.0);
  s.p99 = percentile(values, 99.0);
  s.mean = values.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : std::accumulate(values.begin(), values.end(), 0.0) /
                                static_cast<double>(values.size());
  return s;
}

const MethodResult& RunReport::method(Method m) const {
  for (const auto& r : methods) {
    if (r.method == m) return r;
  }
  throw std::out_of_range(std::string("report has no series for ") + to_string(m));
}

RunReport evaluate_run(const WorldRun& run, double bucket_width) {
  const ScenarioConfig& cfg = run.config;
  RunReport report;
  report.scenario = cfg.name;
  report.seed = cfg.seed;
  report.config_echo = to_ini(cfg);
  report.bucket_width = bucket_width;

  std::vector<double> times;
  for (const auto& s : run.snapshots) times.push_back(s.time);

  // Truth in each display's VIO frame: rotate the world offset by the
  // display's current VIO frame heading.
  auto truth_rel = [](const TruthRecord& a, const TruthRecord& b) {
    return rotate_yaw(b.position - a.position, -a.frame_yaw);
  };

  auto score = [&](MethodResult& m, std::size_t snap_index, NodeId a, NodeId b,
                   const std::optional<Vec3>& est) {
    const Snapshot& snap = run.snapshots[snap_index];
    const TruthRecord& ta = snap.truth[a - 1];
    const TruthRecord& tb = snap.truth[b - 1];
    const Vec3 truth = truth_rel(ta, tb);
    if (truth.norm() < 1e-6) {
      if (m.method == Method::kRbpf) ++report.degenerate_samples;
      return;
    }
    if (!est) {
      ++m.missing;
      return;
    }
    try {
      m.samples.push_back(make_error_sample(snap.time, a, b, *est, truth, cfg.camera));
    } catch (const DegenerateDepth&) {
      if (m.method == Method::kRbpf) ++report.degenerate_samples;
    }
  };

  const auto node_count = static_cast<NodeId>(run.nodes.size());

  MethodResult rbpf;
  rbpf.method = Method::kRbpf;
  for (std::size_t i = 0; i < run.snapshots.size(); ++i) {
    const Snapshot& snap = run.snapshots[i];
    for (NodeId a = 1; a <= node_count; ++a) {
      for (NodeId b = 1; b <= node_count; ++b) {
        if (!scored_pair(cfg, a, b)) continue;
        std::optional<Vec3> est;
        const auto ia = snap.estimates.find(a);
        if (ia != snap.estimates.end()) {
          const auto ib = ia->second.find(b);
          if (ib != ia->second.end()) est = ib->second.state.position();
        }
        score(rbpf, i, a, b, est);
      }
    }
  }
  finish_method(rbpf);
  report.buckets = bucket_by_separation(rbpf.samples, bucket_width);
  report.methods.push_back(std::move(rbpf));

  if (cfg.baselines) {
    auto score_series = [&](MethodResult& m, const PoseSeries& series) {
      for (std::size_t i = 0; i < series.poses.size(); ++i) {
        const auto& poses = series.poses[i];
        for (NodeId a = 1; a <= node_count; ++a) {
          for (NodeId b = 1; b <= node_count; ++b) {
            if (!scored_pair(cfg, a, b)) continue;
            std::optional<Vec3> est;
            const auto pa = poses.find(a);
            const auto pb = poses.find(b);
            if (pa != poses.end() && pb != poses.end()) {
              est = relative_in_display_frame(pa->second, pb->second);
            }
            score(m, i, a, b, est);
          }
        }
      }
      finish_method(m);
    };

    MethodResult vio;
    vio.method = Method::kVioOnly;
    std::map<NodeId, KnownStart> starts;
    for (const NodeInfo& n : run.nodes) starts[n.id] = KnownStart{n.start_position, n.start_yaw};
    score_series(vio, vio_only_baseline(run.log, starts, times));
    report.methods.push_back(std::move(vio));

    MethodResult oracle;
    oracle.method = Method::kAnchorOracle;
    std::map<NodeId, Vec3> anchors;
    for (const NodeInfo& n : run.nodes) {
      if (!n.user) anchors[n.id] = n.start_position;
    }
    AnchorBaselineParams params;
    params.vio = cfg.filter.vio;
    params.range = cfg.filter.range;
    params.vertical_extent = cfg.filter.vertical_extent;
    params.recovery_fraction = cfg.filter.recovery_fraction;
    params.resample = cfg.filter.resample;
    params.roughening = cfg.filter.roughening;
    params.vio_rate = cfg.anchor_vio_rate;
    params.seed = derive_seed(cfg.seed, 500);
    try {
      score_series(oracle, anchor_oracle_baseline(run.log, anchors, times, params));
    } catch (const NoAnchors& e) {
      oracle.available = false;
      oracle.note = e.what();
      finish_method(oracle);
    }
    report.methods.push_back(std::move(oracle));
  }

  const double duration = cfg.duration;
  report.protocol.t_uwb = run.t_uwb;
  report.protocol.attempts = run.protocol.attempts;
  report.protocol.successes = run.protocol.successes;
  report.protocol.collisions = run.protocol.collisions;
  report.protocol.range_rate_hz = static_cast<double>(run.protocol.successes) / duration;
  report.protocol.collision_rate =
      run.protocol.attempts
          ? static_cast<double>(run.protocol.collisions) / static_cast<double>(run.protocol.attempts)
          : 0.0;
  if (!run.protocol.pair_successes.empty()) {
    double sum = 0.0;
    for (const auto& [pair, n] : run.protocol.pair_successes) sum += static_cast<double>(n);
    report.protocol.mean_pair_rate_hz =
        sum / static_cast<double>(run.protocol.pair_successes.size()) / duration;
  }

  for (const auto& [id, fu] : run.filters) {
    report.resources.push_back(NodeResources{id, fu.peak_memory_bytes, fu.tracked_nodes, fu.counters});
    report.cpu_seconds[id] = fu.cpu_seconds;
  }
  for (const auto& [link, usage] : run.links) {
    report.max_message_bytes = std::max(report.max_message_bytes, usage.max_message_bytes);
    report.peak_link_bits_per_second =
        std::max(report.peak_link_bits_per_second, usage.peak_bits_per_second);
  }
  return report;
}

RunReport run_experiment(const ScenarioConfig& config, double bucket_width) {
  return evaluate_run(run_world(config), bucket_width);
}

ScenarioConfig load_config(const std::string& config_path) {
  if (config_path.rfind(kBuiltinPrefix, 0) == 0) {
    return builtin_scenario(config_path.substr(std::string(kBuiltinPrefix).size()));
  }
  return load_scenario_file(config_path);
}

RunReport run_experiment_file(const std::string& config_path, std::optional<std::uint64_t> seed) {
  ScenarioConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  return run_experiment(cfg);
}

std::string summary_json(const RunReport& report) {
  json j;
  j["scenario"] = report.scenario;
  j["seed"] = report.seed;
  json methods = json::object();
  for (const auto& m : report.methods) {
    json jm{{"available", m.available},
            {"geom_3d", summary_to_json(m.geom)},
            {"dpe", summary_to_json(m.dpe)},
            {"missing", m.missing}};
    if (!m.note.empty()) jm["note"] = m.note;
    methods[to_string(m.method)] = jm;
  }
  j["methods"] = methods;
  j["separation_buckets"] = json{{"width", report.bucket_width},
                                 {"rbpf", buckets_to_json(report.buckets)}};
  j["degenerate_samples"] = report.degenerate_samples;
  j["protocol"] = json{{"t_uwb", report.protocol.t_uwb},
                       {"attempts", report.protocol.attempts},
                       {"successes", report.protocol.successes},
                       {"collisions", report.protocol.collisions},
                       {"range_rate_hz", report.protocol.range_rate_hz},
                       {"collision_rate", report.protocol.collision_rate},
                       {"mean_pair_rate_hz", report.protocol.mean_pair_rate_hz}};
  json res = json::array();
  for (const auto& r : report.resources) {
    res.push_back(json{{"node", r.node},
                       {"peak_memory_bytes", r.peak_memory_bytes},
                       {"tracked_nodes", r.tracked_nodes},
                       {"ranges_applied", r.counters.ranges_applied},
                       {"stale_ranges", r.counters.stale_ranges},
                       {"degenerate_updates", r.counters.degenerate_updates},
                       {"duplicate_deltas", r.counters.duplicate_deltas},
                       {"discarded_deltas", r.counters.discarded_deltas}});
  }
  j["resources"] = res;
  j["bandwidth"] = json{{"max_message_bytes", report.max_message_bytes},
                        {"peak_link_bits_per_second", report.peak_link_bits_per_second}};
  j["config"] = report.config_echo;
  return j.dump(2) + "\n";
}

std::string timing_json(const RunReport& report) {
  json j = json::object();
  json nodes = json::array();
  for (const auto& [id, s] : report.cpu_seconds) nodes.push_back(json{{"node", id}, {"cpu_seconds", s}});
  j["filters"] = nodes;
  return j.dump(2) + "\n";
}

void write_samples_csv(const RunReport& report, std::ostream& out) {
  out << "method,time_s,display,target,geom_3d,eps_xy,eps_z,true_dist,dpe,pixel_err\n";
  char buf[512];
  for (const auto& m : report.methods) {
    for (const auto& s : m.samples) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%u,%u,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    to_string(m.method), s.time, static_cast<unsigned>(s.display),
                    static_cast<unsigned>(s.target), s.geom_3d, s.eps_xy, s.eps_z, s.true_dist,
                    s.dpe, s.pixel_err);
      out << buf;
    }
  }
}

std::vector<MethodSample> read_samples_csv(std::istream& in, const std::string& source) {
  std::vector<MethodSample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("method,", 0) == 0) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 10) {
      throw ConfigError(source, line_no, "expected 10 columns, got " + std::to_string(cols.size()));
    }
    MethodSample ms;
    try {
      ms.method = parse_method(cols[0]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, line_no, e.what());
    }
    ErrorSample& s = ms.sample;
    s.time = parse_field(cols[1], source, line_no);
    s.display = static_cast<NodeId>(parse_field(cols[2], source, line_no));
    s.target = static_cast<NodeId>(parse_field(cols[3], source, line_no));
    s.geom_3d = parse_field(cols[4], source, line_no);
    s.eps_xy = parse_field(cols[5], source, line_no);
    s.eps_z = parse_field(cols[6], source, line_no);
    s.true_dist = parse_field(cols[7], source, line_no);
    s.dpe = parse_field(cols[8], source, line_no);
    s.pixel_err = parse_field(cols[9], source, line_no);
    out.push_back(ms);
  }
  return out;
}

std::string reaggregate_json(const std::vector<MethodSample>& samples, double bucket_width) {
  std::map<Method, std::vector<ErrorSample>> by_method;
  for (const auto& ms : samples) by_method[ms.method].push_back(ms.sample);
  json j;
  json methods = json::object();
  for (const auto& [method, list] : by_method) {
    MethodResult m;
    m.method = method;
    m.samples = list;
    finish_method(m);
    methods[to_string(method)] = json{{"geom_3d", summary_to_json(m.geom)},
                                      {"dpe", summary_to_json(m.dpe)},
                                      {"separation_buckets",
                                       buckets_to_json(bucket_by_separation(list, bucket_width))}};
  }
  j["methods"] = methods;
  j["bucket_width"] = bucket_width;
  return j.dump(2) + "\n";
}

void write_report(const RunReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("summary.json");
    f << summary_json(report);
  }
  {
    auto f = open("timing.json");
    f << timing_json(report);
  }
  {
    auto f = open("samples.csv");
    write_samples_csv(report, f);
  }
  {
    auto f = open("config.ini");
    f << report.config_echo;
  }
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNumStaticTags:
      return "num_static_tags";
    case SweepAxis::kNlosLevel:
      return "nlos_level";
    case SweepAxis::kMobility:
      return "mobility";
    case SweepAxis::kTransportDrop:
      return "transport_drop";
    case SweepAxis::kSeparationBucket:
      return "separation_bucket";
  }
  return "?";
}

SweepAxis parse_sweep_axis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::kNumStaticTags, SweepAxis::kNlosLevel, SweepAxis::kMobility,
                      SweepAxis::kTransportDrop, SweepAxis::kSeparationBucket}) {
    if (name == to_string(a)) return a;
  }
  throw ConfigError("sweep", 0, "unknown sweep axis '" + name + "'");
}

ScenarioConfig apply_sweep_value(const ScenarioConfig& base, SweepAxis axis,
                                 const std::string& value) {
  ScenarioConfig cfg = base;
  switch (axis) {
    case SweepAxis::kNumStaticTags:
      // Tags already deployed stay deployed; only the subset in use varies.
      // Parse against an unbounded tag count, then deploy enough tags.
      cfg.tags = std::numeric_limits<std::size_t>::max() / 2;
      apply_override(cfg, "filter.tag_subset", value);
      cfg.tags = std::max(base.tags, cfg.tag_subset);
      cfg.validate();
      break;
    case SweepAxis::kNlosLevel:
      apply_override(cfg, "noise.p_nlos", value);
      break;
    case SweepAxis::kMobility:
      apply_override(cfg, "nodes.mobility", value);
      break;
    case SweepAxis::kTransportDrop:
      apply_override(cfg, "transport.drop_prob", value);
      break;
    case SweepAxis::kSeparationBucket: {
      char* end = nullptr;
      const double w = std::strtod(value.c_str(), &end);
      if (value.empty() || end != value.c_str() + value.size() || !(w > 0.0)) {
        throw ConfigError("sweep", 0, "bucket width must be a positive number");
      }
      break;
    }
  }
  return cfg;
}

std::vector<RunReport> sweep(const ScenarioConfig& base, SweepAxis axis,
                             const std::vector<std::string>& values, unsigned threads) {
  std::vector<ScenarioConfig> configs;
  std::vector<double> widths;
  for (const auto& v : values) {
    configs.push_back(apply_sweep_value(base, axis, v));
    widths.push_back(axis == SweepAxis::kSeparationBucket ? std::stod(v) : 2.0);
  }
  std::vector<RunReport> out(configs.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(configs.size(), 1)));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out[i] = run_experiment(configs[i], widths[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace relloc
