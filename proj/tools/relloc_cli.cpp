// Command-line front end: run a scenario, sweep a parameter, re-aggregate
// sample CSVs, or list the bundled scenarios.

#include "relloc/experiment.hpp"
#include "relloc/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_brief(const relloc::RunReport& r, std::ostream& out) {
  out << r.scenario << " seed=" << r.seed << "\n";
  for (const auto& m : r.methods) {
    out << "  " << relloc::to_string(m.method) << ": ";
    if (!m.available) {
      out << "unavailable (" << m.note << ")\n";
      continue;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "n=%zu geom p50=%.3f p90=%.3f p99=%.3f m, dpe p50=%.4f\n",
                  m.geom.count, m.geom.p50, m.geom.p90, m.geom.p99, m.dpe.p50);
    out << buf;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative localization simulator and evaluation harness"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format = "json";
  std::string axis;
  std::string values;
  unsigned threads = 0;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "Run one scenario and write its report");
  run->add_option("--config", config, "Scenario file or builtin:NAME")->required();
  auto* run_seed = run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Directory for summary.json, samples.csv, timing.json");
  run->add_option("--format", format, "Stdout format")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--set", overrides, "Override a key: section.key=value");
  bool write_events = false;
  run->add_flag("--events", write_events, "Also write events.csv and truth.csv (needs --out)");

  auto* sw = app.add_subcommand("sweep", "Run one scenario per value of a parameter");
  sw->add_option("--config", config, "Scenario file or builtin:NAME")->required();
  auto* sweep_seed = sw->add_option("--seed", seed, "Override the scenario seed");
  sw->add_option("--axis", axis,
                 "num_static_tags | nlos_level | mobility | transport_drop | separation_bucket")
      ->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  sw->add_option("--out", out_dir, "Directory for per-value reports");
  sw->add_option("--format", format, "Stdout format")->check(CLI::IsMember({"csv", "json"}));
  sw->add_option("--threads", threads, "Worker threads (0 = all cores)");
  sw->add_option("--set", overrides, "Override a key: section.key=value");

  std::string samples_path;
  double bucket_width = 2.0;
  auto* rep = app.add_subcommand("report", "Re-aggregate a samples CSV");
  rep->add_option("samples", samples_path, "samples.csv from a run")->required();
  rep->add_option("--bucket-width", bucket_width, "Separation bucket width (m)");

  auto* list = app.add_subcommand("scenarios", "List the bundled scenarios");
  std::string show;
  list->add_option("--show", show, "Print the full config of one scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    auto load = [&](bool seed_given) {
      relloc::ScenarioConfig cfg = relloc::load_config(config);
      if (seed_given) cfg.seed = seed;
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
          throw relloc::ConfigError("--set", 0, "expected section.key=value, got '" + o + "'");
        }
        relloc::apply_override(cfg, o.substr(0, eq), o.substr(eq + 1));
      }
      return cfg;
    };

    if (*run) {
      const relloc::ScenarioConfig cfg = load(run_seed->count() > 0);
      const relloc::WorldRun world = relloc::run_world(cfg);
      const relloc::RunReport report = relloc::evaluate_run(world);
      if (!out_dir.empty()) {
        relloc::write_report(report, out_dir);
        if (write_events) {
          std::ofstream events(out_dir + "/events.csv", std::ios::binary);
          world.log.write_csv(events);
          std::ofstream truth(out_dir + "/truth.csv", std::ios::binary);
          relloc::write_truth_csv(world, truth);
        }
      }
      if (format == "csv") {
        relloc::write_samples_csv(report, std::cout);
      } else {
        std::cout << relloc::summary_json(report);
      }
      print_brief(report, std::cerr);
      return 0;
    }
    if (*sw) {
      const relloc::ScenarioConfig cfg = load(sweep_seed->count() > 0);
      const relloc::SweepAxis a = relloc::parse_sweep_axis(axis);
      const auto vals = split_list(values);
      if (vals.empty()) throw relloc::ConfigError("--values", 0, "no values given");
      const auto reports = relloc::sweep(cfg, a, vals, threads);
      for (std::size_t i = 0; i < reports.size(); ++i) {
        if (!out_dir.empty()) {
          relloc::write_report(reports[i], out_dir + "/" + axis + "=" + vals[i]);
        }
        if (format == "csv") {
          relloc::write_samples_csv(reports[i], std::cout);
        } else {
          std::cout << "{\"" << axis << "\": \"" << vals[i] << "\", \"report\": "
                    << relloc::summary_json(reports[i]) << "}\n";
        }
        std::cerr << axis << "=" << vals[i] << " ";
        print_brief(reports[i], std::cerr);
      }
      return 0;
    }
    if (*rep) {
      std::ifstream in(samples_path);
      if (!in) throw relloc::ConfigError(samples_path, 0, "cannot open file");
      std::cout << relloc::reaggregate_json(relloc::read_samples_csv(in, samples_path), bucket_width);
      return 0;
    }
    if (*list) {
      if (!show.empty()) {
        std::cout << relloc::to_ini(relloc::builtin_scenario(show));
        return 0;
      }
      for (const auto& s : relloc::builtin_scenarios()) {
        std::cout << s.name << "\t" << s.description << "\n";
      }
      return 0;
    }
  } catch (const relloc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
