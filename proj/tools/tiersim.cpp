// tiersim command-line driver: gen, sim, scenario, characterize.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tiersim/chameleon.hpp"
#include "tiersim/config.hpp"
#include "tiersim/report_io.hpp"
#include "tiersim/scenario.hpp"
#include "tiersim/simulator.hpp"
#include "tiersim/trace.hpp"
#include "tiersim/workload.hpp"

namespace fs = std::filesystem;
using namespace tiersim;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitAssertion = 2;

// Run-level keys that live in manifests next to the configuration.
constexpr std::string_view kRunPrefix = "run.";

struct Common {
  std::string config_file;
  std::vector<std::string> settings;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key=value file (for example an emitted manifest)");
  cmd->add_option("--set", c.settings, "override, key=value (repeatable)");
}

// Splits the file and --set settings into run-level keys and configuration.
std::pair<ConfigMap, ConfigMap> gather(const Common& c) {
  ConfigMap all;
  if (!c.config_file.empty()) all = read_config(c.config_file);
  for (const std::string& s : c.settings) {
    auto [k, v] = split_setting(s);
    all[k] = v;
  }
  ConfigMap run;
  ConfigMap cfg;
  for (auto& [k, v] : all) (k.starts_with(kRunPrefix) ? run : cfg)[k] = v;
  return {run, cfg};
}

std::string run_value(const ConfigMap& run, const std::string& key, const std::string& fallback) {
  const auto it = run.find(std::string(kRunPrefix) + key);
  return it == run.end() ? fallback : it->second;
}

void check_run_keys(const ConfigMap& run, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : run) {
    const std::string_view name = std::string_view(k).substr(kRunPrefix.size());
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      throw ConfigError(fmt::format("unknown key '{}'", k));
    }
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

fs::path manifest_path(const fs::path& report) { return fs::path(report.string() + ".manifest"); }

void write_manifest(const fs::path& report, const std::string& command, const ConfigMap& run, const ConfigMap& config) {
  std::ostringstream out;
  out << "# tiersim " << command << " manifest\n";
  write_config(run, out);
  write_config(config, out);
  write_file(manifest_path(report), out.str());
}

int cmd_gen(const Common& common, const std::string& kind, std::optional<std::uint64_t> pages,
            std::optional<std::uint64_t> seed, std::optional<double> duration_ms, const std::string& out_path) {
  auto [run_keys_in, cfg] = gather(common);
  check_run_keys(run_keys_in, {});
  RunConfig rc = from_config_map(cfg);
  if (!kind.empty()) apply_setting(rc, "workload.kind", kind);
  if (pages) rc.workload.total_pages = *pages;
  if (seed) rc.workload.seed = *seed;
  if (duration_ms) rc.workload.duration_ns = static_cast<SimTime>(*duration_ms * kNsPerMs);
  const std::vector<TraceEvent> trace = generate(rc.workload);
  write_trace(trace, fs::path(out_path));
  ConfigMap resolved;
  for (auto& [k, v] : to_config_map(rc))
    if (k.starts_with("workload.")) resolved[k] = v;
  write_manifest(out_path, "gen", {}, resolved);
  std::cerr << fmt::format("wrote {} events to {}\n", trace.size(), out_path);
  return 0;
}

int cmd_sim(const Common& common, std::string trace_path, const std::string& policy, std::string out_path,
            std::string format, const std::string& csv_path) {
  auto [run_keys_in, cfg] = gather(common);
  check_run_keys(run_keys_in, {"trace", "format"});
  RunConfig rc = from_config_map(cfg);
  if (!policy.empty()) apply_setting(rc, "policy.kind", policy);
  if (trace_path.empty()) trace_path = run_value(run_keys_in, "trace", "");
  if (format.empty()) format = run_value(run_keys_in, "format", "json");
  if (format != "json" && format != "csv") throw ConfigError(fmt::format("unknown format '{}'", format));

  const std::vector<TraceEvent> trace = trace_path.empty() ? generate(rc.workload) : read_trace(fs::path(trace_path));
  const SimReport report = tiersim::run(trace, rc.sim);

  std::ostringstream body;
  if (format == "json")
    write_json(to_json(report), body);
  else
    write_windows_csv(report.windows, body);
  write_file(out_path, body.str());
  if (!csv_path.empty()) {
    std::ostringstream csv;
    write_windows_csv(report.windows, csv);
    write_file(csv_path, csv.str());
  }

  ConfigMap run_keys{{"run.format", format}};
  if (!trace_path.empty()) run_keys["run.trace"] = fs::absolute(trace_path).string();
  ConfigMap resolved = to_config_map(rc);
  if (!trace_path.empty()) std::erase_if(resolved, [](const auto& kv) { return kv.first.starts_with("workload."); });
  std::erase_if(resolved, [](const auto& kv) { return kv.first.starts_with("chameleon."); });
  write_manifest(out_path, "sim", run_keys, resolved);
  std::cerr << fmt::format("local_traffic_fraction={:.4f} throughput_proxy={:.6g} promotions={} demotions={}\n",
                           report.totals.local_traffic_fraction, report.throughput_proxy, report.counters.promotions(),
                           report.counters.demotions());
  return 0;
}

int cmd_scenario(const Common& common, std::string name, const std::string& out_path, unsigned threads, bool list) {
  if (list) {
    for (const std::string& n : preset_names()) std::cout << n << '\n';
    return 0;
  }
  auto [run_keys_in, cfg] = gather(common);
  check_run_keys(run_keys_in, {"scenario"});
  if (name.empty()) name = run_value(run_keys_in, "scenario", "");
  if (name.empty()) throw ConfigError("scenario name required");
  Scenario s = preset(name);
  for (const auto& [k, v] : cfg) {
    RunConfig probe;
    apply_setting(probe, k, v);
  }
  apply_overrides(s, cfg);
  const ScenarioResult result = run_scenario(s, threads);
  std::cout << comparison_table(result);
  const std::string path = out_path.empty() ? name + ".json" : out_path;
  std::ostringstream body;
  write_json(to_json(result), body);
  write_file(path, body.str());
  write_manifest(path, "scenario", {{"run.scenario", name}}, cfg);
  return result.passed() ? 0 : kExitAssertion;
}

int cmd_characterize(const Common& common, std::string trace_path, const std::string& out_path, std::string format) {
  auto [run_keys_in, cfg] = gather(common);
  check_run_keys(run_keys_in, {"trace", "format"});
  RunConfig rc = from_config_map(cfg);
  if (trace_path.empty()) trace_path = run_value(run_keys_in, "trace", "");
  if (format.empty()) format = run_value(run_keys_in, "format", "csv");
  if (format != "json" && format != "csv") throw ConfigError(fmt::format("unknown format '{}'", format));
  const std::vector<TraceEvent> trace = trace_path.empty() ? generate(rc.workload) : read_trace(fs::path(trace_path));
  const Characterization ch = characterize(trace, rc.chameleon);
  std::ostringstream body;
  if (format == "csv")
    write_interval_csv(ch.intervals, body);
  else
    write_json(to_json(ch), body);
  write_file(out_path, body.str());

  ConfigMap run_keys{{"run.format", format}};
  if (!trace_path.empty()) run_keys["run.trace"] = fs::absolute(trace_path).string();
  ConfigMap resolved;
  for (auto& [k, v] : to_config_map(rc)) {
    if (k.starts_with("chameleon.") || (trace_path.empty() && k.starts_with("workload."))) resolved[k] = v;
  }
  write_manifest(out_path, "characterize", run_keys, resolved);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiered-memory page placement simulator"};
  app.require_subcommand(1);

  Common gen_common;
  std::string gen_kind;
  std::optional<std::uint64_t> gen_pages;
  std::optional<std::uint64_t> gen_seed;
  std::optional<double> gen_duration;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "generate a synthetic trace");
  add_common(gen, gen_common);
  gen->add_option("--kind", gen_kind, "zipf|web|cache|warehouse|pingpong|bursty|uniform");
  gen->add_option("--pages", gen_pages, "total pages");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--duration-ms", gen_duration, "simulated duration in milliseconds");
  gen->add_option("-o,--out", gen_out, "trace file")->required();

  Common sim_common;
  std::string sim_trace, sim_policy, sim_out = "report.json", sim_format, sim_csv;
  auto* sim = app.add_subcommand("sim", "simulate one trace under one policy");
  add_common(sim, sim_common);
  sim->add_option("--trace", sim_trace, "input trace (default: generate from workload.* settings)");
  sim->add_option("--policy", sim_policy, "default|numa|tpp|autotiering");
  sim->add_option("-o,--out", sim_out, "report path");
  sim->add_option("--format", sim_format, "json|csv");
  sim->add_option("--csv", sim_csv, "also write the per-window series as CSV");

  Common sc_common;
  std::string sc_name, sc_out;
  unsigned sc_threads = 1;
  bool sc_list = false;
  auto* sc = app.add_subcommand("scenario", "run a preset experiment");
  add_common(sc, sc_common);
  sc->add_option("name", sc_name, "preset name");
  sc->add_option("-o,--out", sc_out, "JSON report path (default <name>.json)");
  sc->add_option("-j,--threads", sc_threads, "worker threads");
  sc->add_flag("--list", sc_list, "list presets");

  Common ch_common;
  std::string ch_trace, ch_out = "intervals.csv", ch_format;
  auto* ch = app.add_subcommand("characterize", "interval hotness statistics for a trace");
  add_common(ch, ch_common);
  ch->add_option("--trace", ch_trace, "input trace (default: generate from workload.* settings)");
  ch->add_option("-o,--out", ch_out, "output path");
  ch->add_option("--format", ch_format, "csv|json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(gen_common, gen_kind, gen_pages, gen_seed, gen_duration, gen_out);
    if (*sim) return cmd_sim(sim_common, sim_trace, sim_policy, sim_out, sim_format, sim_csv);
    if (*sc) return cmd_scenario(sc_common, sc_name, sc_out, sc_threads, sc_list);
    if (*ch) return cmd_characterize(ch_common, ch_trace, ch_out, ch_format);
  } catch (const std::exception& e) {
    std::cerr << "tiersim: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
