#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tiersim/config.hpp"
#include "tiersim/report_io.hpp"
#include "tiersim/simulator.hpp"
#include "tiersim/workload.hpp"

namespace tiersim {

struct ScenarioConfig {
  std::string label;
  SimConfig sim;
  // Replaces the nodes with one local node of 1.2x the trace's peak live pages.
  bool all_local = false;
};

enum class Comparator : std::uint8_t { Less, LessEq, Greater, GreaterEq };

std::string_view to_string(Comparator c);

struct Assertion {
  enum class Kind : std::uint8_t { Compare, Argmax };

  Kind kind = Kind::Compare;
  std::string metric;
  // Compare: metric(lhs) <cmp> factor * metric(rhs) + offset. An empty rhs
  // compares against the offset alone.
  std::string lhs;
  Comparator cmp = Comparator::Greater;
  std::string rhs;
  double factor = 1.0;
  double offset = 0.0;
  // Argmax: `expected` must have the largest metric among `candidates`.
  std::vector<std::string> candidates;
  std::string expected;

  std::string describe() const;
};

struct Scenario {
  std::string name;
  std::string description;
  WorkloadSpec workload;
  std::vector<ScenarioConfig> configs;
  std::vector<Assertion> assertions;
};

// Metrics the assertions and comparison table can name. Counter names are
// accepted as well.
const std::vector<std::string>& summary_metrics();
bool is_metric(std::string_view name);
// Throws ConfigError for unknown metrics.
double metric_value(std::string_view metric, const SimReport& report);

// 95th percentile (nearest rank) of per-window local allocation rate.
double p95_local_alloc_rate(const SimReport& report);
// Promotions per second over windows whose live-page footprint exceeds the
// run mean.
double pressure_promotion_rate(const SimReport& report);

struct ConfigOutcome {
  std::string label;
  SimConfig sim;
  SimReport report;
  std::map<std::string, double> metrics;
};

struct AssertionOutcome {
  std::string description;
  bool passed = false;
  double observed = 0.0;
  double threshold = 0.0;
};

struct ScenarioResult {
  std::string name;
  WorkloadSpec workload;
  std::uint64_t trace_events = 0;
  std::uint64_t peak_live_pages = 0;
  std::vector<ConfigOutcome> configs;
  std::vector<AssertionOutcome> assertions;

  bool passed() const;
  const ConfigOutcome& config(std::string_view label) const;
};

const std::vector<std::string>& preset_names();
// Throws ConfigError for unknown names.
Scenario preset(std::string_view name);

// Applies key=value overrides to the workload and every config. Node keys
// are skipped for all-local baselines.
void apply_overrides(Scenario& s, const ConfigMap& overrides);

// Runs every config on one shared trace; configs run on up to `threads`
// worker threads.
ScenarioResult run_scenario(const Scenario& s, unsigned threads = 1);

std::uint64_t peak_live_pages(std::span<const TraceEvent> trace);

Json to_json(const ScenarioResult& r);
// Fixed-width comparison table, one row per config.
std::string comparison_table(const ScenarioResult& r);

}  // namespace tiersim
