#include "tiersim/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace tiersim {

namespace {

constexpr double kBaselineHeadroom = 1.2;

PolicySpec policy_of(PolicyKind kind, SimTime scan_period) {
  PolicySpec p;
  p.kind = kind;
  p.scan_period_ns = scan_period;
  return p;
}

ScenarioConfig config(std::string label, std::uint64_t local, std::uint64_t cxl, PolicySpec policy) {
  ScenarioConfig c{std::move(label), SimConfig::two_tier(local, cxl), false};
  c.sim.policy = policy;
  return c;
}

ScenarioConfig all_local_baseline() {
  ScenarioConfig c{"all-local", SimConfig::two_tier(1, 1), true};
  return c;
}

Assertion compare(std::string metric, std::string lhs, Comparator cmp, std::string rhs, double factor = 1.0,
                  double offset = 0.0) {
  Assertion a;
  a.metric = std::move(metric);
  a.lhs = std::move(lhs);
  a.cmp = cmp;
  a.rhs = std::move(rhs);
  a.factor = factor;
  a.offset = offset;
  return a;
}

bool holds(double lhs, Comparator cmp, double rhs) {
  switch (cmp) {
    case Comparator::Less: return lhs < rhs;
    case Comparator::LessEq: return lhs <= rhs;
    case Comparator::Greater: return lhs > rhs;
    case Comparator::GreaterEq: return lhs >= rhs;
  }
  return false;
}

WorkloadSpec cache_workload(bool cache1) {
  WorkloadSpec w;
  w.kind = WorkloadKind::CacheLike;
  w.total_pages = 60'000;
  w.duration_ns = 2 * kNsPerSec;
  w.ops_rate = 2.0;
  w.churn_rate = 4'000.0;
  w.seed = cache1 ? 11 : 12;
  if (cache1) {
    w.anon_fraction = 0.3;
    w.hot_fraction = 0.3;
    w.file_hot_fraction = 0.05;
    w.anon_access_share = 0.9;
  } else {
    w.anon_fraction = 0.5;
    w.hot_fraction = 0.15;
    w.file_hot_fraction = 0.1;
    w.anon_access_share = 0.8;
  }
  return w;
}

constexpr SimTime kDeskScanPeriod = 20 * kNsPerMs;

Scenario web_2to1() {
  Scenario s;
  s.name = "web-2to1";
  s.description = "Web-like growth on 2:1 local:CXL capacity";
  WorkloadSpec& w = s.workload;
  w.kind = WorkloadKind::WebLike;
  w.total_pages = 60'000;
  w.hot_fraction = 0.1;
  w.file_hot_fraction = 0.05;
  w.duration_ns = 2 * kNsPerSec;
  w.ops_rate = 1.0;
  w.warmup_fraction = 0.1;
  w.growth_fraction = 0.02;
  w.seed = 7;
  s.configs = {
      config("default", 44'000, 22'000, policy_of(PolicyKind::DefaultLinux, kDeskScanPeriod)),
      config("tpp", 44'000, 22'000, policy_of(PolicyKind::Tpp, kDeskScanPeriod)),
      all_local_baseline(),
  };
  s.assertions = {
      compare("local_traffic_fraction", "tpp", Comparator::GreaterEq, "default", 1.0, 0.15),
      compare("throughput_proxy", "tpp", Comparator::GreaterEq, "all-local", 0.97),
  };
  return s;
}

Scenario cache(bool cache1, bool two_to_one) {
  Scenario s;
  s.name = fmt::format("cache{}-{}", cache1 ? 1 : 2, two_to_one ? "2to1" : "1to4");
  s.description = fmt::format("Cache-like {} on {} local:CXL capacity", cache1 ? "(anon-hot)" : "(file-hot)",
                              two_to_one ? "2:1" : "1:4");
  s.workload = cache_workload(cache1);
  const std::uint64_t memory = 66'000;
  const std::uint64_t local = two_to_one ? memory * 2 / 3 : memory / 5;
  const std::uint64_t cxl = memory - local;
  s.configs = {
      config("default", local, cxl, policy_of(PolicyKind::DefaultLinux, kDeskScanPeriod)),
      config("numa", local, cxl, policy_of(PolicyKind::NumaBalancing, kDeskScanPeriod)),
      config("tpp", local, cxl, policy_of(PolicyKind::Tpp, kDeskScanPeriod)),
      config("autotiering", local, cxl, policy_of(PolicyKind::AutoTieringLike, kDeskScanPeriod)),
      all_local_baseline(),
  };
  s.assertions = {
      compare("local_traffic_fraction", "tpp", Comparator::Greater, "default"),
      compare("throughput_proxy", "tpp", Comparator::Greater, "default"),
  };
  if (!two_to_one) s.assertions.push_back(compare("promotions", "numa", Comparator::Less, "tpp", 0.2));
  return s;
}

Scenario pingpong_filter() {
  Scenario s;
  s.name = "pingpong-filter";
  s.description = "One-touch CXL pages with and without the active-LRU promotion filter";
  WorkloadSpec& w = s.workload;
  w.kind = WorkloadKind::PingPong;
  w.total_pages = 40'000;
  w.one_touch_fraction = 0.7;
  w.hot_fraction = 0.3;
  w.duration_ns = 2 * kNsPerSec;
  w.ops_rate = 1.0;
  w.seed = 3;
  PolicySpec on = policy_of(PolicyKind::Tpp, kDeskScanPeriod);
  PolicySpec off = on;
  off.active_lru_filter = false;
  s.configs = {
      config("filter-on", 14'000, 30'000, on),
      config("filter-off", 14'000, 30'000, off),
  };
  s.assertions = {
      compare("promotions", "filter-on", Comparator::LessEq, "filter-off", 0.5),
      compare("pgpromote_candidate_demoted", "filter-on", Comparator::LessEq, "filter-off", 0.7),
  };
  return s;
}

Scenario bursty_decoupling() {
  Scenario s;
  s.name = "bursty-decoupling";
  s.description = "Allocation bursts with decoupled and coupled reclaim watermarks";
  WorkloadSpec& w = s.workload;
  w.kind = WorkloadKind::BurstyAlloc;
  w.total_pages = 30'000;
  w.hot_fraction = 0.2;
  w.duration_ns = 2 * kNsPerSec;
  w.ops_rate = 2.0;
  w.burst_period_ns = 100 * kNsPerMs;
  w.burst_duty = 0.1;
  w.burst_alloc_share = 0.7;
  w.burst_lifetime_ns = 50 * kNsPerMs;
  w.seed = 5;
  PolicySpec decoupled = policy_of(PolicyKind::Tpp, kDeskScanPeriod);
  PolicySpec coupled = decoupled;
  coupled.decouple_watermarks = false;
  s.configs = {
      config("decoupled", 32'000, 40'000, decoupled),
      config("coupled", 32'000, 40'000, coupled),
  };
  s.assertions = {
      compare("p95_local_alloc_rate", "decoupled", Comparator::GreaterEq, "coupled", 1.2),
      compare("pressure_promotion_rate", "coupled", Comparator::Less, "decoupled", 0.2),
  };
  return s;
}

Scenario interleave_sweep() {
  Scenario s;
  s.name = "interleave-sweep";
  s.description = "N:K interleave under uniform saturating traffic, bandwidths 2.5:1";
  WorkloadSpec& w = s.workload;
  w.kind = WorkloadKind::UniformBandwidth;
  w.total_pages = 20'000;
  w.duration_ns = kNsPerSec / 2;
  w.ops_rate = 5.0;
  w.seed = 9;
  Assertion argmax;
  argmax.kind = Assertion::Kind::Argmax;
  argmax.metric = "bandwidth_utilization";
  argmax.expected = "2:1";
  for (auto [n, k] : {std::pair{1u, 1u}, {2u, 1u}, {3u, 1u}, {1u, 2u}}) {
    PolicySpec p = policy_of(PolicyKind::DefaultLinux, kDeskScanPeriod);
    p.interleave = Interleave{n, k};
    ScenarioConfig c = config(fmt::format("{}:{}", n, k), 30'000, 30'000, p);
    c.sim.nodes[0].bandwidth = 2.5;
    c.sim.nodes[1].bandwidth = 1.0;
    s.configs.push_back(std::move(c));
    argmax.candidates.push_back(s.configs.back().label);
  }
  s.assertions = {argmax};
  return s;
}

Scenario typeaware_cache() {
  Scenario s;
  s.name = "typeaware-cache";
  s.description = "TPP with and without page-type-aware allocation on a file-heavy cache";
  s.workload = cache_workload(true);
  PolicySpec plain = policy_of(PolicyKind::Tpp, kDeskScanPeriod);
  PolicySpec aware = plain;
  aware.type_aware_alloc = true;
  s.configs = {
      config("tpp", 44'000, 22'000, plain),
      config("tpp-typeaware", 44'000, 22'000, aware),
  };
  s.assertions = {
      compare("pgdemote_file", "tpp-typeaware", Comparator::Less, "tpp"),
      compare("local_traffic_fraction", "tpp-typeaware", Comparator::GreaterEq, "tpp", 1.0, -0.02),
  };
  return s;
}

std::uint64_t counter_by_name(std::string_view name, const CounterSet& c, bool& found) {
  for (std::size_t i = 0; i < kNumCounters; ++i) {
    if (kCounterNames[i] == name) {
      found = true;
      return c.values()[i];
    }
  }
  found = false;
  return 0;
}

}  // namespace

std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::Less: return "<";
    case Comparator::LessEq: return "<=";
    case Comparator::Greater: return ">";
    case Comparator::GreaterEq: return ">=";
  }
  return "?";
}

std::string Assertion::describe() const {
  if (kind == Kind::Argmax) return fmt::format("argmax {} over {} == {}", metric, fmt::join(candidates, ","), expected);
  if (rhs.empty()) return fmt::format("{}[{}] {} {}", metric, lhs, to_string(cmp), offset);
  std::string s = fmt::format("{}[{}] {} ", metric, lhs, to_string(cmp));
  if (factor != 1.0) s += fmt::format("{} * ", factor);
  s += fmt::format("{}[{}]", metric, rhs);
  if (offset > 0.0) s += fmt::format(" + {}", offset);
  if (offset < 0.0) s += fmt::format(" - {}", -offset);
  return s;
}

const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> names = {
      "local_traffic_fraction", "throughput_proxy",     "bandwidth_utilization",   "promotions",
      "demotions",              "pgpromote_candidate_demoted", "p95_local_alloc_rate", "pressure_promotion_rate",
  };
  return names;
}

bool is_metric(std::string_view name) {
  if (std::find(summary_metrics().begin(), summary_metrics().end(), name) != summary_metrics().end()) return true;
  return std::find(kCounterNames.begin(), kCounterNames.end(), name) != kCounterNames.end();
}

double p95_local_alloc_rate(const SimReport& report) {
  if (report.windows.empty()) return 0.0;
  std::vector<double> rates;
  rates.reserve(report.windows.size());
  for (const WindowStats& w : report.windows) rates.push_back(w.allocation_rate_local);
  std::sort(rates.begin(), rates.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(rates.size())));
  return rates[std::max<std::size_t>(rank, 1) - 1];
}

double pressure_promotion_rate(const SimReport& report) {
  if (report.windows.empty()) return 0.0;
  double mean = 0.0;
  for (const WindowStats& w : report.windows) mean += static_cast<double>(w.live_pages);
  mean /= static_cast<double>(report.windows.size());
  std::uint64_t promotions = 0;
  std::uint64_t windows = 0;
  for (const WindowStats& w : report.windows) {
    if (static_cast<double>(w.live_pages) > mean) {
      promotions += w.promotions;
      ++windows;
    }
  }
  if (windows == 0) return 0.0;
  const double seconds = static_cast<double>(windows * report.report_window_ns) / kNsPerSec;
  return static_cast<double>(promotions) / seconds;
}

double metric_value(std::string_view metric, const SimReport& r) {
  if (metric == "local_traffic_fraction") return r.totals.local_traffic_fraction;
  if (metric == "throughput_proxy") return r.throughput_proxy;
  if (metric == "bandwidth_utilization") return r.totals.bandwidth_utilization;
  if (metric == "promotions") return static_cast<double>(r.counters.promotions());
  if (metric == "demotions") return static_cast<double>(r.counters.demotions());
  if (metric == "p95_local_alloc_rate") return p95_local_alloc_rate(r);
  if (metric == "pressure_promotion_rate") return pressure_promotion_rate(r);
  bool found = false;
  const std::uint64_t v = counter_by_name(metric, r.counters, found);
  if (!found) throw ConfigError(fmt::format("unknown metric '{}'", metric));
  return static_cast<double>(v);
}

bool ScenarioResult::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const AssertionOutcome& a) { return a.passed; });
}

const ConfigOutcome& ScenarioResult::config(std::string_view label) const {
  for (const ConfigOutcome& c : configs)
    if (c.label == label) return c;
  throw ConfigError(fmt::format("scenario {} has no config '{}'", name, label));
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "web-2to1",        "cache1-2to1",       "cache2-2to1",      "cache1-1to4",     "cache2-1to4",
      "pingpong-filter", "bursty-decoupling", "interleave-sweep", "typeaware-cache",
  };
  return names;
}

Scenario preset(std::string_view name) {
  if (name == "web-2to1") return web_2to1();
  if (name == "cache1-2to1") return cache(true, true);
  if (name == "cache2-2to1") return cache(false, true);
  if (name == "cache1-1to4") return cache(true, false);
  if (name == "cache2-1to4") return cache(false, false);
  if (name == "pingpong-filter") return pingpong_filter();
  if (name == "bursty-decoupling") return bursty_decoupling();
  if (name == "interleave-sweep") return interleave_sweep();
  if (name == "typeaware-cache") return typeaware_cache();
  throw ConfigError(fmt::format("unknown scenario '{}'", name));
}

void apply_overrides(Scenario& s, const ConfigMap& overrides) {
  if (overrides.empty()) return;
  ConfigMap baseline_overrides;
  for (const auto& [k, v] : overrides)
    if (!k.starts_with("node.") && !k.starts_with("policy.")) baseline_overrides.emplace(k, v);

  WorkloadSpec workload = s.workload;
  bool first = true;
  for (ScenarioConfig& c : s.configs) {
    RunConfig rc{c.sim, s.workload, {}};
    apply_settings(rc, c.all_local ? baseline_overrides : overrides);
    c.sim = rc.sim;
    if (first) workload = rc.workload;
    first = false;
  }
  if (s.configs.empty()) {
    RunConfig rc{SimConfig{}, s.workload, {}};
    apply_settings(rc, baseline_overrides);
    workload = rc.workload;
  }
  s.workload = workload;
}

std::uint64_t peak_live_pages(std::span<const TraceEvent> trace) {
  std::uint64_t live = 0;
  std::uint64_t peak = 0;
  for (const TraceEvent& e : trace) {
    if (e.op == Op::Alloc) peak = std::max(peak, ++live);
    if (e.op == Op::Free && live > 0) --live;
  }
  return peak;
}

ScenarioResult run_scenario(const Scenario& s, unsigned threads) {
  ScenarioResult result;
  result.name = s.name;
  result.workload = s.workload;
  const std::vector<TraceEvent> trace = generate(s.workload);
  result.trace_events = trace.size();
  result.peak_live_pages = peak_live_pages(trace);

  result.configs.resize(s.configs.size());
  for (std::size_t i = 0; i < s.configs.size(); ++i) {
    const ScenarioConfig& c = s.configs[i];
    ConfigOutcome& out = result.configs[i];
    out.label = c.label;
    out.sim = c.sim;
    if (c.all_local) {
      NodeParams local = c.sim.nodes.front();
      for (const NodeParams& n : c.sim.nodes)
        if (n.tier == Tier::Local) local = n;
      local.capacity = static_cast<std::uint64_t>(
          std::ceil(kBaselineHeadroom * static_cast<double>(std::max<std::uint64_t>(result.peak_live_pages, 1))));
      out.sim.nodes = {local};
    }
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(s.configs.size());
  const auto worker = [&] {
    for (std::size_t i = next++; i < result.configs.size(); i = next++) {
      try {
        result.configs[i].report = run(trace, result.configs[i].sim);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::max<std::size_t>(s.configs.size(), 1)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (ConfigOutcome& c : result.configs)
    for (const std::string& m : summary_metrics()) c.metrics[m] = metric_value(m, c.report);

  const auto value = [&](const std::string& metric, const std::string& label) {
    return metric_value(metric, result.config(label).report);
  };
  for (const Assertion& a : s.assertions) {
    AssertionOutcome o;
    o.description = a.describe();
    if (a.kind == Assertion::Kind::Argmax) {
      std::string best;
      double best_value = -std::numeric_limits<double>::infinity();
      for (const std::string& label : a.candidates) {
        const double v = value(a.metric, label);
        if (v > best_value) {
          best_value = v;
          best = label;
        }
      }
      o.observed = best_value;
      o.threshold = value(a.metric, a.expected);
      o.passed = best == a.expected;
      if (!o.passed) o.description += fmt::format(" (got {})", best);
    } else {
      o.observed = value(a.metric, a.lhs);
      o.threshold = a.factor * (a.rhs.empty() ? 0.0 : value(a.metric, a.rhs)) + a.offset;
      o.passed = holds(o.observed, a.cmp, o.threshold);
    }
    result.assertions.push_back(std::move(o));
  }
  return result;
}

Json to_json(const ScenarioResult& r) {
  Json configs = Json::array();
  for (const ConfigOutcome& c : r.configs) {
    Json metrics = Json::object();
    for (const auto& m : summary_metrics()) metrics[m] = c.metrics.at(m);
    Json report = to_json(c.report);
    configs.push_back(Json{
        {"label", c.label},
        {"config", to_config_map(RunConfig{c.sim, r.workload, {}})},
        {"metrics", std::move(metrics)},
        {"report", std::move(report)},
    });
  }
  Json assertions = Json::array();
  for (const AssertionOutcome& a : r.assertions) {
    assertions.push_back(
        Json{{"assertion", a.description}, {"observed", a.observed}, {"threshold", a.threshold}, {"passed", a.passed}});
  }
  return Json{
      {"scenario", r.name},
      {"trace_events", r.trace_events},
      {"peak_live_pages", r.peak_live_pages},
      {"passed", r.passed()},
      {"configs", std::move(configs)},
      {"assertions", std::move(assertions)},
  };
}

std::string comparison_table(const ScenarioResult& r) {
  std::string out = fmt::format("{:<16}", "config");
  for (const auto& m : summary_metrics()) out += fmt::format(" {:>14.14}", m);
  out += '\n';
  for (const ConfigOutcome& c : r.configs) {
    out += fmt::format("{:<16}", c.label);
    for (const auto& m : summary_metrics()) out += fmt::format(" {:>14.6g}", c.metrics.at(m));
    out += '\n';
  }
  for (const AssertionOutcome& a : r.assertions) {
    out += fmt::format("{} {}  (observed {:.6g}, threshold {:.6g})\n", a.passed ? "PASS" : "FAIL", a.description,
                       a.observed, a.threshold);
  }
  return out;
}

}  // namespace tiersim
