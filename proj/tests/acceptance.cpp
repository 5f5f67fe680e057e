// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "oracles.hpp"
#include "tiersim/chameleon.hpp"
#include "tiersim/report_io.hpp"
#include "tiersim/scenario.hpp"
#include "tiersim/simulator.hpp"
#include "tiersim/workload.hpp"

using namespace tiersim;

namespace {

// Pinned tolerances.
constexpr double kUtilTolerance = 0.05;
constexpr double kLocalGain = 0.15;
constexpr double kThroughputRatio = 0.97;
constexpr double kPromotionRatio = 0.5;
constexpr double kCandidateDemotedRatio = 0.7;
constexpr double kAllocRateRatio = 1.2;
constexpr double kPressureRatio = 0.2;
constexpr double kNumaTrapRatio = 0.2;
constexpr int kConservationTraces = 1000;
constexpr std::uint64_t kMaxPages = 64;
constexpr std::size_t kMaxEvents = 512;

struct Verdict {
  bool pass = false;
  std::string detail;
};

unsigned threads() { return std::max(2u, std::min(8u, std::thread::hardware_concurrency())); }

std::string json_text(const ScenarioResult& r) {
  std::ostringstream out;
  write_json(to_json(r), out);
  return out.str();
}

// First run of every preset, shared by the criteria that need it and by the
// determinism rerun.
std::map<std::string, ScenarioResult>& runs() {
  static std::map<std::string, ScenarioResult> cache;
  return cache;
}

const ScenarioResult& scenario(const std::string& name) {
  auto it = runs().find(name);
  if (it == runs().end()) it = runs().emplace(name, run_scenario(preset(name), threads())).first;
  return it->second;
}

double metric(const ScenarioResult& r, const std::string& label, const std::string& m) {
  return metric_value(m, r.config(label).report);
}

Verdict interleave_exactness() {
  SimConfig c = SimConfig::two_tier(10'000, 10'000);
  c.policy.interleave = Interleave{2, 1};
  std::vector<TraceEvent> trace;
  for (PageId p = 0; p < 3000; ++p) trace.push_back({p * 100, Op::Alloc, PageType::Anon, p});
  const SimReport r = run(trace, c);
  const auto local = r.counters[Counter::PgallocLocal];
  const auto cxl = r.counters[Counter::PgallocCxl];
  return {local == 2000 && cxl == 1000, fmt::format("local={} cxl={} (want 2000/1000)", local, cxl)};
}

Verdict bandwidth_optimum() {
  const ScenarioResult& r = scenario("interleave-sweep");
  bool within = true;
  std::string detail;
  std::string best;
  double best_u = -1.0;
  for (auto [n, k] : {std::pair{1, 1}, {2, 1}, {3, 1}, {1, 2}}) {
    const std::string label = fmt::format("{}:{}", n, k);
    const ConfigOutcome& c = r.config(label);
    const double expect = oracle::utilization(static_cast<double>(n) / (n + k), c.sim.nodes[0].bandwidth,
                                              c.sim.nodes[1].bandwidth);
    const double got = c.report.totals.bandwidth_utilization;
    within = within && std::abs(got - expect) <= kUtilTolerance;
    detail += fmt::format("{} sim={:.3f} oracle={:.3f}; ", label, got, expect);
    if (got > best_u) {
      best_u = got;
      best = label;
    }
  }
  detail += fmt::format("argmax={} (want 2:1)", best);
  return {within && best == "2:1", detail};
}

Verdict tpp_vs_default() {
  const ScenarioResult& r = scenario("web-2to1");
  const double tpp = metric(r, "tpp", "local_traffic_fraction");
  const double def = metric(r, "default", "local_traffic_fraction");
  const double tput = metric(r, "tpp", "throughput_proxy");
  const double base = metric(r, "all-local", "throughput_proxy");
  const bool ok = tpp >= def + kLocalGain && tput >= kThroughputRatio * base;
  return {ok, fmt::format("local tpp={:.3f} default={:.3f}; throughput tpp/all-local={:.4f}", tpp, def, tput / base)};
}

Verdict filter_ablation() {
  const ScenarioResult& r = scenario("pingpong-filter");
  const double on = metric(r, "filter-on", "promotions");
  const double off = metric(r, "filter-off", "promotions");
  const double don = metric(r, "filter-on", "pgpromote_candidate_demoted");
  const double doff = metric(r, "filter-off", "pgpromote_candidate_demoted");
  const bool ok = on <= kPromotionRatio * off && don <= kCandidateDemotedRatio * doff;
  return {ok, fmt::format("promotions on={} off={}; candidate_demoted on={} off={}", on, off, don, doff)};
}

Verdict decoupling_ablation() {
  const ScenarioResult& r = scenario("bursty-decoupling");
  const double p95d = metric(r, "decoupled", "p95_local_alloc_rate");
  const double p95c = metric(r, "coupled", "p95_local_alloc_rate");
  const double pd = metric(r, "decoupled", "pressure_promotion_rate");
  const double pc = metric(r, "coupled", "pressure_promotion_rate");
  const bool ok = p95d >= kAllocRateRatio * p95c && pc < kPressureRatio * pd;
  return {ok, fmt::format("p95 alloc rate decoupled={:.0f} coupled={:.0f}; pressure promotion rate decoupled={:.0f} "
                          "coupled={:.0f}",
                          p95d, p95c, pd, pc)};
}

// Random policy variant for the conservation suite.
PolicySpec random_policy(Rng& rng) {
  PolicySpec p;
  p.kind = static_cast<PolicyKind>(rng.below(4));
  p.scan_period_ns = 50'000 + rng.below(500'000);
  p.scan_quota = 1 + rng.below(32);
  p.demotion_batch = 1 + static_cast<std::uint32_t>(rng.below(8));
  if (p.kind == PolicyKind::Tpp) {
    p.active_lru_filter = rng.chance(0.7);
    p.decouple_watermarks = rng.chance(0.7);
    p.demote_file_first = rng.chance(0.5);
    p.demote_to_active = rng.chance(0.2);
    p.type_aware_alloc = rng.chance(0.3);
  }
  if (rng.chance(0.15)) p.interleave = Interleave{1 + static_cast<std::uint32_t>(rng.below(3)),
                                                  static_cast<std::uint32_t>(rng.below(3))};
  return p;
}

std::vector<TraceEvent> random_trace(Rng& rng) {
  const std::uint64_t pages = 1 + rng.below(kMaxPages);
  const std::size_t events = 1 + rng.below(kMaxEvents);
  std::vector<TraceEvent> t;
  std::vector<PageId> live;
  std::set<PageId> dead;
  PageId next = 0;
  SimTime now = 0;
  while (t.size() < events) {
    now += rng.below(40'000);
    const std::uint64_t roll = rng.below(10);
    if (live.empty() || (roll < 3 && next < pages)) {
      if (next >= pages && live.empty()) break;
      if (next < pages) {
        t.push_back({now, Op::Alloc, rng.chance(0.5) ? PageType::Anon : PageType::File, next});
        live.push_back(next++);
      }
      continue;
    }
    const std::size_t i = rng.below(live.size());
    if (roll == 3) {
      t.push_back({now, Op::Free, PageType::Anon, live[i]});
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      t.push_back({now, roll < 7 ? Op::Load : Op::Store, PageType::Anon, live[i]});
    }
  }
  return t;
}

std::string check_step(const Simulator& sim, const TraceEvent& e, const std::set<PageId>& live,
                       const CounterSet& before, std::uint64_t capacity) {
  const TieredMemory& mem = sim.memory();
  const PolicySpec& spec = sim.config().policy;
  try {
    mem.check_invariants();
  } catch (const InvariantViolation& v) {
    return v.what();
  }
  // Page conservation.
  std::uint64_t free = 0;
  for (const NodeState& n : mem.nodes()) free += n.free;
  if (mem.resident_pages() + free != capacity) return "resident + free != capacity";
  if (mem.resident_pages() + mem.swapped_pages() != live.size()) return "live pages not conserved";
  for (PageId p : live)
    if (mem.resident(p) == mem.swapped(p)) return fmt::format("page {} resident xor swapped violated", p);
  // LRU placement of the page this event touched.
  if (e.op != Op::Free) {
    const PageFrame* f = mem.find(e.page);
    if (f == nullptr) return fmt::format("page {} not resident after its event", e.page);
    const LruKind kind = e.op == Op::Alloc ? LruKind::Inactive : LruKind::Active;
    const auto list = mem.list_pages(f->node, f->type, kind);
    if (list.empty() || list.front() != e.page) return fmt::format("page {} not at the head of its list", e.page);
  }
  // Counters only grow; the pgpromote chain holds.
  const CounterSet& after = mem.counters();
  for (std::size_t i = 0; i < kNumCounters; ++i)
    if (after.values()[i] < before.values()[i]) return "counter decreased";
  for (PageType t : {PageType::Anon, PageType::File}) {
    if (after[pgpromote_success(t)] > after[pgpromote_candidate(t)] ||
        after[pgpromote_candidate(t)] > after[pgpromote_sampled(t)])
      return "pgpromote chain violated";
  }
  // Watermark triggers: a node below its trigger has its reclaimer awake.
  for (const NodeState& n : mem.nodes())
    if (reclaim_triggered(spec, n) && !n.reclaiming) return fmt::format("node {} below trigger but idle", n.name);
  const std::uint64_t promoted = after.promotions() - before.promotions();
  if (spec.kind == PolicyKind::DefaultLinux && (after.promotions() > 0 || after.demotions() > 0))
    return "default Linux migrated a page";
  const bool gated = spec.kind == PolicyKind::NumaBalancing || (spec.kind == PolicyKind::Tpp && !spec.decouple_watermarks);
  if (gated && promoted > 0) {
    const NodeState& local = mem.node(mem.local_node());
    if (local.free + promoted < local.watermarks.high) return "promotion below the high watermark";
  }
  return {};
}

// The LRU oracle replayed over the trace's page ids with random list
// maintenance between events.
std::string lru_oracle_replay(const std::vector<TraceEvent>& trace, Rng& rng) {
  std::vector<NodeParams> p{{"local", Tier::Local, kMaxPages, 100.0, 25.0, 0},
                            {"cxl", Tier::Cxl, kMaxPages, 170.0, 10.0, 1}};
  TieredMemory mem(make_nodes(p, {}, std::nullopt));
  oracle::LruOracle o(2);
  for (const TraceEvent& e : trace) {
    switch (e.op) {
      case Op::Alloc: {
        const NodeId n = static_cast<NodeId>(rng.below(2));
        mem.lru_insert(n, e.page, e.type, LruKind::Inactive, e.time);
        o.insert(n, e.page, e.type, LruKind::Inactive);
        break;
      }
      case Op::Free:
        mem.release(e.page);
        o.remove(e.page);
        break;
      default:
        mem.mark_accessed(*mem.find(e.page), e.time);
        o.access(e.page);
    }
    const NodeId n = static_cast<NodeId>(rng.below(2));
    switch (rng.below(4)) {
      case 0: mem.balance_lists(n); o.balance(n); break;
      case 1: {
        const PageType t = rng.chance(0.5) ? PageType::Anon : PageType::File;
        mem.deactivate(n, t, 1);
        o.deactivate(n, t, 1);
        break;
      }
      case 2:
        if (e.op != Op::Free && mem.node(n).free > 0 && mem.find(e.page)->node != n) {
          const LruKind k = rng.chance(0.5) ? LruKind::Active : LruKind::Inactive;
          mem.migrate(e.page, n, k, e.time);
          o.migrate(e.page, n, k);
        }
        break;
      default: break;
    }
    const bool ff = rng.chance(0.5);
    if (mem.select_reclaim_candidates(n, 8, true, ff) != o.candidates(n, 8, true, ff)) return "candidate order differs";
    if (!oracle::same_lists(o, mem)) return "list contents differ from the oracle";
  }
  return {};
}

Verdict conservation_suite() {
  std::map<PolicyKind, int> per_policy;
  std::uint64_t steps = 0;
  for (int i = 0; i < kConservationTraces; ++i) {
    Rng rng(1000 + static_cast<std::uint64_t>(i));
    const std::vector<TraceEvent> trace = random_trace(rng);
    SimConfig c;
    c.nodes.push_back({"local", Tier::Local, 4 + rng.below(40), 100.0, 1.0 + static_cast<double>(rng.below(25)), 0});
    const std::uint64_t cxl_nodes = rng.below(3);
    for (std::uint64_t n = 0; n < cxl_nodes; ++n) {
      c.nodes.push_back({fmt::format("cxl{}", n), Tier::Cxl, 4 + rng.below(40), 170.0 + static_cast<double>(n) * 50,
                         1.0 + static_cast<double>(rng.below(10)), static_cast<std::uint32_t>(n + 1)});
    }
    c.policy = random_policy(rng);
    if (cxl_nodes == 0) c.policy.interleave.reset();
    c.report_window_ns = 100'000 + rng.below(1'000'000);
    c.swap_latency_ns = static_cast<double>(1000 + rng.below(20'000));
    c.migration_cost_ns = static_cast<double>(100 + rng.below(2000));
    ++per_policy[c.policy.kind];

    std::uint64_t capacity = 0;
    for (const NodeParams& n : c.nodes) capacity += n.capacity;
    Simulator sim(c);
    std::set<PageId> live;
    for (const TraceEvent& e : trace) {
      const CounterSet before = sim.memory().counters();
      sim.step(e);
      if (e.op == Op::Alloc) live.insert(e.page);
      if (e.op == Op::Free) live.erase(e.page);
      const std::string problem = check_step(sim, e, live, before, capacity);
      ++steps;
      if (!problem.empty())
        return {false, fmt::format("trace {} policy {} event {}: {}", i, to_string(c.policy.kind), steps, problem)};
    }
    const SimReport r = sim.finish();
    std::uint64_t accesses = 0;
    for (const WindowStats& w : r.windows) accesses += w.accesses;
    if (accesses != r.counters[Counter::PgaccessLocal] + r.counters[Counter::PgaccessCxl])
      return {false, fmt::format("trace {}: window accesses disagree with counters", i)};
    const std::string lru = lru_oracle_replay(trace, rng);
    if (!lru.empty()) return {false, fmt::format("trace {}: {}", i, lru)};
  }
  return {true, fmt::format("{} traces, {} checked steps (default={} numa={} tpp={} autotiering={})",
                            kConservationTraces, steps, per_policy[PolicyKind::DefaultLinux],
                            per_policy[PolicyKind::NumaBalancing], per_policy[PolicyKind::Tpp],
                            per_policy[PolicyKind::AutoTieringLike])};
}

Verdict chameleon_exactness() {
  // 100 pages; each interval touches a different 22 of them, each 50 times.
  CharacterizerConfig exact;
  exact.sample_ratio = 1;
  exact.duty_fraction = 1.0;
  CharacterizerConfig sampled = exact;
  sampled.sample_ratio = 200;
  Characterizer a(exact);
  Characterizer b(sampled);
  Rng rng(22);
  std::vector<TraceEvent> trace;
  for (PageId p = 0; p < 100; ++p) trace.push_back({0, Op::Alloc, p % 3 ? PageType::Anon : PageType::File, p});
  for (const auto& e : trace) {
    a.ingest(e);
    b.ingest(e);
  }
  bool exact_ok = true;
  bool bound_ok = true;
  double worst = 0.0;
  const int intervals = 80;
  for (int i = 0; i < intervals; ++i) {
    std::vector<PageId> pages(100);
    for (PageId p = 0; p < 100; ++p) pages[p] = p;
    for (std::size_t j = 0; j < 22; ++j) std::swap(pages[j], pages[j + rng.below(100 - j)]);
    const SimTime t0 = static_cast<SimTime>(i) * exact.interval_ns;
    for (int rep = 0; rep < 50; ++rep)
      for (std::size_t j = 0; j < 22; ++j) {
        const TraceEvent e{t0 + static_cast<SimTime>(rep * 22 + j), Op::Load, PageType::Anon, pages[j]};
        a.ingest(e);
        b.ingest(e);
      }
    const double h = a.hot_fraction(1).total;
    exact_ok = exact_ok && h == 0.22;
    worst = std::max(worst, b.hot_fraction(1).total - h);
    bound_ok = bound_ok && b.hot_fraction(1).total <= h && b.hot_fraction(2).total <= a.hot_fraction(2).total;
    a.rotate_interval();
    b.rotate_interval();
  }

  // Shift semantics against a brute-force 64-bit history.
  Characterizer ch(exact);
  std::vector<std::vector<bool>> history(16);
  for (PageId p = 0; p < 16; ++p) ch.ingest({0, Op::Alloc, PageType::Anon, p});
  bool shift_ok = true;
  for (int step = 0; step < 64 * 2; ++step) {
    for (PageId p = 0; p < 16; ++p) {
      const bool touch = rng.chance(std::pow(0.5, static_cast<double>(p % 8)));
      if (touch) ch.ingest({1, Op::Load, PageType::Anon, p});
      history[p].push_back(touch);
    }
    ch.rotate_interval();
    for (PageId p = 0; p < 16; ++p) {
      std::uint64_t expect = 0;
      const auto& h = history[p];
      for (std::size_t age = 0; age < 63 && age < h.size(); ++age)
        if (h[h.size() - 1 - age]) expect |= std::uint64_t{1} << (age + 1);
      const auto rec = ch.record(p);
      shift_ok = shift_ok && (rec ? rec->bitmap : 0) == expect && rec.has_value() == (expect != 0);
    }
  }
  return {exact_ok && bound_ok && shift_ok,
          fmt::format("hot_fraction==0.22 on {} intervals: {}; R=200 <= exact: {}; 64-step shift oracle: {}", intervals,
                      exact_ok ? "yes" : "no", bound_ok ? "yes" : "no", shift_ok ? "yes" : "no")};
}

Verdict numa_trap() {
  const ScenarioResult& r = scenario("cache1-1to4");
  const double numa = metric(r, "numa", "promotions");
  const double tpp = metric(r, "tpp", "promotions");
  return {numa < kNumaTrapRatio * tpp, fmt::format("promotions numa={} tpp={}", numa, tpp)};
}

Verdict determinism() {
  std::string detail;
  bool ok = true;
  for (const std::string& name : preset_names()) {
    const std::string first = json_text(scenario(name));
    const std::string second = json_text(run_scenario(preset(name), 1));
    if (first != second) {
      ok = false;
      detail += name + " differs; ";
    }
  }
  return {ok, ok ? fmt::format("{} presets byte-identical across reruns ({} and 1 threads)", preset_names().size(),
                               threads())
                 : detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"interleave exactness", interleave_exactness},
      {"bandwidth optimum", bandwidth_optimum},
      {"TPP vs default Linux", tpp_vs_default},
      {"active-LRU filter ablation", filter_ablation},
      {"decoupling ablation", decoupling_ablation},
      {"conservation suite", conservation_suite},
      {"Chameleon exactness", chameleon_exactness},
      {"NUMA balancing trap", numa_trap},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, fmt::format("exception: {}", e.what())};
    }
    failed += v.pass ? 0 : 1;
    std::cout << fmt::format("criterion {} {}: {} -- {}\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
