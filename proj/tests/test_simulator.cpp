#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <sstream>

#include "oracles.hpp"
#include "tiersim/report_io.hpp"
#include "tiersim/simulator.hpp"
#include "tiersim/workload.hpp"

using namespace tiersim;

namespace {

std::vector<TraceEvent> small_trace(std::uint64_t pages, std::uint64_t loads, SimTime step = 1000) {
  std::vector<TraceEvent> t;
  SimTime now = 0;
  for (PageId p = 0; p < pages; ++p) t.push_back({now += step, Op::Alloc, PageType::Anon, p});
  for (std::uint64_t i = 0; i < loads; ++i) t.push_back({now += step, Op::Load, PageType::Anon, i % pages});
  return t;
}

SimConfig with_policy(SimConfig c, PolicyKind k) {
  c.policy.kind = k;
  c.policy.scan_period_ns = 20 * kNsPerMs;
  return c;
}

std::string json_text(const SimReport& r) {
  std::ostringstream out;
  write_json(to_json(r), out);
  return out.str();
}

WorkloadSpec zipf(std::uint64_t pages, std::uint64_t seed) {
  WorkloadSpec w;
  w.kind = WorkloadKind::ZipfSteady;
  w.total_pages = pages;
  w.duration_ns = 200 * kNsPerMs;
  w.seed = seed;
  return w;
}

}  // namespace

TEST_CASE("access latency inflates with utilization up to a cap") {
  NodeState n;
  n.base_latency_ns = 170.0;
  CHECK(access_latency(n, 0.0) == 170.0);
  CHECK(access_latency(n, 0.5) == doctest::Approx(340.0));
  CHECK(access_latency(n, 0.95) == doctest::Approx(3400.0));
  CHECK(access_latency(n, 3.0) == doctest::Approx(3400.0));
}

TEST_CASE("steady-state utilization examples") {
  const std::vector<double> bw{2.5, 1.0};
  CHECK(steady_state_utilization(std::vector<double>{0.5, 0.5}, bw) == doctest::Approx(2.0 / 3.5));
  CHECK(steady_state_utilization(std::vector<double>{2.5 / 3.5, 1.0 / 3.5}, bw) == doctest::Approx(1.0));
  CHECK(steady_state_utilization(std::vector<double>{1.0}, std::vector<double>{4.0}) == doctest::Approx(1.0));
  CHECK(steady_state_utilization(std::vector<double>{1.0, 0.0}, bw) == doctest::Approx(2.5 / 3.5));
}

TEST_CASE("steady-state utilization rejects degenerate inputs") {
  const std::vector<double> bw{2.5, 1.0};
  CHECK_THROWS_AS(steady_state_utilization(std::vector<double>{0.5, 0.4}, bw), DegenerateShare);
  CHECK_THROWS_AS(steady_state_utilization(std::vector<double>{1.0}, bw), DegenerateShare);
  CHECK_THROWS_AS(steady_state_utilization(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}),
                  DegenerateShare);
  CHECK_THROWS_AS(steady_state_utilization(std::vector<double>{}, std::vector<double>{}), DegenerateShare);
}

TEST_CASE("steady-state utilization peaks exactly at bandwidth-proportional shares") {
  for (double bl : {1.0, 2.5, 4.0}) {
    for (double bc : {0.5, 1.0, 3.0}) {
      const double best = bl / (bl + bc);
      for (int i = 0; i <= 1000; ++i) {
        const double s = i / 1000.0;
        const double u = steady_state_utilization(std::vector<double>{s, 1.0 - s}, std::vector<double>{bl, bc});
        REQUIRE(u == doctest::Approx(oracle::utilization(s, bl, bc)));
        REQUIRE(u <= 1.0 + 1e-12);
        if (std::abs(s - best) > 1e-3) REQUIRE(u < 1.0);
      }
      CHECK(steady_state_utilization(std::vector<double>{best, 1.0 - best}, std::vector<double>{bl, bc}) ==
            doctest::Approx(1.0));
    }
  }
}

TEST_CASE("empty trace gives an empty report") {
  const SimReport r = run({}, SimConfig::two_tier(100, 100));
  CHECK(r.windows.empty());
  CHECK(r.events == 0);
  for (std::uint64_t v : r.counters.values()) CHECK(v == 0);
}

TEST_CASE("a trace that fits locally is served locally") {
  const SimReport r = run(small_trace(10, 10), SimConfig::two_tier(1000, 1000));
  CHECK(r.totals.local_traffic_fraction == 1.0);
  CHECK(r.totals.cxl_traffic_fraction == 0.0);
  CHECK(r.counters[Counter::PgallocLocal] == 10);
  CHECK(r.counters[Counter::PgaccessLocal] == 10);
  CHECK(r.totals.mean_access_latency_ns == doctest::Approx(100.0));
}

TEST_CASE("runs are deterministic down to the serialized bytes") {
  const auto trace = generate(zipf(4000, 3));
  for (PolicyKind k : {PolicyKind::DefaultLinux, PolicyKind::NumaBalancing, PolicyKind::Tpp, PolicyKind::AutoTieringLike}) {
    const SimConfig c = with_policy(SimConfig::two_tier(1500, 3000), k);
    const SimReport a = run(trace, c);
    const SimReport b = run(trace, c);
    CHECK(a == b);
    CHECK(json_text(a) == json_text(b));
  }
}

TEST_CASE("window series obey the report invariants") {
  const auto trace = generate(zipf(4000, 5));
  for (PolicyKind k : {PolicyKind::DefaultLinux, PolicyKind::NumaBalancing, PolicyKind::Tpp, PolicyKind::AutoTieringLike}) {
    const SimReport r = run(trace, with_policy(SimConfig::two_tier(1500, 3000), k));
    std::uint64_t accesses = 0;
    std::uint64_t promotions = 0;
    for (const WindowStats& w : r.windows) {
      accesses += w.accesses;
      promotions += w.promotions;
      if (w.accesses > 0) CHECK(w.local_traffic_fraction + w.cxl_traffic_fraction == doctest::Approx(1.0));
      CHECK(w.bandwidth_utilization >= 0.0);
      CHECK(w.bandwidth_utilization <= 1.0);
    }
    CHECK(accesses == r.counters[Counter::PgaccessLocal] + r.counters[Counter::PgaccessCxl]);
    CHECK(promotions == r.counters.promotions());
    CHECK(r.totals.accesses == accesses);
  }
}

TEST_CASE("all-local placement never has higher latency without queueing") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto trace = generate(zipf(3000, seed));
    SimConfig all_local = SimConfig::two_tier(4000, 4000);
    SimConfig mixed = SimConfig::two_tier(1000, 4000);
    for (SimConfig* c : {&all_local, &mixed})
      for (NodeParams& n : c->nodes) n.bandwidth = std::numeric_limits<double>::infinity();
    for (PolicyKind k : {PolicyKind::DefaultLinux, PolicyKind::Tpp}) {
      const SimReport a = run(trace, with_policy(all_local, k));
      const SimReport m = run(trace, with_policy(mixed, k));
      CHECK(a.totals.mean_access_latency_ns <= m.totals.mean_access_latency_ns);
    }
  }
}

TEST_CASE("malformed traces raise TraceError") {
  const SimConfig c = SimConfig::two_tier(100, 100);
  CHECK_THROWS_AS(run(std::vector<TraceEvent>{{5, Op::Alloc, PageType::Anon, 1}, {4, Op::Load, PageType::Anon, 1}}, c),
                  TraceError);
  CHECK_THROWS_AS(run(std::vector<TraceEvent>{{1, Op::Load, PageType::Anon, 1}}, c), TraceError);
  CHECK_THROWS_AS(run(std::vector<TraceEvent>{{1, Op::Free, PageType::Anon, 1}}, c), TraceError);
  CHECK_THROWS_AS(run(std::vector<TraceEvent>{{1, Op::Alloc, PageType::Anon, 1}, {2, Op::Alloc, PageType::File, 1}}, c),
                  TraceError);
}

TEST_CASE("without swap, overcommitting every node is OutOfMemory") {
  SimConfig c = SimConfig::two_tier(50, 50);
  c.swap_enabled = false;
  CHECK_THROWS_AS(run(small_trace(101, 0), c), OutOfMemory);
  CHECK_NOTHROW(run(small_trace(100, 0), c));
}

TEST_CASE("configuration validation") {
  SimConfig c = SimConfig::two_tier(100, 100);
  c.nodes[1].base_latency_ns = 90.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig::two_tier(100, 100);
  c.nodes[1].tier = Tier::Local;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig::two_tier(100, 100);
  c.report_window_ns = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("a swap-in access pays at least the swap latency") {
  SimConfig c = SimConfig::two_tier(200, 200);
  c.nodes.pop_back();
  Simulator sim(c);
  SimTime t = 0;
  for (PageId p = 0; p < 400; ++p) sim.step({t += 1000, Op::Alloc, PageType::Anon, p});
  REQUIRE(sim.memory().swapped(0));
  sim.step({kNsPerSec, Op::Load, PageType::Anon, 0});
  CHECK(sim.memory().resident(0));
  const SimReport r = sim.finish();
  CHECK(r.counters[Counter::Pgswapin] == 1);
  const WindowStats& w = r.windows[kNsPerSec / c.report_window_ns];
  CHECK(w.accesses == 1);
  CHECK(w.mean_access_latency_ns >= c.swap_latency_ns);
}

TEST_CASE("default Linux never migrates") {
  const auto trace = generate(zipf(6000, 8));
  const SimReport r = run(trace, with_policy(SimConfig::two_tier(2000, 3000), PolicyKind::DefaultLinux));
  CHECK(r.counters.promotions() == 0);
  CHECK(r.counters.demotions() == 0);
  CHECK(r.counters[Counter::NumaHintFaults] == 0);
  CHECK(r.counters[Counter::PgallocCxl] > 0);
}

TEST_CASE("decoupled TPP with ample CXL never swaps") {
  const auto trace = generate(zipf(6000, 9));
  const SimReport r = run(trace, with_policy(SimConfig::two_tier(2000, 8000), PolicyKind::Tpp));
  CHECK(r.counters.demotions() > 0);
  CHECK(r.counters.promotions() > 0);
  CHECK(r.counters[Counter::Pgswapout] == 0);
}

TEST_CASE("TPP beats default Linux on local traffic for a skewed workload") {
  const auto trace = generate(zipf(6000, 10));
  const SimReport d = run(trace, with_policy(SimConfig::two_tier(2000, 5000), PolicyKind::DefaultLinux));
  const SimReport t = run(trace, with_policy(SimConfig::two_tier(2000, 5000), PolicyKind::Tpp));
  CHECK(t.totals.local_traffic_fraction > d.totals.local_traffic_fraction);
}

TEST_CASE("live pages track allocations minus frees") {
  std::vector<TraceEvent> t;
  t.push_back({0, Op::Alloc, PageType::Anon, 1});
  t.push_back({1, Op::Alloc, PageType::Anon, 2});
  t.push_back({15 * kNsPerMs, Op::Free, PageType::Anon, 1});
  t.push_back({35 * kNsPerMs, Op::Load, PageType::Anon, 2});
  const SimReport r = run(t, SimConfig::two_tier(100, 100));
  REQUIRE(r.windows.size() == 4);
  CHECK(r.windows[0].live_pages == 2);
  CHECK(r.windows[1].live_pages == 1);
  CHECK(r.windows[2].live_pages == 1);
  CHECK(r.windows[3].live_pages == 1);
}
