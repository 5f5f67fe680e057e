#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tiersim/core_model.hpp"
#include "tiersim/random.hpp"

using namespace tiersim;

namespace {

TieredMemory single(std::uint64_t capacity) {
  std::vector<NodeParams> p{{"local", Tier::Local, capacity, 100.0, 25.0, 0}};
  return TieredMemory(make_nodes(p, {}, std::nullopt));
}

TieredMemory two_nodes(std::uint64_t local, std::uint64_t cxl) {
  std::vector<NodeParams> p{{"local", Tier::Local, local, 100.0, 25.0, 0}, {"cxl", Tier::Cxl, cxl, 170.0, 10.0, 1}};
  return TieredMemory(make_nodes(p, {}, std::nullopt));
}

NodeState bare(std::uint64_t capacity, std::uint64_t free, WatermarkSet w) {
  NodeState n;
  n.capacity = capacity;
  n.free = free;
  n.watermarks = w;
  return n;
}

}  // namespace

TEST_CASE("watermarks resolve to the default fractions") {
  const WatermarkSet w = WatermarkSet::resolve(10'000, {});
  CHECK(w.min == 50);
  CHECK(w.low == 100);
  CHECK(w.high == 150);
  CHECK_FALSE(w.decoupled());

  const WatermarkSet d = WatermarkSet::resolve(10'000, {}, 0.02);
  CHECK(d.allocation == d.low);
  CHECK(d.demotion == 200);
  CHECK(d.demotion > d.allocation);
}

TEST_CASE("tiny nodes keep a strict watermark order or fail") {
  const WatermarkSet w = WatermarkSet::resolve(10, {});
  CHECK(w.min < w.low);
  CHECK(w.low < w.high);
  CHECK(w.high <= 10);
  CHECK_THROWS_AS(WatermarkSet::resolve(2, {}), ConfigError);
}

TEST_CASE("watermark_state examples") {
  CHECK(watermark_state(bare(1000, 500, {10, 20, 30, 0, 0})) == WatermarkState::Ok);
  CHECK(watermark_state(bare(1000, 15, {5, 10, 12, 10, 20})) == WatermarkState::BelowDemotion);
  CHECK(watermark_state(bare(1000, 5, {6, 10, 12, 0, 0})) == WatermarkState::BelowMin);
  CHECK(watermark_state(bare(1000, 8, {6, 10, 12, 0, 0})) == WatermarkState::BelowLow);
}

TEST_CASE("watermark_state is monotone in free") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t cap = 100 + rng.below(5000);
    const WatermarkSet w = WatermarkSet::resolve(cap, {}, rng.chance(0.5) ? std::optional(0.02) : std::nullopt);
    WatermarkState prev = WatermarkState::Ok;
    for (std::uint64_t free = cap + 1; free-- > 0;) {
      const WatermarkState s = watermark_state(bare(cap, free, w));
      REQUIRE(static_cast<int>(s) >= static_cast<int>(prev));
      prev = s;
    }
  }
}

TEST_CASE("lru_insert places pages at the head") {
  TieredMemory mem = single(100);
  mem.lru_insert(0, 1, PageType::Anon, LruKind::Inactive, 0);
  CHECK(mem.list_pages(0, PageType::Anon, LruKind::Inactive) == std::vector<PageId>{1});
  CHECK(mem.node(0).free == 99);
  mem.lru_insert(0, 2, PageType::Anon, LruKind::Inactive, 0);
  mem.lru_insert(0, 3, PageType::Anon, LruKind::Inactive, 0);
  CHECK(mem.list_pages(0, PageType::Anon, LruKind::Inactive) == std::vector<PageId>{3, 2, 1});
  mem.check_invariants();
}

TEST_CASE("lru_insert on a full node throws NoFreePages") {
  TieredMemory mem = single(10);
  for (PageId p = 0; p < 10; ++p) mem.lru_insert(0, p, PageType::File, LruKind::Inactive, 0);
  CHECK_THROWS_AS(mem.lru_insert(0, 10, PageType::File, LruKind::Inactive, 0), NoFreePages);
  CHECK_THROWS_AS(mem.lru_insert(0, 3, PageType::File, LruKind::Inactive, 0), NoFreePages);
}

TEST_CASE("lru_insert rejects a page that is already resident") {
  TieredMemory mem = single(10);
  mem.lru_insert(0, 1, PageType::File, LruKind::Inactive, 0);
  CHECK_THROWS_AS(mem.lru_insert(0, 1, PageType::File, LruKind::Inactive, 0), TraceError);
}

TEST_CASE("mark_accessed activates inactive pages and refreshes active ones") {
  TieredMemory mem = single(100);
  mem.lru_insert(0, 7, PageType::File, LruKind::Inactive, 0);
  mem.mark_accessed(*mem.find(7), 5);
  CHECK(mem.list_pages(0, PageType::File, LruKind::Active) == std::vector<PageId>{7});
  CHECK(mem.find(7)->lru == LruKind::Active);
  CHECK(mem.find(7)->last_access == 5);

  mem.lru_insert(0, 8, PageType::File, LruKind::Active, 6);
  mem.mark_accessed(*mem.find(7), 7);
  mem.mark_accessed(*mem.find(7), 8);
  CHECK(mem.list_pages(0, PageType::File, LruKind::Active) == std::vector<PageId>{7, 8});
  mem.check_invariants();
}

TEST_CASE("five accesses over three pages match the oracle") {
  TieredMemory mem = single(100);
  oracle::LruOracle o(1);
  for (PageId p : {1, 2, 3}) {
    mem.lru_insert(0, p, PageType::Anon, LruKind::Inactive, 0);
    o.insert(0, p, PageType::Anon, LruKind::Inactive);
  }
  for (PageId p : {2, 1, 3, 2, 2}) {
    mem.mark_accessed(*mem.find(p), 1);
    o.access(p);
  }
  CHECK(oracle::same_lists(o, mem));
  CHECK(mem.list_pages(0, PageType::Anon, LruKind::Active) == std::vector<PageId>{2, 3, 1});
}

TEST_CASE("reclaim candidates come from inactive tails, file first") {
  TieredMemory mem = single(100);
  for (PageId p = 1; p <= 4; ++p) mem.lru_insert(0, p, PageType::File, LruKind::Inactive, 0);
  for (PageId p = 11; p <= 12; ++p) mem.lru_insert(0, p, PageType::Anon, LruKind::Inactive, 0);
  mem.lru_insert(0, 99, PageType::File, LruKind::Active, 0);
  CHECK(mem.select_reclaim_candidates(0, 5, true) == std::vector<PageId>{1, 2, 3, 4, 11});
  CHECK(mem.select_reclaim_candidates(0, 10, false) == std::vector<PageId>{1, 2, 3, 4});
}

TEST_CASE("reclaim candidate filters") {
  TieredMemory mem = single(100);
  for (PageId p = 1; p <= 3; ++p) mem.lru_insert(0, p, PageType::Anon, LruKind::Inactive, 0);
  CHECK(mem.select_reclaim_candidates(0, 5, false).empty());

  TieredMemory active = single(100);
  for (PageId p = 1; p <= 3; ++p) active.lru_insert(0, p, PageType::Anon, LruKind::Active, 0);
  CHECK(active.select_reclaim_candidates(0, 10, true).empty());
}

TEST_CASE("isolated pages are skipped by candidate selection") {
  TieredMemory mem = single(100);
  for (PageId p = 1; p <= 3; ++p) mem.lru_insert(0, p, PageType::File, LruKind::Inactive, 0);
  mem.find(1)->isolated = true;
  CHECK(mem.select_reclaim_candidates(0, 2, true) == std::vector<PageId>{2, 3});
}

TEST_CASE("balance_lists keeps inactive at least as long as active") {
  TieredMemory mem = single(100);
  for (PageId p = 0; p < 9; ++p) mem.lru_insert(0, p, PageType::Anon, LruKind::Active, 0);
  mem.lru_insert(0, 50, PageType::Anon, LruKind::Inactive, 0);
  mem.balance_lists(0);
  CHECK(mem.node(0).list(PageType::Anon, LruKind::Inactive).size >= mem.node(0).list(PageType::Anon, LruKind::Active).size);
  CHECK(mem.node(0).list(PageType::Anon, LruKind::Active).size == 5);
  mem.check_invariants();
}

TEST_CASE("migrate, release and swap keep pages conserved") {
  TieredMemory mem = two_nodes(50, 50);
  mem.lru_insert(0, 1, PageType::Anon, LruKind::Inactive, 0);
  mem.lru_insert(0, 2, PageType::File, LruKind::Inactive, 0);
  mem.migrate(1, 1, LruKind::Inactive, 0);
  CHECK(mem.find(1)->node == 1);
  CHECK(mem.node(0).free == 49);
  CHECK(mem.node(1).free == 49);
  mem.swap_out(2);
  CHECK(mem.swapped(2));
  CHECK_FALSE(mem.resident(2));
  CHECK(mem.swapped_type(2) == PageType::File);
  CHECK(mem.node(0).free == 50);
  CHECK(mem.take_from_swap(2) == PageType::File);
  CHECK_THROWS_AS(mem.take_from_swap(2), TraceError);
  mem.check_invariants();
}

TEST_CASE("node ordering puts local first then CXL by distance") {
  std::vector<NodeParams> p{{"far", Tier::Cxl, 100, 300.0, 5.0, 3},
                            {"near", Tier::Cxl, 100, 170.0, 5.0, 1},
                            {"local", Tier::Local, 100, 100.0, 25.0, 0}};
  TieredMemory mem(make_nodes(p, {}, std::nullopt));
  CHECK(mem.local_node() == 2);
  CHECK(mem.nodes_by_distance() == std::vector<NodeId>{2, 1, 0});
  CHECK(mem.cxl_nodes() == std::vector<NodeId>{1, 0});

  std::vector<NodeParams> none{{"cxl", Tier::Cxl, 100, 170.0, 5.0, 1}};
  CHECK_THROWS_AS(TieredMemory(make_nodes(none, {}, std::nullopt)), ConfigError);
}

TEST_CASE("random LRU operations on up to 64 pages match the brute-force oracle") {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Rng rng(seed);
    TieredMemory mem = two_nodes(48, 48);
    oracle::LruOracle o(2);
    const std::uint64_t pages = 1 + rng.below(64);
    std::vector<PageId> live;
    for (int step = 0; step < 400; ++step) {
      const std::uint64_t op = rng.below(7);
      if (op == 0 || live.empty()) {
        const PageId p = rng.below(pages);
        const NodeId n = static_cast<NodeId>(rng.below(2));
        if (o.contains(p) || mem.node(n).free == 0) continue;
        const PageType t = rng.chance(0.5) ? PageType::Anon : PageType::File;
        const LruKind k = rng.chance(0.3) ? LruKind::Active : LruKind::Inactive;
        if (mem.swapped(p)) mem.take_from_swap(p);
        mem.lru_insert(n, p, t, k, step);
        o.insert(n, p, t, k);
        live.push_back(p);
        continue;
      }
      const std::size_t idx = rng.below(live.size());
      const PageId p = live[idx];
      switch (op) {
        case 1:
        case 2:
          mem.mark_accessed(*mem.find(p), step);
          o.access(p);
          break;
        case 3: {
          const NodeId n = static_cast<NodeId>(rng.below(2));
          const PageType t = rng.chance(0.5) ? PageType::Anon : PageType::File;
          const std::uint64_t cnt = rng.below(4);
          CHECK(mem.deactivate(n, t, cnt) == o.deactivate(n, t, cnt));
          break;
        }
        case 4: {
          const NodeId dest = mem.find(p)->node ^ 1;
          if (mem.node(dest).free == 0) break;
          const LruKind k = rng.chance(0.5) ? LruKind::Active : LruKind::Inactive;
          mem.migrate(p, dest, k, step);
          o.migrate(p, dest, k);
          break;
        }
        case 5: {
          const NodeId n = static_cast<NodeId>(rng.below(2));
          mem.balance_lists(n);
          o.balance(n);
          const bool file_first = rng.chance(0.5);
          const std::uint64_t cnt = 1 + rng.below(8);
          CHECK(mem.select_reclaim_candidates(n, cnt, true, file_first) == o.candidates(n, cnt, true, file_first));
          CHECK(mem.select_reclaim_candidates(n, cnt, false, file_first) == o.candidates(n, cnt, false, file_first));
          break;
        }
        case 6:
          if (rng.chance(0.5)) mem.release(p);
          else mem.swap_out(p);
          o.remove(p);
          live.erase(live.begin() + static_cast<std::ptrdiff_t>(idx));
          break;
      }
      REQUIRE(oracle::same_lists(o, mem));
      mem.check_invariants();
    }
  }
}

TEST_CASE("counter names and the promotion chain check") {
  CounterSet c;
  CHECK(counter_name(Counter::PgdemoteAnon) == "pgdemote_anon");
  CHECK(counter_name(Counter::PgaccessCxl) == "pgaccess_cxl");
  c.add(Counter::PgpromoteSuccessAnon, 2);
  c.add(Counter::PgpromoteSuccessFile, 3);
  c.add(Counter::PgdemoteFile, 4);
  CHECK(c.promotions() == 5);
  CHECK(c.demotions() == 4);

  TieredMemory mem = single(10);
  mem.counters().add(Counter::PgpromoteSuccessFile);
  CHECK_THROWS_AS(mem.check_invariants(), InvariantViolation);
}
