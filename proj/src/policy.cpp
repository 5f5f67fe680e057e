#include "tiersim/policy.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace tiersim {

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::DefaultLinux: return "default";
    case PolicyKind::NumaBalancing: return "numa";
    case PolicyKind::Tpp: return "tpp";
    case PolicyKind::AutoTieringLike: return "autotiering";
  }
  return "?";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view s) {
  if (s == "default" || s == "linux") return PolicyKind::DefaultLinux;
  if (s == "numa" || s == "numa_balancing") return PolicyKind::NumaBalancing;
  if (s == "tpp") return PolicyKind::Tpp;
  if (s == "autotiering" || s == "autotiering_like") return PolicyKind::AutoTieringLike;
  return std::nullopt;
}

std::string_view to_string(PromotionOutcome o) {
  switch (o) {
    case PromotionOutcome::Promoted: return "promoted";
    case PromotionOutcome::DeferredMarkedAccessed: return "deferred_marked_accessed";
    case PromotionOutcome::FailedLowMemory: return "failed_low_memory";
    case PromotionOutcome::FailedPageBusy: return "failed_page_busy";
    case PromotionOutcome::NotCandidate: return "not_candidate";
  }
  return "?";
}

void PolicySpec::validate() const {
  if (interleave && interleave->n < 1) throw ConfigError("interleave n must be >= 1");
  if (!(demote_scale_factor > 0.0 && demote_scale_factor < 1.0)) {
    throw ConfigError("demote_scale_factor must be in (0, 1)");
  }
  if (!(reserved_promo_buffer >= 0.0 && reserved_promo_buffer < 1.0)) {
    throw ConfigError("reserved_promo_buffer must be in [0, 1)");
  }
  if (scan_period_ns == 0) throw ConfigError("scan_period must be positive");
  if (demotion_batch == 0) throw ConfigError("demotion_batch must be positive");
}

PolicyState PolicyState::initial(const PolicySpec& spec, const TieredMemory& mem) {
  PolicyState s;
  s.scan_cursor.assign(mem.nodes().size(), 0);
  if (spec.kind == PolicyKind::AutoTieringLike) {
    const NodeState& local = mem.node(mem.local_node());
    s.promo_buffer_capacity = static_cast<std::uint64_t>(
        std::llround(spec.reserved_promo_buffer * static_cast<double>(local.capacity)));
    s.promo_buffer = s.promo_buffer_capacity;
  }
  return s;
}

bool allocation_permitted(const PolicySpec& spec, const NodeState& node, const PolicyState& state) {
  if (node.free == 0) return false;
  if (node.tier != Tier::Local) return watermark_state(node) != WatermarkState::BelowMin;
  const WatermarkSet& w = node.watermarks;
  if (spec.decoupled()) return node.free >= std::max<std::uint64_t>(w.allocation, 1);
  if (node.reclaiming) return false;
  if (spec.kind == PolicyKind::AutoTieringLike) return node.free >= w.low + state.promo_buffer;
  return node.free >= w.low;
}

namespace {

NodeId nearest_cxl(const TieredMemory& mem) {
  return mem.cxl_nodes().empty() ? kNoNode : mem.cxl_nodes().front();
}

NodeId any_with_free(const TieredMemory& mem) {
  for (NodeId id : mem.nodes_by_distance()) {
    if (mem.node(id).free > 0) return id;
  }
  throw OutOfMemory("every node is full");
}

}  // namespace

NodeId place_page(const PolicySpec& spec, PageType type, const TieredMemory& mem, PolicyState& state) {
  const NodeId local = mem.local_node();
  const NodeId cxl = nearest_cxl(mem);

  if (spec.interleave) {
    const std::uint64_t cycle = std::uint64_t{spec.interleave->n} + spec.interleave->k;
    const bool want_local = state.interleave.position++ % cycle < spec.interleave->n;
    NodeId target = (want_local || cxl == kNoNode) ? local : cxl;
    NodeId other = target == local ? cxl : local;
    if (mem.node(target).free > 0) return target;
    if (other != kNoNode && mem.node(other).free > 0) return other;
    return any_with_free(mem);
  }

  if (spec.type_aware_alloc && type == PageType::File && cxl != kNoNode) {
    const NodeState& c = mem.node(cxl);
    if (c.free > c.watermarks.min) return cxl;
  }

  for (NodeId id : mem.nodes_by_distance()) {
    if (allocation_permitted(spec, mem.node(id), state)) return id;
  }
  return any_with_free(mem);
}

PromotionOutcome promote(PageFrame& frame, TieredMemory& mem, std::uint64_t min_free, SimTime now) {
  CounterSet& c = mem.counters();
  if (frame.isolated) {
    c.add(Counter::PgpromoteFailPageBusy);
    return PromotionOutcome::FailedPageBusy;
  }
  const NodeId local = mem.local_node();
  if (mem.node(local).free < std::max<std::uint64_t>(min_free, 1)) {
    c.add(Counter::PgpromoteFailLowMemory);
    return PromotionOutcome::FailedLowMemory;
  }
  mem.migrate(frame.page, local, LruKind::Active, now);
  frame.demoted_flag = false;
  c.add(pgpromote_success(frame.type));
  return PromotionOutcome::Promoted;
}

AccessResult handle_access(const PolicySpec& spec, PageFrame& frame, SimTime now, TieredMemory& mem,
                           PolicyState& state, const AccessCosts& costs) {
  AccessResult r;
  const NodeState& node = mem.node(frame.node);
  r.served_by = node.id;
  r.latency_ns = costs.node_latency_ns[node.id];
  CounterSet& c = mem.counters();
  c.add(node.tier == Tier::Local ? Counter::PgaccessLocal : Counter::PgaccessCxl);

  const bool was_inactive = frame.lru == LruKind::Inactive;
  mem.mark_accessed(frame, now);
  if (!frame.hint_poisoned) return r;

  frame.hint_poisoned = false;
  c.add(Counter::NumaHintFaults);
  if (node.tier == Tier::Local || spec.kind == PolicyKind::DefaultLinux) {
    r.promotion = PromotionOutcome::NotCandidate;
    return r;
  }
  if (spec.kind == PolicyKind::Tpp && spec.active_lru_filter && was_inactive) {
    r.promotion = PromotionOutcome::DeferredMarkedAccessed;
    return r;
  }

  c.add(pgpromote_candidate(frame.type));
  if (frame.demoted_flag) c.add(Counter::PgpromoteCandidateDemoted);

  const NodeState& local = mem.node(mem.local_node());
  switch (spec.kind) {
    case PolicyKind::NumaBalancing:
      r.promotion = promote(frame, mem, local.watermarks.high, now);
      break;
    case PolicyKind::Tpp:
      // Decoupled mode ignores the allocation watermark; otherwise promotion
      // waits for the node to clear its high watermark like NUMA balancing.
      r.promotion = promote(frame, mem, spec.decouple_watermarks ? 1 : local.watermarks.high, now);
      break;
    case PolicyKind::AutoTieringLike:
      if (state.promo_buffer == 0) {
        c.add(Counter::PgpromoteFailLowMemory);
        r.promotion = PromotionOutcome::FailedLowMemory;
      } else {
        r.promotion = promote(frame, mem, 1, now);
        if (r.promotion == PromotionOutcome::Promoted) --state.promo_buffer;
      }
      break;
    case PolicyKind::DefaultLinux:
      break;
  }
  if (r.promotion == PromotionOutcome::Promoted) r.latency_ns += costs.migration_cost_ns;
  return r;
}

std::uint64_t numa_scan(const PolicySpec& spec, TieredMemory& mem, PolicyState& state) {
  if (!spec.scans()) return 0;
  if (state.scan_cursor.size() != mem.nodes().size()) state.scan_cursor.assign(mem.nodes().size(), 0);
  std::uint64_t poisoned = 0;
  for (const NodeState& node : mem.nodes()) {
    const bool eligible = spec.kind == PolicyKind::NumaBalancing || node.tier == Tier::Cxl;
    const std::uint64_t total = node.resident();
    if (!eligible || total == 0) continue;
    const std::uint64_t start = state.scan_cursor[node.id] % total;
    const std::uint64_t visit = std::min(spec.scan_quota, total);
    const bool cxl = node.tier == Tier::Cxl;
    CounterSet& c = mem.counters();
    std::uint64_t position = 0;
    // Pages in [start, start + visit) of the ring, possibly wrapping.
    auto in_window = [&](std::uint64_t pos) {
      return (pos >= start && pos < start + visit) || pos + total < start + visit;
    };
    mem.for_each_resident(node.id, [&](PageFrame& f) {
      if (in_window(position) && !f.hint_poisoned) {
        f.hint_poisoned = true;
        ++poisoned;
        if (cxl) c.add(pgpromote_sampled(f.type));
      }
      ++position;
    });
    state.scan_cursor[node.id] = start + visit;
  }
  return poisoned;
}

bool reclaim_triggered(const PolicySpec& spec, const NodeState& node) {
  if (node.tier == Tier::Local && spec.decoupled()) return node.free < node.watermarks.demotion;
  return node.free < node.watermarks.low;
}

bool reclaim_satisfied(const PolicySpec& spec, const NodeState& node) {
  if (node.tier == Tier::Local && spec.decoupled()) return node.free >= node.watermarks.demotion;
  return node.free >= node.watermarks.high;
}

namespace {

NodeId demotion_target(const TieredMemory& mem) {
  for (NodeId id : mem.cxl_nodes()) {
    if (mem.node(id).free > 0) return id;
  }
  return kNoNode;
}

}  // namespace

ReclaimAction planned_action(const PolicySpec& spec, const TieredMemory& mem, NodeId node) {
  if (mem.node(node).tier == Tier::Local && spec.demotes() && demotion_target(mem) != kNoNode) {
    return ReclaimAction::Demote;
  }
  return mem.swap_enabled() ? ReclaimAction::SwapOut : ReclaimAction::None;
}

ReclaimAction reclaim_page(const PolicySpec& spec, TieredMemory& mem, PageId page, SimTime now) {
  PageFrame* f = mem.find(page);
  if (f == nullptr) return ReclaimAction::None;
  const ReclaimAction action = planned_action(spec, mem, f->node);
  CounterSet& c = mem.counters();
  switch (action) {
    case ReclaimAction::Demote: {
      PageFrame& moved = mem.migrate(page, demotion_target(mem),
                                     spec.demote_to_active ? LruKind::Active : LruKind::Inactive, now);
      moved.demoted_flag = true;
      moved.hint_poisoned = false;
      c.add(pgdemote(moved.type));
      break;
    }
    case ReclaimAction::SwapOut:
      mem.swap_out(page);
      c.add(Counter::Pgswapout);
      break;
    case ReclaimAction::None:
      break;
  }
  return action;
}

ReclaimResult background_reclaim(const PolicySpec& spec, TieredMemory& mem, NodeId node, std::uint64_t max_pages,
                                 SimTime now) {
  ReclaimResult result;
  while (result.freed() < max_pages && !reclaim_satisfied(spec, mem.node(node))) {
    if (planned_action(spec, mem, node) == ReclaimAction::None) break;
    mem.balance_lists(node);
    const std::uint64_t batch = std::min<std::uint64_t>(spec.demotion_batch, max_pages - result.freed());
    const auto candidates = mem.select_reclaim_candidates(node, batch, true, spec.demote_file_first);
    if (candidates.empty()) break;
    for (PageId page : candidates) {
      if (reclaim_satisfied(spec, mem.node(node)) || result.freed() >= max_pages) break;
      switch (reclaim_page(spec, mem, page, now)) {
        case ReclaimAction::Demote: ++result.demoted; break;
        case ReclaimAction::SwapOut: ++result.swapped; break;
        case ReclaimAction::None: return result;
      }
    }
  }
  return result;
}

PageFrame& swap_in(PageId page, const PolicySpec& spec, TieredMemory& mem, PolicyState& state, SimTime now) {
  const auto type = mem.swapped_type(page);
  if (!type) throw TraceError(fmt::format("page {} is not in swap", page));
  const NodeId target = place_page(spec, *type, mem, state);
  mem.take_from_swap(page);
  PageFrame& f = mem.lru_insert(target, page, *type, LruKind::Inactive, now);
  mem.counters().add(Counter::Pgswapin);
  return f;
}

std::uint64_t autotiering_period(const PolicySpec& spec, TieredMemory& mem, PolicyState& state, SimTime now) {
  if (spec.kind != PolicyKind::AutoTieringLike) return 0;
  const NodeId local = mem.local_node();
  std::uint64_t demoted = 0;
  const std::uint64_t room = state.promo_buffer_capacity - state.promo_buffer;
  if (room > 0) {
    mem.balance_lists(local);
    const auto inactive = mem.select_reclaim_candidates(local, mem.node(local).resident(), true,
                                                        spec.demote_file_first);
    for (PageId page : inactive) {
      if (demoted >= room || demotion_target(mem) == kNoNode) break;
      const PageFrame* f = mem.find(page);
      if (f->access_count >= spec.cold_threshold) continue;
      reclaim_page(spec, mem, page, now);
      ++demoted;
    }
    state.promo_buffer += demoted;
  }
  for (const NodeState& node : mem.nodes()) {
    mem.for_each_resident(node.id, [](PageFrame& f) { f.access_count = 0; });
  }
  return demoted;
}

}  // namespace tiersim
