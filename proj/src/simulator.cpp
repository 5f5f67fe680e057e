#include "tiersim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace tiersim {

SimConfig SimConfig::two_tier(std::uint64_t local_pages, std::uint64_t cxl_pages) {
  SimConfig c;
  c.nodes.push_back(NodeParams{"local", Tier::Local, local_pages, 100.0, 25.0, 0});
  c.nodes.push_back(NodeParams{"cxl", Tier::Cxl, cxl_pages, 170.0, 10.0, 1});
  return c;
}

void SimConfig::validate() const {
  std::size_t locals = 0;
  double local_latency = 0.0;
  for (const auto& n : nodes) {
    if (n.tier == Tier::Local) {
      ++locals;
      local_latency = n.base_latency_ns;
    }
    if (!(n.bandwidth > 0.0)) throw ConfigError(fmt::format("node {}: bandwidth must be positive", n.name));
    if (!(n.base_latency_ns > 0.0)) throw ConfigError(fmt::format("node {}: latency must be positive", n.name));
  }
  if (locals != 1) throw ConfigError("exactly one local node is required");
  for (const auto& n : nodes) {
    if (n.tier == Tier::Cxl && !(n.base_latency_ns > local_latency)) {
      throw ConfigError(fmt::format("node {}: CXL latency must exceed local latency", n.name));
    }
  }
  if (report_window_ns == 0) throw ConfigError("report window must be positive");
  if (swap_latency_ns < 0.0 || migration_cost_ns < 0.0) throw ConfigError("costs must be non-negative");
  if (page_size_bytes == 0) throw ConfigError("page size must be positive");
  policy.validate();
}

double access_latency(const NodeState& node, double window_utilization) {
  const double u = std::clamp(window_utilization, 0.0, 0.95);
  return node.base_latency_ns / (1.0 - u);
}

double steady_state_utilization(std::span<const double> shares, std::span<const double> bandwidths) {
  if (shares.empty() || shares.size() != bandwidths.size()) {
    throw DegenerateShare("shares and bandwidths must be non-empty and the same length");
  }
  double share_sum = 0.0;
  double bw_sum = 0.0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    if (!(shares[i] >= 0.0)) throw DegenerateShare("negative share");
    if (!(bandwidths[i] > 0.0) || std::isinf(bandwidths[i])) throw DegenerateShare("bandwidth must be finite and > 0");
    share_sum += shares[i];
    bw_sum += bandwidths[i];
  }
  if (std::abs(share_sum - 1.0) > 1e-9) throw DegenerateShare(fmt::format("shares sum to {}", share_sum));
  double rate = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < shares.size(); ++i) {
    if (shares[i] > 0.0) rate = std::min(rate, bandwidths[i] / shares[i]);
  }
  return rate / bw_sum;
}

Simulator::Simulator(SimConfig config) : config_(std::move(config)) {
  config_.validate();
  std::optional<double> dsf;
  if (config_.policy.decoupled()) dsf = config_.policy.demote_scale_factor;
  mem_ = TieredMemory(make_nodes(config_.nodes, config_.watermarks, dsf), config_.swap_enabled);
  state_ = PolicyState::initial(config_.policy, mem_);
  reclaimers_.resize(mem_.nodes().size());
  node_latency_.resize(mem_.nodes().size());
  for (const NodeState& n : mem_.nodes()) node_latency_[n.id] = n.base_latency_ns;
  next_scan_ = config_.policy.scan_period_ns;
}

Simulator::Window& Simulator::window_at(SimTime t) {
  const std::size_t idx = t / config_.report_window_ns;
  if (idx >= windows_.size()) {
    Window empty;
    empty.node_accesses.assign(mem_.nodes().size(), 0);
    windows_.resize(idx + 1, empty);
  }
  return windows_[idx];
}

void Simulator::refresh_latency(SimTime t) {
  const std::size_t idx = t / config_.report_window_ns;
  if (idx == latency_window_) return;
  latency_window_ = idx;
  const double window_us = static_cast<double>(config_.report_window_ns) / kNsPerUs;
  for (const NodeState& n : mem_.nodes()) {
    double u = 0.0;
    if (idx > 0 && idx - 1 < windows_.size() && !std::isinf(n.bandwidth)) {
      u = static_cast<double>(windows_[idx - 1].node_accesses[n.id]) / (n.bandwidth * window_us);
    }
    node_latency_[n.id] = access_latency(n, u);
  }
}

void Simulator::stop_reclaimer(NodeId node) {
  mem_.node(node).reclaiming = false;
  for (PageId p : reclaimers_[node].pending) {
    if (PageFrame* f = mem_.find(p)) f->isolated = false;
  }
  reclaimers_[node].pending.clear();
}

void Simulator::wake_reclaimers(SimTime now) {
  for (NodeState& n : mem_.nodes()) {
    if (!n.reclaiming && reclaim_triggered(config_.policy, n)) {
      n.reclaiming = true;
      reclaimers_[n.id].busy_until = std::max(reclaimers_[n.id].busy_until, now);
    }
  }
}

void Simulator::run_reclaimers(SimTime until) {
  const PolicySpec& spec = config_.policy;
  for (NodeState& node : mem_.nodes()) {
    Reclaimer& r = reclaimers_[node.id];
    while (node.reclaiming) {
      if (reclaim_satisfied(spec, node)) {
        stop_reclaimer(node.id);
        break;
      }
      const ReclaimAction action = planned_action(spec, mem_, node.id);
      if (action == ReclaimAction::None) {
        stop_reclaimer(node.id);
        break;
      }
      if (r.pending.empty()) {
        mem_.balance_lists(node.id);
        for (PageId p : mem_.select_reclaim_candidates(node.id, spec.demotion_batch, true, spec.demote_file_first)) {
          mem_.find(p)->isolated = true;
          r.pending.push_back(p);
        }
        if (r.pending.empty()) {
          stop_reclaimer(node.id);
          break;
        }
      }
      PageFrame* f = mem_.find(r.pending.front());
      if (f == nullptr || !f->isolated || f->node != node.id || f->lru != LruKind::Inactive) {
        // Freed, re-referenced or already gone since it was queued.
        if (f != nullptr) f->isolated = false;
        r.pending.pop_front();
        continue;
      }
      const double cost = action == ReclaimAction::Demote ? config_.migration_cost_ns : config_.swap_latency_ns;
      const SimTime done = r.busy_until + static_cast<SimTime>(std::llround(cost));
      if (done > until) break;
      r.busy_until = done;
      const PageId page = r.pending.front();
      r.pending.pop_front();
      if (reclaim_page(spec, mem_, page, done) == ReclaimAction::Demote) {
        ++window_at(done).demotions;
        // The demotion target may have just crossed its own trigger; later
        // nodes in this pass catch up from `done`.
        wake_reclaimers(done);
      }
    }
  }
}

void Simulator::advance_to(SimTime t) {
  const PolicySpec& spec = config_.policy;
  if (spec.scans()) {
    while (next_scan_ <= t) {
      run_reclaimers(next_scan_);
      numa_scan(spec, mem_, state_);
      const std::uint64_t demoted = autotiering_period(spec, mem_, state_, next_scan_);
      if (demoted > 0) window_at(next_scan_).demotions += demoted;
      wake_reclaimers(next_scan_);
      next_scan_ += spec.scan_period_ns;
    }
  }
  run_reclaimers(t);
}

bool Simulator::direct_reclaim(double& stall_ns) {
  const PolicySpec& spec = config_.policy;
  for (NodeId id : mem_.nodes_by_distance()) {
    if (planned_action(spec, mem_, id) == ReclaimAction::None) continue;
    stop_reclaimer(id);
    mem_.balance_lists(id);
    std::uint64_t freed = 0;
    for (PageId p : mem_.select_reclaim_candidates(id, spec.demotion_batch, true, spec.demote_file_first)) {
      const ReclaimAction a = reclaim_page(spec, mem_, p, now_);
      if (a == ReclaimAction::None) break;
      if (a == ReclaimAction::Demote) ++window_at(now_).demotions;
      stall_ns += a == ReclaimAction::Demote ? config_.migration_cost_ns : config_.swap_latency_ns;
      ++freed;
    }
    // Demotion only shuffles pages between nodes; keep going until a frame
    // actually left memory or some node gained room for the new page.
    if (freed > 0) return true;
  }
  return false;
}

NodeId Simulator::place_with_direct_reclaim(PageType type, double& stall_ns) {
  try {
    return place_page(config_.policy, type, mem_, state_);
  } catch (const OutOfMemory&) {
    if (!direct_reclaim(stall_ns)) throw;
  }
  return place_page(config_.policy, type, mem_, state_);
}

void Simulator::step(const TraceEvent& e) {
  if (started_ && e.time < now_) {
    throw TraceError(fmt::format("event at {} precedes current time {}", e.time, now_));
  }
  started_ = true;
  advance_to(e.time);
  now_ = e.time;
  refresh_latency(now_);
  ++events_;
  Window& w = window_at(now_);
  CounterSet& c = mem_.counters();

  switch (e.op) {
    case Op::Alloc: {
      if (mem_.resident(e.page) || mem_.swapped(e.page)) {
        throw TraceError(fmt::format("alloc of live page {}", e.page));
      }
      double stall = 0.0;
      const NodeId target = place_with_direct_reclaim(e.type, stall);
      mem_.lru_insert(target, e.page, e.type, LruKind::Inactive, now_);
      const bool local = mem_.node(target).tier == Tier::Local;
      c.add(local ? Counter::PgallocLocal : Counter::PgallocCxl);
      ++w.allocations;
      if (local) ++w.allocations_local;
      w.latency_ns += stall;
      ++live_;
      break;
    }
    case Op::Load:
    case Op::Store: {
      PageFrame* f = mem_.find(e.page);
      double extra = 0.0;
      if (f == nullptr) {
        if (!mem_.swapped(e.page)) throw TraceError(fmt::format("access to unallocated page {}", e.page));
        try {
          f = &swap_in(e.page, config_.policy, mem_, state_, now_);
        } catch (const OutOfMemory&) {
          if (!direct_reclaim(extra)) throw;
          f = &swap_in(e.page, config_.policy, mem_, state_, now_);
        }
        extra += config_.swap_latency_ns;
      }
      const AccessCosts costs{node_latency_, config_.migration_cost_ns};
      const AccessResult r = handle_access(config_.policy, *f, now_, mem_, state_, costs);
      ++w.node_accesses[r.served_by];
      w.latency_ns += r.latency_ns + extra;
      if (r.promotion == PromotionOutcome::Promoted) ++w.promotions;
      break;
    }
    case Op::Free: {
      if (mem_.resident(e.page)) mem_.release(e.page);
      else if (mem_.swapped(e.page)) mem_.forget_swapped(e.page);
      else throw TraceError(fmt::format("free of unallocated page {}", e.page));
      --live_;
      break;
    }
  }
  w.live_pages = live_;
  wake_reclaimers(now_);
}

WindowStats Simulator::summarize(const Window& w, SimTime start, double duration_ns) const {
  WindowStats s;
  s.start_ns = start;
  double bw_sum = 0.0;
  double busiest_us = 0.0;
  for (const NodeState& n : mem_.nodes()) {
    const std::uint64_t a = w.node_accesses[n.id];
    s.accesses += a;
    (n.tier == Tier::Local ? s.local_accesses : s.cxl_accesses) += a;
    bw_sum += n.bandwidth;
    busiest_us = std::max(busiest_us, static_cast<double>(a) / n.bandwidth);
  }
  if (s.accesses > 0) {
    const double total = static_cast<double>(s.accesses);
    s.local_traffic_fraction = static_cast<double>(s.local_accesses) / total;
    s.cxl_traffic_fraction = static_cast<double>(s.cxl_accesses) / total;
    s.mean_access_latency_ns = w.latency_ns / total;
    if (!std::isinf(bw_sum)) {
      // The busiest node stretches the window when demand exceeds its bandwidth.
      const double span_us = std::max(duration_ns / kNsPerUs, busiest_us);
      s.bandwidth_utilization = std::min(1.0, total / (span_us * bw_sum));
    }
  }
  const double seconds = duration_ns / kNsPerSec;
  s.allocations = w.allocations;
  s.allocations_local = w.allocations_local;
  s.promotions = w.promotions;
  s.demotions = w.demotions;
  s.live_pages = w.live_pages.value_or(0);
  s.allocation_rate_local = static_cast<double>(w.allocations_local) / seconds;
  s.promotion_rate = static_cast<double>(w.promotions) / seconds;
  s.demotion_rate = static_cast<double>(w.demotions) / seconds;
  return s;
}

SimReport Simulator::finish() {
  SimReport report;
  report.events = events_;
  report.report_window_ns = config_.report_window_ns;
  if (started_) {
    advance_to(now_);
  }
  const double width = static_cast<double>(config_.report_window_ns);
  Window total;
  total.node_accesses.assign(mem_.nodes().size(), 0);
  double busy_span_us = 0.0;
  double bw_sum = 0.0;
  for (const NodeState& n : mem_.nodes()) bw_sum += n.bandwidth;
  std::uint64_t live = 0;
  for (std::size_t i = 0; i < windows_.size(); ++i) {
    Window& w = windows_[i];
    // Quiet windows inherit the footprint of the last active one.
    if (w.live_pages) live = *w.live_pages;
    w.live_pages = live;
    report.windows.push_back(summarize(w, i * config_.report_window_ns, width));
    for (std::size_t n = 0; n < w.node_accesses.size(); ++n) total.node_accesses[n] += w.node_accesses[n];
    total.latency_ns += w.latency_ns;
    total.allocations += w.allocations;
    total.allocations_local += w.allocations_local;
    total.promotions += w.promotions;
    total.demotions += w.demotions;
    const WindowStats& ws = report.windows.back();
    if (ws.accesses > 0 && ws.bandwidth_utilization > 0.0) {
      busy_span_us += static_cast<double>(ws.accesses) / (ws.bandwidth_utilization * bw_sum);
    }
  }
  total.live_pages = live_;
  report.totals = summarize(total, 0, width * static_cast<double>(std::max<std::size_t>(windows_.size(), 1)));
  if (busy_span_us > 0.0) {
    // Utilization over windows that carried traffic only.
    report.totals.bandwidth_utilization = static_cast<double>(report.totals.accesses) / (busy_span_us * bw_sum);
  }
  if (total.latency_ns > 0.0) {
    report.throughput_proxy = static_cast<double>(report.totals.accesses) / (total.latency_ns / kNsPerSec);
  }
  report.counters = mem_.counters();
  return report;
}

SimReport run(std::span<const TraceEvent> trace, const SimConfig& config) {
  Simulator sim(config);
  for (const TraceEvent& e : trace) sim.step(e);
  return sim.finish();
}

}  // namespace tiersim
