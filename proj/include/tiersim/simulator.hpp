#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "tiersim/core_model.hpp"
#include "tiersim/policy.hpp"
#include "tiersim/trace.hpp"

namespace tiersim {

struct SimConfig {
  std::vector<NodeParams> nodes;
  WatermarkFractions watermarks;
  PolicySpec policy;
  double swap_latency_ns = 10'000.0;
  // Charged to the reclaimer's time budget for demotions and to the faulting
  // access for promotions.
  double migration_cost_ns = 1'000.0;
  SimTime report_window_ns = 10 * kNsPerMs;
  std::uint64_t seed = 1;
  bool swap_enabled = true;
  std::uint64_t page_size_bytes = kDefaultPageSize;

  // Local (100 ns) plus one CXL node (170 ns) of the given capacities.
  static SimConfig two_tier(std::uint64_t local_pages, std::uint64_t cxl_pages);

  // Throws ConfigError.
  void validate() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct WindowStats {
  SimTime start_ns = 0;
  std::uint64_t accesses = 0;
  std::uint64_t local_accesses = 0;
  std::uint64_t cxl_accesses = 0;
  double local_traffic_fraction = 0.0;
  double cxl_traffic_fraction = 0.0;
  double mean_access_latency_ns = 0.0;
  double bandwidth_utilization = 0.0;
  // Pages per simulated second.
  double allocation_rate_local = 0.0;
  double promotion_rate = 0.0;
  double demotion_rate = 0.0;
  // Alloc events from the trace, wherever they landed.
  std::uint64_t allocations = 0;
  std::uint64_t allocations_local = 0;
  std::uint64_t promotions = 0;
  std::uint64_t demotions = 0;
  // Allocated and not yet freed at the end of the window, wherever resident.
  std::uint64_t live_pages = 0;

  friend bool operator==(const WindowStats&, const WindowStats&) = default;
};

struct SimReport {
  CounterSet counters;
  std::vector<WindowStats> windows;
  WindowStats totals;
  // Completed accesses per second of charged latency.
  double throughput_proxy = 0.0;
  std::uint64_t events = 0;
  SimTime report_window_ns = 0;

  friend bool operator==(const SimReport&, const SimReport&) = default;
};

// Queueing-inflated access latency: base / (1 - u), u clamped to [0, 0.95].
double access_latency(const NodeState& node, double window_utilization);

// Fraction of aggregate bandwidth achievable when each node receives `shares`
// of the traffic: min over nodes with nonzero share of bandwidth/share,
// divided by total bandwidth. Throws DegenerateShare on invalid inputs.
double steady_state_utilization(std::span<const double> shares, std::span<const double> bandwidths);

// Feeds one trace through a policy. Single-threaded; one instance per run.
class Simulator {
 public:
  explicit Simulator(SimConfig config);

  // Throws TraceError for out-of-order or inconsistent events and
  // OutOfMemory when nothing can host a page.
  void step(const TraceEvent& event);
  SimReport finish();

  const SimConfig& config() const { return config_; }
  const TieredMemory& memory() const { return mem_; }
  const PolicyState& policy_state() const { return state_; }
  SimTime now() const { return now_; }

 private:
  struct Window {
    std::vector<std::uint64_t> node_accesses;
    double latency_ns = 0.0;
    std::uint64_t allocations = 0;
    std::uint64_t allocations_local = 0;
    std::uint64_t promotions = 0;
    std::uint64_t demotions = 0;
    std::optional<std::uint64_t> live_pages;
  };
  struct Reclaimer {
    std::deque<PageId> pending;
    SimTime busy_until = 0;
  };

  void advance_to(SimTime t);
  void run_reclaimers(SimTime until);
  void stop_reclaimer(NodeId node);
  void wake_reclaimers(SimTime now);
  NodeId place_with_direct_reclaim(PageType type, double& stall_ns);
  bool direct_reclaim(double& stall_ns);
  Window& window_at(SimTime t);
  void refresh_latency(SimTime t);
  WindowStats summarize(const Window& w, SimTime start, double duration_ns) const;

  SimConfig config_;
  TieredMemory mem_;
  PolicyState state_;
  std::vector<Reclaimer> reclaimers_;
  std::vector<double> node_latency_;
  std::vector<Window> windows_;
  std::size_t latency_window_ = ~std::size_t{0};
  SimTime now_ = 0;
  SimTime next_scan_ = 0;
  std::uint64_t events_ = 0;
  std::uint64_t live_ = 0;
  bool started_ = false;
};

SimReport run(std::span<const TraceEvent> trace, const SimConfig& config);

}  // namespace tiersim
