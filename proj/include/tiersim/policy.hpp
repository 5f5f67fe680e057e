#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tiersim/core_model.hpp"

namespace tiersim {

enum class PolicyKind : std::uint8_t { DefaultLinux, NumaBalancing, Tpp, AutoTieringLike };

std::string_view to_string(PolicyKind k);
std::optional<PolicyKind> parse_policy_kind(std::string_view s);

struct Interleave {
  std::uint32_t n = 1;
  std::uint32_t k = 1;
  friend bool operator==(const Interleave&, const Interleave&) = default;
};

inline constexpr std::uint64_t kDefaultPageSize = 4096;

// Pages covered by the default 256 MB NUMA scan window.
constexpr std::uint64_t default_scan_quota(std::uint64_t page_size_bytes) {
  return (std::uint64_t{256} << 20) / page_size_bytes;
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::DefaultLinux;
  std::optional<Interleave> interleave;
  bool type_aware_alloc = false;
  // Tpp only.
  bool active_lru_filter = true;
  bool decouple_watermarks = true;
  double demote_scale_factor = 0.02;
  bool demote_file_first = true;
  bool demote_to_active = false;
  // Pages poisoned per node per scan pass.
  std::uint64_t scan_quota = default_scan_quota(kDefaultPageSize);
  SimTime scan_period_ns = kNsPerSec;
  std::uint32_t demotion_batch = 32;
  // AutoTieringLike only.
  double reserved_promo_buffer = 0.01;
  std::uint32_t cold_threshold = 1;

  // Throws ConfigError on out-of-range tunables.
  void validate() const;

  bool demotes() const { return kind == PolicyKind::Tpp || kind == PolicyKind::AutoTieringLike; }
  bool decoupled() const { return kind == PolicyKind::Tpp && decouple_watermarks; }
  bool scans() const { return kind != PolicyKind::DefaultLinux; }

  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

enum class PromotionOutcome : std::uint8_t {
  Promoted,
  DeferredMarkedAccessed,
  FailedLowMemory,
  FailedPageBusy,
  NotCandidate,
};

std::string_view to_string(PromotionOutcome o);

// Position within the N-local/K-CXL allocation cycle.
struct InterleaveCursor {
  std::uint64_t position = 0;
};

// Mutable per-run policy bookkeeping that is not part of the memory image.
struct PolicyState {
  InterleaveCursor interleave;
  std::vector<std::uint64_t> scan_cursor;  // per node
  std::uint64_t promo_buffer = 0;          // AutoTieringLike reserved pages available
  std::uint64_t promo_buffer_capacity = 0;

  static PolicyState initial(const PolicySpec& spec, const TieredMemory& mem);
};

// Whether new allocations may land on `node` right now. Local nodes follow
// the policy's watermark rule; CXL nodes need free > min.
bool allocation_permitted(const PolicySpec& spec, const NodeState& node, const PolicyState& state);

// Picks the node for a new page. Throws OutOfMemory if every node is full.
NodeId place_page(const PolicySpec& spec, PageType type, const TieredMemory& mem, PolicyState& state);

struct AccessCosts {
  // Current per-node access latency, indexed by NodeId.
  std::span<const double> node_latency_ns;
  double migration_cost_ns = 1'000.0;
};

struct AccessResult {
  double latency_ns = 0.0;
  NodeId served_by = kNoNode;
  std::optional<PromotionOutcome> promotion;
};

// Charges one Load/Store on a resident page, activates it and, if it carried
// a poisoned hint, runs the policy's promotion path.
AccessResult handle_access(const PolicySpec& spec, PageFrame& frame, SimTime now, TieredMemory& mem,
                           PolicyState& state, const AccessCosts& costs);

// Moves a CXL page to the local Active list of its type, provided local keeps
// at least `min_free` (never less than 1) free pages before the move.
PromotionOutcome promote(PageFrame& frame, TieredMemory& mem, std::uint64_t min_free, SimTime now);

// One sampling pass: poisons up to scan_quota pages per eligible node.
std::uint64_t numa_scan(const PolicySpec& spec, TieredMemory& mem, PolicyState& state);

enum class ReclaimAction : std::uint8_t { Demote, SwapOut, None };

struct ReclaimResult {
  std::uint64_t demoted = 0;
  std::uint64_t swapped = 0;
  std::uint64_t freed() const { return demoted + swapped; }
};

// Whether `node` is below the watermark that wakes its reclaimer.
bool reclaim_triggered(const PolicySpec& spec, const NodeState& node);
// Whether `node` has reached the watermark where its reclaimer sleeps.
bool reclaim_satisfied(const PolicySpec& spec, const NodeState& node);
// How the next page reclaimed from `node` would leave it.
ReclaimAction planned_action(const PolicySpec& spec, const TieredMemory& mem, NodeId node);
// Demotes the page or swaps it out, whichever `planned_action` allows.
ReclaimAction reclaim_page(const PolicySpec& spec, TieredMemory& mem, PageId page, SimTime now);

// Reclaims from `node` until it satisfies its target watermark, `max_pages`
// have left, or no inactive candidates remain. Untimed.
ReclaimResult background_reclaim(const PolicySpec& spec, TieredMemory& mem, NodeId node, std::uint64_t max_pages,
                                 SimTime now);

// Brings a swapped page back through place_page, inserting it Inactive.
PageFrame& swap_in(PageId page, const PolicySpec& spec, TieredMemory& mem, PolicyState& state, SimTime now);

// AutoTieringLike end-of-period pass: demotes local pages whose access count
// in the period fell below the threshold (as many as the promotion buffer
// can absorb), then resets all access counts. Returns pages demoted.
std::uint64_t autotiering_period(const PolicySpec& spec, TieredMemory& mem, PolicyState& state, SimTime now);

}  // namespace tiersim
