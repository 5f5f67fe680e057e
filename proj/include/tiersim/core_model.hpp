#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tiersim/counters.hpp"
#include "tiersim/types.hpp"

namespace tiersim {

// Watermarks as fractions of node capacity.
struct WatermarkFractions {
  double min = 0.005;
  double low = 0.010;
  double high = 0.015;

  friend bool operator==(const WatermarkFractions&, const WatermarkFractions&) = default;
};

// Free-page thresholds, in pages. `allocation` and `demotion` are zero unless
// the node runs with decoupled allocation/reclaim thresholds.
struct WatermarkSet {
  std::uint64_t min = 0;
  std::uint64_t low = 0;
  std::uint64_t high = 0;
  std::uint64_t allocation = 0;
  std::uint64_t demotion = 0;

  // Resolves fractions against `capacity`, nudging upward where rounding would
  // collapse two thresholds. With `demote_scale_factor` set, allocation = low and
  // demotion = max(scale * capacity, allocation + 1). Throws ConfigError if the
  // node is too small to keep min < low < high <= capacity.
  static WatermarkSet resolve(std::uint64_t capacity, const WatermarkFractions& fractions,
                              std::optional<double> demote_scale_factor = std::nullopt);

  bool decoupled() const { return demotion != 0; }

  friend bool operator==(const WatermarkSet&, const WatermarkSet&) = default;
};

// Ordered from least to most severe.
enum class WatermarkState { Ok, BelowDemotion, BelowAllocation, BelowLow, BelowMin };

std::string_view to_string(WatermarkState s);

inline constexpr std::uint32_t kNilSlot = ~std::uint32_t{0};

struct LruList {
  std::uint32_t head = kNilSlot;
  std::uint32_t tail = kNilSlot;
  std::uint64_t size = 0;
};

constexpr std::size_t lru_index(PageType type, LruKind kind) {
  return static_cast<std::size_t>(type) * 2 + static_cast<std::size_t>(kind);
}

struct PageFrame {
  PageId page = 0;
  PageType type = PageType::Anon;
  NodeId node = kNoNode;
  LruKind lru = LruKind::Inactive;
  bool demoted_flag = false;
  bool hint_poisoned = false;
  // Queued on a demotion list; migration may complete at any moment.
  bool isolated = false;
  SimTime last_access = 0;
  // Accesses in the current AutoTiering-like sampling period.
  std::uint64_t access_count = 0;
  // Accesses since the page arrived on its current node.
  std::uint64_t node_accesses = 0;
  // Sequence number of the last head insertion; lists are strictly
  // decreasing in stamp from head to tail.
  std::uint64_t list_stamp = 0;
  std::uint32_t prev = kNilSlot;
  std::uint32_t next = kNilSlot;
};

struct NodeParams {
  std::string name;
  Tier tier = Tier::Local;
  std::uint64_t capacity = 0;
  double base_latency_ns = 100.0;
  // Accesses per microsecond of simulated time; infinity disables queueing.
  double bandwidth = 25.0;
  std::uint32_t distance = 0;

  friend bool operator==(const NodeParams&, const NodeParams&) = default;
};

struct NodeState {
  NodeId id = 0;
  std::string name;
  Tier tier = Tier::Local;
  std::uint64_t capacity = 0;
  std::uint64_t free = 0;
  WatermarkSet watermarks;
  // Anon-Active, Anon-Inactive, File-Active, File-Inactive.
  std::array<LruList, 4> lists{};
  double base_latency_ns = 100.0;
  double bandwidth = 25.0;
  std::uint32_t distance = 0;
  // Background reclaim is awake for this node.
  bool reclaiming = false;

  const LruList& list(PageType type, LruKind kind) const { return lists[lru_index(type, kind)]; }
  std::uint64_t resident() const { return capacity - free; }
};

WatermarkState watermark_state(const NodeState& node);

// All resident pages of a run, the nodes they live on, the swap set and the
// counters. A plain value: copying it copies the whole memory system.
class TieredMemory {
 public:
  TieredMemory() = default;
  explicit TieredMemory(std::vector<NodeState> nodes, bool swap_enabled = true);

  std::span<NodeState> nodes() { return nodes_; }
  std::span<const NodeState> nodes() const { return nodes_; }
  NodeState& node(NodeId id) { return nodes_.at(id); }
  const NodeState& node(NodeId id) const { return nodes_.at(id); }
  NodeId local_node() const { return local_; }
  // Every node ordered by distance, local first.
  const std::vector<NodeId>& nodes_by_distance() const { return by_distance_; }
  // CXL nodes ordered by distance.
  const std::vector<NodeId>& cxl_nodes() const { return cxl_by_distance_; }

  PageFrame* find(PageId page);
  const PageFrame* find(PageId page) const;
  bool resident(PageId page) const { return index_.contains(page); }
  std::uint64_t resident_pages() const { return index_.size(); }

  bool swap_enabled() const { return swap_enabled_; }
  bool swapped(PageId page) const { return swap_.contains(page); }
  std::uint64_t swapped_pages() const { return swap_.size(); }
  std::optional<PageType> swapped_type(PageId page) const;

  // Places a new page at the head of the chosen list.
  // Throws NoFreePages when the node is full, TraceError if the page is live.
  PageFrame& lru_insert(NodeId node, PageId page, PageType type, LruKind list, SimTime now);

  // Moves the page to the head of its type's Active list.
  void mark_accessed(PageFrame& frame, SimTime now);

  // Moves up to `n` pages from the tail of the Active list to the head of the
  // Inactive list of the same type. Returns the number moved.
  std::uint64_t deactivate(NodeId node, PageType type, std::uint64_t n);

  // Deactivates Active tails until each type's Inactive list is at least as
  // long as its Active list.
  void balance_lists(NodeId node);

  // Up to `n` pages from Inactive tails, File before Anon when `file_first`
  // (otherwise alternating), skipping isolated pages. Nothing is removed.
  std::vector<PageId> select_reclaim_candidates(NodeId node, std::uint64_t n, bool include_anon,
                                                bool file_first = true) const;

  // Relinks a resident page onto another node. Throws NoFreePages.
  PageFrame& migrate(PageId page, NodeId dest, LruKind list, SimTime now);

  // Drops a resident page, returning its final state.
  PageFrame release(PageId page);

  void swap_out(PageId page);
  // Removes a page from the swap set and returns its type.
  PageType take_from_swap(PageId page);
  void forget_swapped(PageId page) { swap_.erase(page); }

  // Visits every resident page of `node`: Anon-Active, Anon-Inactive,
  // File-Active, File-Inactive, each head to tail.
  template <typename F>
  void for_each_resident(NodeId node_id, F&& fn) {
    const NodeState& node = nodes_.at(node_id);
    for (const LruList& list : node.lists) {
      for (std::uint32_t s = list.head; s != kNilSlot;) {
        std::uint32_t next = frames_[s].next;
        fn(frames_[s]);
        s = next;
      }
    }
  }

  // Head-to-tail contents of one list.
  std::vector<PageId> list_pages(NodeId node, PageType type, LruKind kind) const;

  CounterSet& counters() { return counters_; }
  const CounterSet& counters() const { return counters_; }

  // Walks every list and cross-checks frames, sizes, free counts and the swap
  // set. Throws InvariantViolation describing the first mismatch.
  void check_invariants() const;

 private:
  std::uint32_t slot_of(PageId page) const;
  void link_head(NodeState& node, std::uint32_t slot, LruKind kind);
  void unlink(NodeState& node, std::uint32_t slot);

  std::vector<NodeState> nodes_;
  std::vector<NodeId> by_distance_;
  std::vector<NodeId> cxl_by_distance_;
  NodeId local_ = kNoNode;
  bool swap_enabled_ = true;

  std::vector<PageFrame> frames_;
  std::vector<std::uint32_t> free_slots_;
  std::unordered_map<PageId, std::uint32_t> index_;
  std::unordered_map<PageId, PageType> swap_;
  std::uint64_t next_stamp_ = 1;
  CounterSet counters_;
};

// Builds node states from parameters, resolving watermarks. Exactly one node
// must be Local.
std::vector<NodeState> make_nodes(std::span<const NodeParams> params, const WatermarkFractions& fractions,
                                  std::optional<double> local_demote_scale_factor);

}  // namespace tiersim
