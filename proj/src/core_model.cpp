#include "tiersim/core_model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace tiersim {

WatermarkSet WatermarkSet::resolve(std::uint64_t capacity, const WatermarkFractions& fractions,
                                   std::optional<double> demote_scale_factor) {
  auto pages = [capacity](double fraction) {
    if (!(fraction >= 0.0)) throw ConfigError(fmt::format("watermark fraction {} is negative", fraction));
    return static_cast<std::uint64_t>(std::llround(fraction * static_cast<double>(capacity)));
  };
  WatermarkSet w;
  w.min = std::max<std::uint64_t>(pages(fractions.min), 1);
  w.low = std::max(pages(fractions.low), w.min + 1);
  w.high = std::max(pages(fractions.high), w.low + 1);
  if (w.high > capacity) {
    throw ConfigError(fmt::format("capacity {} too small for watermarks min={} low={} high={}", capacity, w.min,
                                  w.low, w.high));
  }
  if (demote_scale_factor) {
    w.allocation = w.low;
    w.demotion = std::max(pages(*demote_scale_factor), w.allocation + 1);
    if (w.demotion > capacity) {
      throw ConfigError(fmt::format("capacity {} too small for demotion watermark {}", capacity, w.demotion));
    }
  }
  return w;
}

std::string_view to_string(WatermarkState s) {
  switch (s) {
    case WatermarkState::Ok: return "ok";
    case WatermarkState::BelowDemotion: return "below_demotion";
    case WatermarkState::BelowAllocation: return "below_allocation";
    case WatermarkState::BelowLow: return "below_low";
    case WatermarkState::BelowMin: return "below_min";
  }
  return "?";
}

WatermarkState watermark_state(const NodeState& node) {
  const auto& w = node.watermarks;
  if (node.free < w.min) return WatermarkState::BelowMin;
  if (node.free < w.low) return WatermarkState::BelowLow;
  if (node.free < w.allocation) return WatermarkState::BelowAllocation;
  if (node.free < w.demotion) return WatermarkState::BelowDemotion;
  return WatermarkState::Ok;
}

std::vector<NodeState> make_nodes(std::span<const NodeParams> params, const WatermarkFractions& fractions,
                                  std::optional<double> local_demote_scale_factor) {
  std::vector<NodeState> nodes;
  nodes.reserve(params.size());
  for (const auto& p : params) {
    NodeState n;
    n.id = static_cast<NodeId>(nodes.size());
    n.name = p.name;
    n.tier = p.tier;
    n.capacity = p.capacity;
    n.free = p.capacity;
    n.base_latency_ns = p.base_latency_ns;
    n.bandwidth = p.bandwidth;
    n.distance = p.distance;
    n.watermarks = WatermarkSet::resolve(
        p.capacity, fractions, p.tier == Tier::Local ? local_demote_scale_factor : std::nullopt);
    nodes.push_back(std::move(n));
  }
  return nodes;
}

TieredMemory::TieredMemory(std::vector<NodeState> nodes, bool swap_enabled)
    : nodes_(std::move(nodes)), swap_enabled_(swap_enabled) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    nodes_[i].id = static_cast<NodeId>(i);
    if (nodes_[i].tier == Tier::Local) {
      if (local_ != kNoNode) throw ConfigError("more than one local node");
      local_ = static_cast<NodeId>(i);
    }
  }
  if (local_ == kNoNode) throw ConfigError("no local node");
  by_distance_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) by_distance_[i] = static_cast<NodeId>(i);
  std::stable_sort(by_distance_.begin(), by_distance_.end(), [this](NodeId a, NodeId b) {
    // Local always sorts first; ties keep declaration order.
    auto key = [this](NodeId id) { return std::pair(nodes_[id].tier != Tier::Local, nodes_[id].distance); };
    return key(a) < key(b);
  });
  for (NodeId id : by_distance_) {
    if (nodes_[id].tier == Tier::Cxl) cxl_by_distance_.push_back(id);
  }
}

std::uint32_t TieredMemory::slot_of(PageId page) const {
  auto it = index_.find(page);
  if (it == index_.end()) throw TraceError(fmt::format("page {} is not resident", page));
  return it->second;
}

PageFrame* TieredMemory::find(PageId page) {
  auto it = index_.find(page);
  return it == index_.end() ? nullptr : &frames_[it->second];
}

const PageFrame* TieredMemory::find(PageId page) const {
  auto it = index_.find(page);
  return it == index_.end() ? nullptr : &frames_[it->second];
}

std::optional<PageType> TieredMemory::swapped_type(PageId page) const {
  auto it = swap_.find(page);
  if (it == swap_.end()) return std::nullopt;
  return it->second;
}

void TieredMemory::link_head(NodeState& node, std::uint32_t slot, LruKind kind) {
  PageFrame& f = frames_[slot];
  LruList& list = node.lists[lru_index(f.type, kind)];
  f.node = node.id;
  f.lru = kind;
  f.list_stamp = next_stamp_++;
  f.prev = kNilSlot;
  f.next = list.head;
  if (list.head != kNilSlot) frames_[list.head].prev = slot;
  list.head = slot;
  if (list.tail == kNilSlot) list.tail = slot;
  ++list.size;
}

void TieredMemory::unlink(NodeState& node, std::uint32_t slot) {
  PageFrame& f = frames_[slot];
  LruList& list = node.lists[lru_index(f.type, f.lru)];
  if (f.prev != kNilSlot) frames_[f.prev].next = f.next;
  else list.head = f.next;
  if (f.next != kNilSlot) frames_[f.next].prev = f.prev;
  else list.tail = f.prev;
  f.prev = f.next = kNilSlot;
  --list.size;
}

PageFrame& TieredMemory::lru_insert(NodeId node_id, PageId page, PageType type, LruKind kind, SimTime now) {
  NodeState& node = nodes_.at(node_id);
  if (node.free == 0) throw NoFreePages(fmt::format("node {} has no free pages", node.name));
  if (index_.contains(page)) throw TraceError(fmt::format("page {} is already resident", page));
  std::uint32_t slot;
  if (!free_slots_.empty()) {
    slot = free_slots_.back();
    free_slots_.pop_back();
  } else {
    slot = static_cast<std::uint32_t>(frames_.size());
    frames_.emplace_back();
  }
  frames_[slot] = PageFrame{};
  frames_[slot].page = page;
  frames_[slot].type = type;
  frames_[slot].last_access = now;
  link_head(node, slot, kind);
  --node.free;
  index_.emplace(page, slot);
  return frames_[slot];
}

void TieredMemory::mark_accessed(PageFrame& frame, SimTime now) {
  NodeState& node = nodes_.at(frame.node);
  auto slot = static_cast<std::uint32_t>(&frame - frames_.data());
  unlink(node, slot);
  link_head(node, slot, LruKind::Active);
  frame.last_access = now;
  ++frame.access_count;
  ++frame.node_accesses;
}

std::uint64_t TieredMemory::deactivate(NodeId node_id, PageType type, std::uint64_t n) {
  NodeState& node = nodes_.at(node_id);
  std::uint64_t moved = 0;
  while (moved < n) {
    std::uint32_t slot = node.lists[lru_index(type, LruKind::Active)].tail;
    if (slot == kNilSlot) break;
    unlink(node, slot);
    link_head(node, slot, LruKind::Inactive);
    ++moved;
  }
  return moved;
}

void TieredMemory::balance_lists(NodeId node_id) {
  const NodeState& node = nodes_.at(node_id);
  for (PageType type : {PageType::File, PageType::Anon}) {
    std::uint64_t active = node.list(type, LruKind::Active).size;
    std::uint64_t inactive = node.list(type, LruKind::Inactive).size;
    if (inactive < active) deactivate(node_id, type, (active - inactive + 1) / 2);
  }
}

std::vector<PageId> TieredMemory::select_reclaim_candidates(NodeId node_id, std::uint64_t n, bool include_anon,
                                                            bool file_first) const {
  const NodeState& node = nodes_.at(node_id);
  std::vector<PageId> out;
  std::uint32_t file_cursor = node.list(PageType::File, LruKind::Inactive).tail;
  std::uint32_t anon_cursor = include_anon ? node.list(PageType::Anon, LruKind::Inactive).tail : kNilSlot;
  // Walks one list towards its head, returning the next non-isolated page.
  auto take = [this](std::uint32_t& cursor) -> std::optional<PageId> {
    while (cursor != kNilSlot) {
      const PageFrame& f = frames_[cursor];
      cursor = f.prev;
      if (!f.isolated) return f.page;
    }
    return std::nullopt;
  };
  bool anon_turn = false;
  while (out.size() < n && (file_cursor != kNilSlot || anon_cursor != kNilSlot)) {
    std::optional<PageId> next;
    if (file_first) {
      next = take(file_cursor);
      if (!next) next = take(anon_cursor);
    } else {
      next = anon_turn ? take(anon_cursor) : take(file_cursor);
      if (!next) next = anon_turn ? take(file_cursor) : take(anon_cursor);
      anon_turn = !anon_turn;
    }
    if (!next) break;
    out.push_back(*next);
  }
  return out;
}

PageFrame& TieredMemory::migrate(PageId page, NodeId dest_id, LruKind kind, SimTime /*now*/) {
  std::uint32_t slot = slot_of(page);
  NodeState& dest = nodes_.at(dest_id);
  if (dest.free == 0) throw NoFreePages(fmt::format("node {} has no free pages", dest.name));
  PageFrame& f = frames_[slot];
  NodeState& src = nodes_.at(f.node);
  unlink(src, slot);
  ++src.free;
  link_head(dest, slot, kind);
  --dest.free;
  f.node_accesses = 0;
  f.isolated = false;
  return f;
}

PageFrame TieredMemory::release(PageId page) {
  std::uint32_t slot = slot_of(page);
  PageFrame& f = frames_[slot];
  NodeState& node = nodes_.at(f.node);
  unlink(node, slot);
  ++node.free;
  PageFrame out = f;
  f = PageFrame{};
  index_.erase(page);
  free_slots_.push_back(slot);
  return out;
}

void TieredMemory::swap_out(PageId page) {
  PageFrame f = release(page);
  swap_.emplace(page, f.type);
}

PageType TieredMemory::take_from_swap(PageId page) {
  auto it = swap_.find(page);
  if (it == swap_.end()) throw TraceError(fmt::format("page {} is not in swap", page));
  PageType t = it->second;
  swap_.erase(it);
  return t;
}

std::vector<PageId> TieredMemory::list_pages(NodeId node_id, PageType type, LruKind kind) const {
  const LruList& list = nodes_.at(node_id).list(type, kind);
  std::vector<PageId> out;
  out.reserve(list.size);
  for (std::uint32_t s = list.head; s != kNilSlot; s = frames_[s].next) out.push_back(frames_[s].page);
  return out;
}

void TieredMemory::check_invariants() const {
  auto fail = [](const std::string& what) { throw InvariantViolation(what); };
  std::uint64_t listed = 0;
  for (const NodeState& node : nodes_) {
    const auto& w = node.watermarks;
    if (!(w.min < w.low && w.low < w.high && w.high <= node.capacity)) {
      fail(fmt::format("node {}: watermark order violated", node.name));
    }
    if (w.decoupled() && w.demotion <= w.allocation) {
      fail(fmt::format("node {}: demotion watermark not above allocation", node.name));
    }
    std::uint64_t on_node = 0;
    for (PageType type : {PageType::Anon, PageType::File}) {
      for (LruKind kind : {LruKind::Active, LruKind::Inactive}) {
        const LruList& list = node.list(type, kind);
        std::uint64_t count = 0;
        std::uint32_t prev = kNilSlot;
        std::uint64_t prev_stamp = 0;
        for (std::uint32_t s = list.head; s != kNilSlot; s = frames_[s].next) {
          const PageFrame& f = frames_[s];
          if (f.prev != prev) fail(fmt::format("page {}: broken back link", f.page));
          if (f.node != node.id || f.type != type || f.lru != kind) {
            fail(fmt::format("page {}: frame fields disagree with its list", f.page));
          }
          if (prev != kNilSlot && f.list_stamp >= prev_stamp) {
            fail(fmt::format("page {}: list not in head-insertion order", f.page));
          }
          auto it = index_.find(f.page);
          if (it == index_.end() || it->second != s) fail(fmt::format("page {}: index mismatch", f.page));
          if (swap_.contains(f.page)) fail(fmt::format("page {}: resident and swapped", f.page));
          if (f.demoted_flag && nodes_[f.node].tier == Tier::Local) {
            fail(fmt::format("page {}: demoted flag set on a local page", f.page));
          }
          prev = s;
          prev_stamp = f.list_stamp;
          if (++count > list.size) fail(fmt::format("node {}: list longer than its size", node.name));
        }
        if (count != list.size || list.tail != prev) fail(fmt::format("node {}: list size/tail mismatch", node.name));
        on_node += count;
      }
    }
    if (on_node > node.capacity || node.free != node.capacity - on_node) {
      fail(fmt::format("node {}: free {} != capacity {} - resident {}", node.name, node.free, node.capacity, on_node));
    }
    listed += on_node;
  }
  if (listed != index_.size()) fail("resident index disagrees with LRU lists");
  const CounterSet& c = counters_;
  for (PageType t : {PageType::Anon, PageType::File}) {
    if (c[pgpromote_success(t)] > c[pgpromote_candidate(t)] ||
        c[pgpromote_candidate(t)] > c[pgpromote_sampled(t)]) {
      fail(fmt::format("pgpromote chain violated for {}", to_string(t)));
    }
  }
}

}  // namespace tiersim
