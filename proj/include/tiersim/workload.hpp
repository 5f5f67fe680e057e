#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "tiersim/random.hpp"
#include "tiersim/trace.hpp"

namespace tiersim {

enum class WorkloadKind : std::uint8_t {
  ZipfSteady,
  WebLike,
  CacheLike,
  WarehouseLike,
  PingPong,
  BurstyAlloc,
  UniformBandwidth,
};

std::string_view to_string(WorkloadKind k);
std::optional<WorkloadKind> parse_workload_kind(std::string_view s);

// Shape of a synthetic trace. Optional fields fall back to per-kind defaults.
struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::ZipfSteady;
  std::uint64_t total_pages = 100'000;
  std::optional<double> anon_fraction;
  // Fraction of a population that receives the Zipf-distributed accesses.
  double hot_fraction = 0.2;
  std::optional<double> file_hot_fraction;
  double zipf_s = 1.1;
  SimTime duration_ns = 2 * kNsPerSec;
  // Events per microsecond.
  double ops_rate = 1.0;
  // Free+alloc replacement pairs per simulated second.
  double churn_rate = 0.0;
  std::uint64_t seed = 1;

  // Share of accesses that go to anon pages when both types exist.
  std::optional<double> anon_access_share;
  // Share of accesses drawn uniformly over a whole population instead of
  // from its hot set.
  double cold_access_share = 0.02;
  double store_fraction = 0.3;
  SimTime rotation_period_ns = 120 * kNsPerSec;
  double rotation_fraction = 0.1;

  // WebLike: file warm-up and anon growth, as fractions of the duration.
  double warmup_fraction = 0.2;
  double growth_fraction = 0.2;
  // PingPong: share of pages that receive exactly one access.
  double one_touch_fraction = 0.7;
  // BurstyAlloc: a burst occupies the first `burst_duty` of every period;
  // within it each event is an allocation with probability burst_alloc_share.
  SimTime burst_period_ns = 100 * kNsPerMs;
  double burst_duty = 0.2;
  double burst_alloc_share = 0.5;
  SimTime burst_lifetime_ns = 50 * kNsPerMs;

  double resolved_anon_fraction() const;
  double resolved_file_hot_fraction() const { return file_hot_fraction.value_or(hot_fraction); }
  double resolved_anon_access_share() const;

  // Throws SpecError on inconsistent fractions or rates.
  void validate() const;

  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

// Streams a trace for a WorkloadSpec one event at a time. Deterministic per
// spec (including seed).
class TraceGenerator {
 public:
  explicit TraceGenerator(WorkloadSpec spec);

  std::optional<TraceEvent> next();

 private:
  // Pages ranked by heat; index 0 is the hottest.
  struct Population {
    PageType type = PageType::Anon;
    std::deque<PageId> ranked;
    double hot_fraction = 1.0;
    std::uint64_t hot_count() const;
  };

  void step(SimTime now);
  bool finished() const;
  PageId allocate(SimTime now, PageType type);
  bool web_allocation(SimTime now);
  void access(SimTime now);
  PageId pick(Population& pop);
  bool churn(SimTime now);
  void rotate(Population& pop);
  void shuffle(Population& pop);
  bool one_touch_loads(SimTime now);
  bool bursty(SimTime now);
  Population& population(PageType t) { return t == PageType::Anon ? anon_ : file_; }
  PageType next_type();
  SimTime time_of(std::uint64_t tick);
  void emit(SimTime t, Op op, PageId page, PageType type = PageType::Anon);

  WorkloadSpec spec_;
  Rng rng_;
  double anon_fraction_;
  double anon_access_share_;
  double period_ns_;
  std::uint64_t total_ticks_ = 0;
  std::uint64_t tick_ = 0;
  SimTime last_time_ = 0;
  PageId next_page_ = 0;
  std::uint64_t typed_ = 0;
  std::uint64_t anon_typed_ = 0;

  Population anon_;
  Population file_;
  std::deque<TraceEvent> out_;

  // Initial allocations: upfront kinds allocate this many before accessing.
  std::uint64_t initial_pages_ = 0;
  std::uint64_t initial_done_ = 0;
  bool shuffled_ = false;

  // WebLike phases, in ticks.
  std::uint64_t warmup_ticks_ = 0;
  std::uint64_t growth_ticks_ = 0;
  std::uint64_t file_target_ = 0;
  std::uint64_t anon_target_ = 0;
  std::uint64_t file_done_ = 0;
  std::uint64_t anon_done_ = 0;

  SimTime next_rotation_ = 0;
  double churn_per_tick_ = 0.0;
  double churn_debt_ = 0.0;

  // PingPong: pages that get exactly one Load, in schedule order.
  std::deque<PageId> one_touch_;
  std::uint64_t one_touch_total_ = 0;
  std::uint64_t one_touch_done_ = 0;
  std::uint64_t access_start_tick_ = 0;

  // BurstyAlloc short-lived pages with their expiry, oldest first.
  std::deque<std::pair<SimTime, PageId>> short_lived_;
  std::deque<PageType> short_lived_type_;
};

// Materializes the whole trace.
std::vector<TraceEvent> generate(const WorkloadSpec& spec);

}  // namespace tiersim
