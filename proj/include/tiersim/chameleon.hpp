#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "tiersim/trace.hpp"

namespace tiersim {

struct CharacterizerConfig {
  // Record every R-th eligible access.
  std::uint64_t sample_ratio = 200;
  SimTime mini_interval_ns = 5 * kNsPerSec;
  SimTime interval_ns = 60 * kNsPerSec;
  // Sampling is enabled for this leading fraction of every mini-interval.
  double duty_fraction = 1.0;
  // Intervals a page stays "hot" after a sampled access, for interval stats.
  std::uint32_t hot_window = 2;

  // Throws ConfigError.
  void validate() const;

  friend bool operator==(const CharacterizerConfig&, const CharacterizerConfig&) = default;
};

// Bit i of `bitmap` is set when the page was sampled in the i-th most recent
// interval; bit 0 is the current one.
struct ActivenessRecord {
  PageId page = 0;
  PageType type = PageType::Anon;
  std::uint64_t bitmap = 0;
};

struct HotFractions {
  double total = 0.0;
  double anon = 0.0;
  double file = 0.0;
};

struct IntervalStats {
  std::uint64_t interval_index = 0;
  std::uint64_t total_pages = 0;
  HotFractions hot;
  std::uint64_t alloc_anon = 0;
  std::uint64_t alloc_file = 0;
  std::uint64_t samples = 0;
};

// fraction[g] for g in [1, 63]; fraction[0] is unused.
struct ReaccessHistogram {
  std::array<double, 64> fraction{};
  std::uint64_t active_pages = 0;
  bool empty() const;
};

class Characterizer {
 public:
  explicit Characterizer(CharacterizerConfig config);

  // Records one event into the current interval. Does not rotate.
  void ingest(const TraceEvent& event);
  // Closes the current interval: shifts every bitmap, drops records that
  // reach zero and swaps the collector and worker tables.
  IntervalStats rotate_interval();

  // Fraction of live pages with any of the low k bits set; k in [1, 64].
  HotFractions hot_fraction(std::uint32_t k) const;
  ReaccessHistogram reaccess_distribution() const;

  std::optional<ActivenessRecord> record(PageId page) const;
  std::size_t tracked() const { return tables_[current_].size(); }
  std::size_t live_pages() const { return types_.size(); }
  std::uint64_t samples() const { return samples_; }
  std::uint64_t interval_index() const { return interval_index_; }
  const CharacterizerConfig& config() const { return config_; }

 private:
  bool in_duty_window(SimTime t) const;

  CharacterizerConfig config_;
  std::array<std::unordered_map<PageId, std::uint64_t>, 2> tables_;
  int current_ = 0;
  std::unordered_map<PageId, PageType> types_;
  std::uint64_t eligible_ = 0;
  std::uint64_t samples_ = 0;
  std::uint64_t interval_samples_ = 0;
  std::uint64_t alloc_anon_ = 0;
  std::uint64_t alloc_file_ = 0;
  std::uint64_t interval_index_ = 0;
};

struct Characterization {
  std::vector<IntervalStats> intervals;
  // Re-access gaps accumulated over every interval close.
  ReaccessHistogram reaccess;
};

// Runs a whole trace, rotating at every interval boundary and once more at
// the end of the trace.
Characterization characterize(std::span<const TraceEvent> trace, const CharacterizerConfig& config);

// interval_index,total_pages,hot_total,hot_anon,hot_file,alloc_anon,alloc_file
void write_interval_csv(std::span<const IntervalStats> rows, std::ostream& out);

}  // namespace tiersim
