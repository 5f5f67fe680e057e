#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

#include "tiersim/types.hpp"

namespace tiersim {

// vmstat-style event counters. Order here is the serialization order.
enum class Counter : std::size_t {
  PgdemoteAnon,
  PgdemoteFile,
  PgpromoteSampledAnon,
  PgpromoteSampledFile,
  PgpromoteCandidateAnon,
  PgpromoteCandidateFile,
  PgpromoteSuccessAnon,
  PgpromoteSuccessFile,
  PgpromoteCandidateDemoted,
  PgpromoteFailLowMemory,
  PgpromoteFailPageBusy,
  NumaHintFaults,
  Pgswapout,
  Pgswapin,
  PgallocLocal,
  PgallocCxl,
  PgaccessLocal,
  PgaccessCxl,
  kCount,
};

inline constexpr std::size_t kNumCounters = static_cast<std::size_t>(Counter::kCount);

inline constexpr std::array<std::string_view, kNumCounters> kCounterNames = {
    "pgdemote_anon",
    "pgdemote_file",
    "pgpromote_sampled_anon",
    "pgpromote_sampled_file",
    "pgpromote_candidate_anon",
    "pgpromote_candidate_file",
    "pgpromote_success_anon",
    "pgpromote_success_file",
    "pgpromote_candidate_demoted",
    "pgpromote_fail_low_memory",
    "pgpromote_fail_page_busy",
    "numa_hint_faults",
    "pgswapout",
    "pgswapin",
    "pgalloc_local",
    "pgalloc_cxl",
    "pgaccess_local",
    "pgaccess_cxl",
};

constexpr std::string_view counter_name(Counter c) { return kCounterNames[static_cast<std::size_t>(c)]; }

// Per-type counter selectors.
constexpr Counter pgdemote(PageType t) {
  return t == PageType::Anon ? Counter::PgdemoteAnon : Counter::PgdemoteFile;
}
constexpr Counter pgpromote_sampled(PageType t) {
  return t == PageType::Anon ? Counter::PgpromoteSampledAnon : Counter::PgpromoteSampledFile;
}
constexpr Counter pgpromote_candidate(PageType t) {
  return t == PageType::Anon ? Counter::PgpromoteCandidateAnon : Counter::PgpromoteCandidateFile;
}
constexpr Counter pgpromote_success(PageType t) {
  return t == PageType::Anon ? Counter::PgpromoteSuccessAnon : Counter::PgpromoteSuccessFile;
}

class CounterSet {
 public:
  void add(Counter c, std::uint64_t n = 1) { values_[static_cast<std::size_t>(c)] += n; }
  std::uint64_t get(Counter c) const { return values_[static_cast<std::size_t>(c)]; }
  std::uint64_t operator[](Counter c) const { return get(c); }

  std::uint64_t promotions() const {
    return get(Counter::PgpromoteSuccessAnon) + get(Counter::PgpromoteSuccessFile);
  }
  std::uint64_t demotions() const { return get(Counter::PgdemoteAnon) + get(Counter::PgdemoteFile); }

  const std::array<std::uint64_t, kNumCounters>& values() const { return values_; }

  friend bool operator==(const CounterSet&, const CounterSet&) = default;

 private:
  std::array<std::uint64_t, kNumCounters> values_{};
};

}  // namespace tiersim
