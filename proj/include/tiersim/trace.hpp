#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "tiersim/types.hpp"

namespace tiersim {

enum class Op : std::uint8_t { Alloc, Load, Store, Free };

struct TraceEvent {
  SimTime time = 0;
  Op op = Op::Load;
  PageType type = PageType::Anon;  // meaningful for Alloc only
  PageId page = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

constexpr bool is_access(Op op) { return op == Op::Load || op == Op::Store; }

// Text format, one event per line:
//   <timestamp_ns> A <page_id> <ANON|FILE>
//   <timestamp_ns> L <page_id>
//   <timestamp_ns> S <page_id>
//   <timestamp_ns> F <page_id>
// Lines starting with '#' are comments. Timestamps are non-decreasing.
void write_trace(std::span<const TraceEvent> trace, std::ostream& out);
void write_trace(std::span<const TraceEvent> trace, const std::filesystem::path& path);

// Throws ParseError (with line number) on malformed lines and TraceError on
// timestamps that go backwards.
std::vector<TraceEvent> read_trace(std::istream& in);
std::vector<TraceEvent> read_trace(const std::filesystem::path& path);

}  // namespace tiersim
