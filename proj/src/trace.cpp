#include "tiersim/trace.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include <fmt/format.h>

namespace tiersim {

void write_trace(std::span<const TraceEvent> trace, std::ostream& out) {
  std::string line;
  for (const TraceEvent& e : trace) {
    line.clear();
    switch (e.op) {
      case Op::Alloc:
        fmt::format_to(std::back_inserter(line), "{} A {} {}\n", e.time, e.page,
                       e.type == PageType::Anon ? "ANON" : "FILE");
        break;
      case Op::Load: fmt::format_to(std::back_inserter(line), "{} L {}\n", e.time, e.page); break;
      case Op::Store: fmt::format_to(std::back_inserter(line), "{} S {}\n", e.time, e.page); break;
      case Op::Free: fmt::format_to(std::back_inserter(line), "{} F {}\n", e.time, e.page); break;
    }
    out << line;
  }
  if (!out) throw IoError("failed writing trace");
}

void write_trace(std::span<const TraceEvent> trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  write_trace(trace, out);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::uint64_t parse_u64(std::string_view s, std::size_t line_no, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(line_no, fmt::format("invalid {} '{}'", what, s));
  }
  return v;
}

}  // namespace

std::vector<TraceEvent> read_trace(std::istream& in) {
  std::vector<TraceEvent> trace;
  std::string line;
  std::size_t line_no = 0;
  SimTime last = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty() || fields[0].starts_with('#')) continue;
    if (fields.size() < 3) throw ParseError(line_no, "expected '<timestamp> <op> <page> [type]'");
    TraceEvent e;
    e.time = parse_u64(fields[0], line_no, "timestamp");
    e.page = parse_u64(fields[2], line_no, "page id");
    if (fields[1] == "A") {
      e.op = Op::Alloc;
      if (fields.size() != 4) throw ParseError(line_no, "alloc needs a page type");
      if (fields[3] == "ANON") e.type = PageType::Anon;
      else if (fields[3] == "FILE") e.type = PageType::File;
      else throw ParseError(line_no, fmt::format("unknown page type '{}'", fields[3]));
    } else {
      if (fields[1] == "L") e.op = Op::Load;
      else if (fields[1] == "S") e.op = Op::Store;
      else if (fields[1] == "F") e.op = Op::Free;
      else throw ParseError(line_no, fmt::format("unknown op code '{}'", fields[1]));
      if (fields.size() != 3) throw ParseError(line_no, "trailing fields");
    }
    if (e.time < last) {
      throw TraceError(fmt::format("line {}: timestamp {} precedes {}", line_no, e.time, last));
    }
    last = e.time;
    trace.push_back(e);
  }
  return trace;
}

std::vector<TraceEvent> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {} for reading", path.string()));
  return read_trace(in);
}

}  // namespace tiersim
