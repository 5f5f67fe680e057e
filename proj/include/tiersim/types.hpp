#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tiersim {

using PageId = std::uint64_t;
using NodeId = std::uint32_t;
// Simulated time in nanoseconds.
using SimTime = std::uint64_t;

inline constexpr NodeId kNoNode = ~NodeId{0};
inline constexpr SimTime kNsPerUs = 1'000;
inline constexpr SimTime kNsPerMs = 1'000'000;
inline constexpr SimTime kNsPerSec = 1'000'000'000;

enum class PageType : std::uint8_t { Anon, File };
enum class LruKind : std::uint8_t { Active, Inactive };
enum class Tier : std::uint8_t { Local, Cxl };

constexpr std::string_view to_string(PageType t) { return t == PageType::Anon ? "anon" : "file"; }
constexpr std::string_view to_string(LruKind k) { return k == LruKind::Active ? "active" : "inactive"; }
constexpr std::string_view to_string(Tier t) { return t == Tier::Local ? "local" : "cxl"; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// lru_insert on a node without a free frame.
class NoFreePages : public Error {
 public:
  using Error::Error;
};

// No node can host a new page and reclaim could not make room.
class OutOfMemory : public Error {
 public:
  using Error::Error;
};

// Malformed, out-of-order or inconsistent trace events.
class TraceError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DegenerateShare : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace tiersim
