#include "tiersim/chameleon.hpp"

#include <bit>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace tiersim {

namespace {

std::uint64_t low_bits(std::uint32_t k) { return k >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1; }

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void CharacterizerConfig::validate() const {
  if (sample_ratio == 0) throw ConfigError("sample ratio must be positive");
  if (mini_interval_ns == 0 || interval_ns == 0) throw ConfigError("intervals must be positive");
  if (interval_ns % mini_interval_ns != 0) throw ConfigError("interval must be a multiple of the mini-interval");
  if (!(duty_fraction > 0.0 && duty_fraction <= 1.0)) throw ConfigError("duty fraction must be in (0, 1]");
  if (hot_window < 1 || hot_window > 64) throw ConfigError("hot window must be in [1, 64]");
}

bool ReaccessHistogram::empty() const {
  for (double f : fraction)
    if (f > 0.0) return false;
  return true;
}

Characterizer::Characterizer(CharacterizerConfig config) : config_(config) { config_.validate(); }

bool Characterizer::in_duty_window(SimTime t) const {
  const auto phase = static_cast<double>(t % config_.mini_interval_ns);
  return phase < config_.duty_fraction * static_cast<double>(config_.mini_interval_ns);
}

void Characterizer::ingest(const TraceEvent& e) {
  switch (e.op) {
    case Op::Alloc:
      types_[e.page] = e.type;
      ++(e.type == PageType::Anon ? alloc_anon_ : alloc_file_);
      return;
    case Op::Free:
      types_.erase(e.page);
      tables_[current_].erase(e.page);
      return;
    case Op::Load:
    case Op::Store:
      break;
  }
  if (!in_duty_window(e.time)) return;
  if (++eligible_ < config_.sample_ratio) return;
  eligible_ = 0;
  ++samples_;
  ++interval_samples_;
  types_.try_emplace(e.page, PageType::Anon);
  tables_[current_][e.page] |= 1;
}

IntervalStats Characterizer::rotate_interval() {
  IntervalStats s;
  s.interval_index = interval_index_;
  s.total_pages = types_.size();
  s.hot = hot_fraction(config_.hot_window);
  s.alloc_anon = alloc_anon_;
  s.alloc_file = alloc_file_;
  s.samples = interval_samples_;

  auto& processing = tables_[current_];
  current_ ^= 1;
  auto& collecting = tables_[current_];
  collecting.clear();
  for (const auto& [page, bitmap] : processing) {
    const std::uint64_t shifted = bitmap << 1;
    if (shifted != 0) collecting.emplace(page, shifted);
  }
  processing.clear();

  alloc_anon_ = alloc_file_ = 0;
  interval_samples_ = 0;
  ++interval_index_;
  return s;
}

HotFractions Characterizer::hot_fraction(std::uint32_t k) const {
  const std::uint64_t mask = low_bits(k);
  std::uint64_t hot[2] = {0, 0};
  std::uint64_t live[2] = {0, 0};
  for (const auto& [page, type] : types_) ++live[static_cast<int>(type)];
  for (const auto& [page, bitmap] : tables_[current_]) {
    if ((bitmap & mask) == 0) continue;
    const auto it = types_.find(page);
    if (it != types_.end()) ++hot[static_cast<int>(it->second)];
  }
  return HotFractions{ratio(hot[0] + hot[1], live[0] + live[1]), ratio(hot[0], live[0]), ratio(hot[1], live[1])};
}

ReaccessHistogram Characterizer::reaccess_distribution() const {
  ReaccessHistogram h;
  std::array<std::uint64_t, 64> counts{};
  for (const auto& [page, bitmap] : tables_[current_]) {
    if ((bitmap & 1) == 0) continue;
    ++h.active_pages;
    const std::uint64_t older = bitmap >> 1;
    if (older != 0) ++counts[static_cast<std::size_t>(std::countr_zero(older)) + 1];
  }
  for (std::size_t g = 1; g < 64; ++g) h.fraction[g] = ratio(counts[g], h.active_pages);
  return h;
}

std::optional<ActivenessRecord> Characterizer::record(PageId page) const {
  const auto it = tables_[current_].find(page);
  if (it == tables_[current_].end()) return std::nullopt;
  const auto t = types_.find(page);
  return ActivenessRecord{page, t == types_.end() ? PageType::Anon : t->second, it->second};
}

Characterization characterize(std::span<const TraceEvent> trace, const CharacterizerConfig& config) {
  Characterizer ch(config);
  Characterization out;
  std::array<double, 64> weighted{};
  std::uint64_t active = 0;
  const auto close = [&] {
    const ReaccessHistogram h = ch.reaccess_distribution();
    for (std::size_t g = 1; g < 64; ++g) weighted[g] += h.fraction[g] * static_cast<double>(h.active_pages);
    active += h.active_pages;
    out.intervals.push_back(ch.rotate_interval());
  };
  for (const TraceEvent& e : trace) {
    while (e.time >= (ch.interval_index() + 1) * config.interval_ns) close();
    ch.ingest(e);
  }
  if (!trace.empty()) close();
  out.reaccess.active_pages = active;
  for (std::size_t g = 1; g < 64; ++g) out.reaccess.fraction[g] = active == 0 ? 0.0 : weighted[g] / static_cast<double>(active);
  return out;
}

void write_interval_csv(std::span<const IntervalStats> rows, std::ostream& out) {
  out << "interval_index,total_pages,hot_total,hot_anon,hot_file,alloc_anon,alloc_file\n";
  for (const IntervalStats& r : rows) {
    fmt::print(out, "{},{},{},{},{},{},{}\n", r.interval_index, r.total_pages, r.hot.total, r.hot.anon, r.hot.file,
               r.alloc_anon, r.alloc_file);
  }
}

}  // namespace tiersim
