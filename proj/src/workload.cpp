#include "tiersim/workload.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include <fmt/format.h>

namespace tiersim {

namespace {

constexpr std::array<std::pair<WorkloadKind, std::string_view>, 7> kKindNames{{
    {WorkloadKind::ZipfSteady, "zipf"},
    {WorkloadKind::WebLike, "web"},
    {WorkloadKind::CacheLike, "cache"},
    {WorkloadKind::WarehouseLike, "warehouse"},
    {WorkloadKind::PingPong, "pingpong"},
    {WorkloadKind::BurstyAlloc, "bursty"},
    {WorkloadKind::UniformBandwidth, "uniform"},
}};

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

void require(bool ok, std::string_view what) {
  if (!ok) throw SpecError(fmt::format("invalid workload: {}", what));
}

// floor(a * b / c) without overflow.
std::uint64_t mul_div(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b / c);
}

}  // namespace

std::string_view to_string(WorkloadKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

std::optional<WorkloadKind> parse_workload_kind(std::string_view s) {
  for (const auto& [kind, name] : kKindNames)
    if (name == s) return kind;
  return std::nullopt;
}

double WorkloadSpec::resolved_anon_fraction() const {
  if (anon_fraction) return *anon_fraction;
  switch (kind) {
    case WorkloadKind::WebLike: return 0.4;
    case WorkloadKind::CacheLike: return 0.3;
    case WorkloadKind::WarehouseLike: return 0.85;
    case WorkloadKind::BurstyAlloc: return 0.8;
    case WorkloadKind::PingPong:
    case WorkloadKind::UniformBandwidth: return 1.0;
    case WorkloadKind::ZipfSteady: return 0.5;
  }
  return 0.5;
}

double WorkloadSpec::resolved_anon_access_share() const {
  if (anon_access_share) return *anon_access_share;
  switch (kind) {
    case WorkloadKind::WebLike: return 0.8;
    case WorkloadKind::WarehouseLike: return 0.95;
    default: return resolved_anon_fraction();
  }
}

void WorkloadSpec::validate() const {
  require(total_pages > 0, "total_pages must be positive");
  require(hot_fraction > 0.0 && hot_fraction <= 1.0, "hot_fraction must be in (0, 1]");
  const double fh = resolved_file_hot_fraction();
  require(fh > 0.0 && fh <= 1.0, "file_hot_fraction must be in (0, 1]");
  const double af = resolved_anon_fraction();
  require(in_unit(af), "anon_fraction must be in [0, 1]");
  const double share = resolved_anon_access_share();
  require(in_unit(share), "anon_access_share must be in [0, 1]");
  require(std::isfinite(zipf_s) && zipf_s > 0.0, "zipf_s must be positive");
  require(duration_ns > 0, "duration must be positive");
  require(std::isfinite(ops_rate) && ops_rate > 0.0, "ops_rate must be positive");
  require(std::isfinite(churn_rate) && churn_rate >= 0.0, "churn_rate must be non-negative");
  require(in_unit(cold_access_share), "cold_access_share must be in [0, 1]");
  require(in_unit(store_fraction), "store_fraction must be in [0, 1]");
  require(rotation_period_ns > 0, "rotation_period must be positive");
  require(in_unit(rotation_fraction), "rotation_fraction must be in [0, 1]");
  require(in_unit(warmup_fraction) && in_unit(growth_fraction) && warmup_fraction + growth_fraction <= 1.0,
          "warmup and growth fractions must fit in the duration");
  require(in_unit(one_touch_fraction), "one_touch_fraction must be in [0, 1]");
  require(burst_period_ns > 0, "burst_period must be positive");
  require(in_unit(burst_duty), "burst_duty must be in [0, 1]");
  require(in_unit(burst_alloc_share), "burst_alloc_share must be in [0, 1]");
}

std::uint64_t TraceGenerator::Population::hot_count() const {
  if (ranked.empty()) return 0;
  const auto h = static_cast<std::uint64_t>(std::llround(static_cast<double>(ranked.size()) * hot_fraction));
  return std::clamp<std::uint64_t>(h, 1, ranked.size());
}

TraceGenerator::TraceGenerator(WorkloadSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) {
  spec_.validate();
  anon_fraction_ = spec_.resolved_anon_fraction();
  anon_access_share_ = spec_.resolved_anon_access_share();
  period_ns_ = 1000.0 / spec_.ops_rate;
  total_ticks_ = static_cast<std::uint64_t>(std::ceil(static_cast<double>(spec_.duration_ns) / period_ns_));
  anon_.type = PageType::Anon;
  anon_.hot_fraction = spec_.hot_fraction;
  file_.type = PageType::File;
  file_.hot_fraction = spec_.resolved_file_hot_fraction();
  next_rotation_ = spec_.rotation_period_ns;
  churn_per_tick_ = spec_.churn_rate * period_ns_ / static_cast<double>(kNsPerSec);

  const std::uint64_t n = spec_.total_pages;
  if (spec_.kind == WorkloadKind::WebLike) {
    anon_target_ = static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * anon_fraction_));
    file_target_ = n - anon_target_;
    const auto ticks = static_cast<double>(total_ticks_);
    warmup_ticks_ = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(ticks * spec_.warmup_fraction));
    growth_ticks_ = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(ticks * spec_.growth_fraction));
  } else {
    initial_pages_ = n;
    if (spec_.kind == WorkloadKind::PingPong)
      one_touch_total_ = static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * spec_.one_touch_fraction));
  }
}

SimTime TraceGenerator::time_of(std::uint64_t tick) {
  const auto base = static_cast<SimTime>(std::floor(static_cast<double>(tick) * period_ns_));
  const auto spread = static_cast<std::uint64_t>(period_ns_ / 4.0);
  const SimTime t = std::max(base + (spread > 0 ? rng_.below(spread) : 0), last_time_);
  last_time_ = t;
  return t;
}

PageType TraceGenerator::next_type() {
  const auto want = static_cast<std::uint64_t>(std::llround(static_cast<double>(typed_ + 1) * anon_fraction_));
  return anon_typed_ < want ? PageType::Anon : PageType::File;
}

// Only Alloc carries a type; other events keep the default so traces compare
// equal after a round trip through the text format.
void TraceGenerator::emit(SimTime t, Op op, PageId page, PageType type) {
  out_.push_back({t, op, op == Op::Alloc ? type : PageType::Anon, page});
}

PageId TraceGenerator::allocate(SimTime now, PageType type) {
  const PageId id = next_page_++;
  ++typed_;
  if (type == PageType::Anon) ++anon_typed_;
  emit(now, Op::Alloc, id, type);
  if (spec_.kind == WorkloadKind::WarehouseLike && type == PageType::File) emit(now, Op::Store, id, type);
  return id;
}

std::optional<TraceEvent> TraceGenerator::next() {
  while (out_.empty()) {
    if (finished()) return std::nullopt;
    const SimTime now = time_of(tick_);
    step(now);
    ++tick_;
  }
  TraceEvent e = out_.front();
  out_.pop_front();
  return e;
}

bool TraceGenerator::finished() const {
  return tick_ >= total_ticks_ && initial_done_ >= initial_pages_ && file_done_ >= file_target_ &&
         anon_done_ >= anon_target_ && one_touch_done_ >= one_touch_total_;
}

void TraceGenerator::step(SimTime now) {
  if (now >= next_rotation_) {
    rotate(anon_);
    rotate(file_);
    next_rotation_ += spec_.rotation_period_ns;
  }

  if (spec_.kind == WorkloadKind::WebLike) {
    if (web_allocation(now)) return;
  } else if (initial_done_ < initial_pages_) {
    const PageType type = next_type();
    const PageId id = allocate(now, type);
    if (spec_.kind == WorkloadKind::PingPong && initial_done_ >= initial_pages_ - one_touch_total_)
      one_touch_.push_back(id);
    else
      population(type).ranked.push_back(id);
    ++initial_done_;
    return;
  } else if (!shuffled_) {
    shuffle(anon_);
    shuffle(file_);
    shuffled_ = true;
    access_start_tick_ = tick_;
  }

  if (spec_.kind == WorkloadKind::PingPong && one_touch_loads(now)) return;
  if (spec_.kind != WorkloadKind::BurstyAlloc && churn_per_tick_ > 0.0) {
    churn_debt_ += churn_per_tick_;
    if (churn_debt_ >= 1.0) {
      churn_debt_ -= 1.0;
      if (churn(now)) return;
    }
  }
  if (spec_.kind == WorkloadKind::BurstyAlloc && bursty(now)) return;
  access(now);
}

bool TraceGenerator::web_allocation(SimTime now) {
  const auto alloc_file = [&] {
    file_.ranked.push_back(allocate(now, PageType::File));
    ++file_done_;
  };
  const auto alloc_anon = [&] {
    anon_.ranked.push_front(allocate(now, PageType::Anon));
    ++anon_done_;
  };
  if (tick_ < warmup_ticks_) {
    if (file_done_ < std::min(file_target_, mul_div(tick_ + 1, file_target_, warmup_ticks_))) {
      alloc_file();
      return true;
    }
    return false;
  }
  if (file_done_ < file_target_) {
    alloc_file();
    return true;
  }
  const std::uint64_t into = tick_ - warmup_ticks_ + 1;
  if (anon_done_ < std::min(anon_target_, mul_div(into, anon_target_, growth_ticks_))) {
    alloc_anon();
    return true;
  }
  return false;
}

bool TraceGenerator::one_touch_loads(SimTime now) {
  if (one_touch_done_ >= one_touch_total_) return false;
  const std::uint64_t span = total_ticks_ > access_start_tick_ ? total_ticks_ - access_start_tick_ : 1;
  const std::uint64_t due = std::min(one_touch_total_, mul_div(tick_ - access_start_tick_ + 1, one_touch_total_, span));
  bool any = false;
  while (one_touch_done_ < due) {
    emit(now, Op::Load, one_touch_.front());
    one_touch_.pop_front();
    ++one_touch_done_;
    any = true;
  }
  return any;
}

bool TraceGenerator::bursty(SimTime now) {
  bool freed = false;
  while (!short_lived_.empty() && short_lived_.front().first <= now) {
    const PageId page = short_lived_.front().second;
    const PageType type = short_lived_type_.front();
    short_lived_.pop_front();
    short_lived_type_.pop_front();
    auto& ranked = population(type).ranked;
    ranked.erase(std::find(ranked.begin(), ranked.end(), page));
    emit(now, Op::Free, page, type);
    freed = true;
  }
  if (freed) return true;
  const auto phase = static_cast<double>(now % spec_.burst_period_ns);
  if (phase < spec_.burst_duty * static_cast<double>(spec_.burst_period_ns) && rng_.chance(spec_.burst_alloc_share)) {
    const PageType type = next_type();
    const PageId id = allocate(now, type);
    population(type).ranked.push_front(id);
    short_lived_.emplace_back(now + spec_.burst_lifetime_ns, id);
    short_lived_type_.push_back(type);
    return true;
  }
  return false;
}

bool TraceGenerator::churn(SimTime now) {
  const PageType type = next_type();
  Population& pop = population(type);
  if (pop.ranked.empty()) return false;
  const auto rank = static_cast<std::ptrdiff_t>(rng_.below(pop.ranked.size()));
  const PageId victim = pop.ranked[static_cast<std::size_t>(rank)];
  pop.ranked.erase(pop.ranked.begin() + rank);
  emit(now, Op::Free, victim, type);
  const PageId id = allocate(now, type);
  if (spec_.kind == WorkloadKind::WarehouseLike) {
    if (type == PageType::Anon) {
      const auto hot = static_cast<std::ptrdiff_t>(rng_.below(std::max<std::uint64_t>(pop.hot_count(), 1)));
      pop.ranked.insert(pop.ranked.begin() + hot, id);
    } else {
      pop.ranked.push_back(id);
    }
  } else {
    pop.ranked.insert(pop.ranked.begin() + rank, id);
  }
  return true;
}

void TraceGenerator::access(SimTime now) {
  const std::uint64_t na = anon_.ranked.size();
  const std::uint64_t nf = file_.ranked.size();
  if (na + nf == 0) return;
  PageId page = 0;
  if (spec_.kind == WorkloadKind::UniformBandwidth) {
    const std::uint64_t i = rng_.below(na + nf);
    page = i < na ? anon_.ranked[i] : file_.ranked[i - na];
  } else {
    Population* pop = &anon_;
    if (na == 0)
      pop = &file_;
    else if (nf > 0 && !rng_.chance(anon_access_share_))
      pop = &file_;
    page = pick(*pop);
  }
  emit(now, rng_.chance(spec_.store_fraction) ? Op::Store : Op::Load, page);
}

PageId TraceGenerator::pick(Population& pop) {
  if (rng_.chance(spec_.cold_access_share)) return pop.ranked[rng_.below(pop.ranked.size())];
  const ZipfSampler zipf(pop.hot_count(), spec_.zipf_s);
  return pop.ranked[zipf.sample(rng_) - 1];
}

void TraceGenerator::rotate(Population& pop) {
  const std::uint64_t n = pop.ranked.size();
  const std::uint64_t h = pop.hot_count();
  if (h == 0 || h >= n) return;
  const auto moves = static_cast<std::uint64_t>(std::llround(static_cast<double>(h) * spec_.rotation_fraction));
  for (std::uint64_t m = 0; m < moves; ++m) std::swap(pop.ranked[rng_.below(h)], pop.ranked[h + rng_.below(n - h)]);
}

void TraceGenerator::shuffle(Population& pop) {
  for (std::uint64_t i = pop.ranked.size(); i > 1; --i) std::swap(pop.ranked[i - 1], pop.ranked[rng_.below(i)]);
}

std::vector<TraceEvent> generate(const WorkloadSpec& spec) {
  TraceGenerator gen(spec);
  std::vector<TraceEvent> trace;
  while (auto e = gen.next()) trace.push_back(*e);
  return trace;
}

}  // namespace tiersim
