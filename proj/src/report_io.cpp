#include "tiersim/report_io.hpp"

#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace tiersim {

Json to_json(const CounterSet& counters) {
  Json j = Json::object();
  for (std::size_t i = 0; i < kNumCounters; ++i) j[std::string(kCounterNames[i])] = counters.values()[i];
  return j;
}

Json to_json(const WindowStats& w) {
  return Json{
      {"start_ns", w.start_ns},
      {"accesses", w.accesses},
      {"local_accesses", w.local_accesses},
      {"cxl_accesses", w.cxl_accesses},
      {"local_traffic_fraction", w.local_traffic_fraction},
      {"cxl_traffic_fraction", w.cxl_traffic_fraction},
      {"mean_access_latency_ns", w.mean_access_latency_ns},
      {"bandwidth_utilization", w.bandwidth_utilization},
      {"allocation_rate_local", w.allocation_rate_local},
      {"promotion_rate", w.promotion_rate},
      {"demotion_rate", w.demotion_rate},
      {"allocations", w.allocations},
      {"allocations_local", w.allocations_local},
      {"promotions", w.promotions},
      {"demotions", w.demotions},
      {"live_pages", w.live_pages},
  };
}

Json to_json(const SimReport& r) {
  Json windows = Json::array();
  for (const WindowStats& w : r.windows) windows.push_back(to_json(w));
  return Json{
      {"events", r.events},
      {"report_window_ns", r.report_window_ns},
      {"throughput_proxy", r.throughput_proxy},
      {"counters", to_json(r.counters)},
      {"totals", to_json(r.totals)},
      {"windows", std::move(windows)},
  };
}

Json to_json(const Characterization& ch) {
  Json intervals = Json::array();
  for (const IntervalStats& s : ch.intervals) {
    intervals.push_back(Json{
        {"interval_index", s.interval_index},
        {"total_pages", s.total_pages},
        {"hot_total", s.hot.total},
        {"hot_anon", s.hot.anon},
        {"hot_file", s.hot.file},
        {"alloc_anon", s.alloc_anon},
        {"alloc_file", s.alloc_file},
        {"samples", s.samples},
    });
  }
  Json gaps = Json::object();
  for (std::size_t g = 1; g < ch.reaccess.fraction.size(); ++g)
    if (ch.reaccess.fraction[g] > 0.0) gaps[std::to_string(g)] = ch.reaccess.fraction[g];
  return Json{
      {"intervals", std::move(intervals)},
      {"reaccess", Json{{"active_pages", ch.reaccess.active_pages}, {"gap_fraction", std::move(gaps)}}},
  };
}

void write_windows_csv(std::span<const WindowStats> windows, std::ostream& out) {
  out << "start_ns,accesses,local_accesses,cxl_accesses,local_traffic_fraction,cxl_traffic_fraction,"
         "mean_access_latency_ns,bandwidth_utilization,allocation_rate_local,promotion_rate,demotion_rate,"
         "allocations,allocations_local,promotions,demotions,live_pages\n";
  for (const WindowStats& w : windows) {
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", w.start_ns, w.accesses, w.local_accesses,
               w.cxl_accesses, w.local_traffic_fraction, w.cxl_traffic_fraction, w.mean_access_latency_ns,
               w.bandwidth_utilization, w.allocation_rate_local, w.promotion_rate, w.demotion_rate, w.allocations,
               w.allocations_local, w.promotions, w.demotions, w.live_pages);
  }
}

void write_json(const Json& j, std::ostream& out) { out << j.dump(2) << '\n'; }

}  // namespace tiersim
