#include "tiersim/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <tuple>

#include <fmt/format.h>

namespace tiersim {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError(fmt::format("invalid value '{}' for {}", value, key));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  bad_value(key, value);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string fmt_num(T v) {
  return fmt::format("{}", v);
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
};

template <typename T, typename Access>
Field number(Access access) {
  return {[access](const RunConfig& c) { return fmt_num(access(const_cast<RunConfig&>(c))); },
          [access](RunConfig& c, std::string_view k, std::string_view v) { access(c) = parse_number<T>(k, v); }};
}

template <typename Access>
Field boolean(Access access) {
  return {[access](const RunConfig& c) { return fmt_bool(access(const_cast<RunConfig&>(c))); },
          [access](RunConfig& c, std::string_view k, std::string_view v) { access(c) = parse_bool(k, v); }};
}

// Optional workload fractions: the resolved value is echoed, "default"
// restores per-kind behaviour.
template <typename Access, typename Resolve>
Field optional_fraction(Access access, Resolve resolve) {
  return {[resolve](const RunConfig& c) { return fmt_num(resolve(c.workload)); },
          [access](RunConfig& c, std::string_view k, std::string_view v) {
            if (v == "default")
              access(c).reset();
            else
              access(c) = parse_number<double>(k, v);
          }};
}

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = [] {
    std::map<std::string, Field, std::less<>> m;
    m["watermark.min"] = number<double>([](RunConfig& c) -> double& { return c.sim.watermarks.min; });
    m["watermark.low"] = number<double>([](RunConfig& c) -> double& { return c.sim.watermarks.low; });
    m["watermark.high"] = number<double>([](RunConfig& c) -> double& { return c.sim.watermarks.high; });

    m["policy.kind"] = {[](const RunConfig& c) { return std::string(to_string(c.sim.policy.kind)); },
                        [](RunConfig& c, std::string_view k, std::string_view v) {
                          const auto kind = parse_policy_kind(v);
                          if (!kind) bad_value(k, v);
                          c.sim.policy.kind = *kind;
                        }};
    m["policy.interleave"] = {[](const RunConfig& c) {
                                const auto& il = c.sim.policy.interleave;
                                return il ? fmt::format("{}:{}", il->n, il->k) : std::string("none");
                              },
                              [](RunConfig& c, std::string_view k, std::string_view v) {
                                if (v == "none") {
                                  c.sim.policy.interleave.reset();
                                  return;
                                }
                                const auto colon = v.find(':');
                                if (colon == std::string_view::npos) bad_value(k, v);
                                c.sim.policy.interleave = Interleave{parse_number<std::uint32_t>(k, v.substr(0, colon)),
                                                                     parse_number<std::uint32_t>(k, v.substr(colon + 1))};
                              }};
    m["policy.type_aware_alloc"] = boolean([](RunConfig& c) -> bool& { return c.sim.policy.type_aware_alloc; });
    m["policy.tpp.active_lru_filter"] = boolean([](RunConfig& c) -> bool& { return c.sim.policy.active_lru_filter; });
    m["policy.tpp.decouple_watermarks"] =
        boolean([](RunConfig& c) -> bool& { return c.sim.policy.decouple_watermarks; });
    m["policy.tpp.demote_scale_factor"] =
        number<double>([](RunConfig& c) -> double& { return c.sim.policy.demote_scale_factor; });
    m["policy.tpp.demote_file_first"] = boolean([](RunConfig& c) -> bool& { return c.sim.policy.demote_file_first; });
    m["policy.tpp.demote_to_active"] = boolean([](RunConfig& c) -> bool& { return c.sim.policy.demote_to_active; });
    m["policy.scan_quota"] = number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.sim.policy.scan_quota; });
    m["policy.scan_period_ns"] =
        number<SimTime>([](RunConfig& c) -> SimTime& { return c.sim.policy.scan_period_ns; });
    m["policy.demotion_batch"] =
        number<std::uint32_t>([](RunConfig& c) -> std::uint32_t& { return c.sim.policy.demotion_batch; });
    m["policy.autotiering.reserved_promo_buffer"] =
        number<double>([](RunConfig& c) -> double& { return c.sim.policy.reserved_promo_buffer; });
    m["policy.autotiering.cold_threshold"] =
        number<std::uint32_t>([](RunConfig& c) -> std::uint32_t& { return c.sim.policy.cold_threshold; });

    m["sim.swap_latency_ns"] = number<double>([](RunConfig& c) -> double& { return c.sim.swap_latency_ns; });
    m["sim.migration_cost_ns"] = number<double>([](RunConfig& c) -> double& { return c.sim.migration_cost_ns; });
    m["sim.report_window_ns"] = number<SimTime>([](RunConfig& c) -> SimTime& { return c.sim.report_window_ns; });
    m["sim.seed"] = number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.sim.seed; });
    m["sim.swap_enabled"] = boolean([](RunConfig& c) -> bool& { return c.sim.swap_enabled; });
    m["sim.page_size_bytes"] =
        number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.sim.page_size_bytes; });

    m["workload.kind"] = {[](const RunConfig& c) { return std::string(to_string(c.workload.kind)); },
                          [](RunConfig& c, std::string_view k, std::string_view v) {
                            const auto kind = parse_workload_kind(v);
                            if (!kind) bad_value(k, v);
                            c.workload.kind = *kind;
                          }};
    m["workload.total_pages"] =
        number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.workload.total_pages; });
    m["workload.anon_fraction"] =
        optional_fraction([](RunConfig& c) -> std::optional<double>& { return c.workload.anon_fraction; },
                          [](const WorkloadSpec& w) { return w.resolved_anon_fraction(); });
    m["workload.hot_fraction"] = number<double>([](RunConfig& c) -> double& { return c.workload.hot_fraction; });
    m["workload.file_hot_fraction"] =
        optional_fraction([](RunConfig& c) -> std::optional<double>& { return c.workload.file_hot_fraction; },
                          [](const WorkloadSpec& w) { return w.resolved_file_hot_fraction(); });
    m["workload.zipf_s"] = number<double>([](RunConfig& c) -> double& { return c.workload.zipf_s; });
    m["workload.duration_ns"] = number<SimTime>([](RunConfig& c) -> SimTime& { return c.workload.duration_ns; });
    m["workload.ops_rate"] = number<double>([](RunConfig& c) -> double& { return c.workload.ops_rate; });
    m["workload.churn_rate"] = number<double>([](RunConfig& c) -> double& { return c.workload.churn_rate; });
    m["workload.seed"] = number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.workload.seed; });
    m["workload.anon_access_share"] =
        optional_fraction([](RunConfig& c) -> std::optional<double>& { return c.workload.anon_access_share; },
                          [](const WorkloadSpec& w) { return w.resolved_anon_access_share(); });
    m["workload.cold_access_share"] =
        number<double>([](RunConfig& c) -> double& { return c.workload.cold_access_share; });
    m["workload.store_fraction"] = number<double>([](RunConfig& c) -> double& { return c.workload.store_fraction; });
    m["workload.rotation_period_ns"] =
        number<SimTime>([](RunConfig& c) -> SimTime& { return c.workload.rotation_period_ns; });
    m["workload.rotation_fraction"] =
        number<double>([](RunConfig& c) -> double& { return c.workload.rotation_fraction; });
    m["workload.warmup_fraction"] = number<double>([](RunConfig& c) -> double& { return c.workload.warmup_fraction; });
    m["workload.growth_fraction"] = number<double>([](RunConfig& c) -> double& { return c.workload.growth_fraction; });
    m["workload.one_touch_fraction"] =
        number<double>([](RunConfig& c) -> double& { return c.workload.one_touch_fraction; });
    m["workload.burst_period_ns"] =
        number<SimTime>([](RunConfig& c) -> SimTime& { return c.workload.burst_period_ns; });
    m["workload.burst_duty"] = number<double>([](RunConfig& c) -> double& { return c.workload.burst_duty; });
    m["workload.burst_alloc_share"] =
        number<double>([](RunConfig& c) -> double& { return c.workload.burst_alloc_share; });
    m["workload.burst_lifetime_ns"] =
        number<SimTime>([](RunConfig& c) -> SimTime& { return c.workload.burst_lifetime_ns; });

    m["chameleon.sample_ratio"] =
        number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.chameleon.sample_ratio; });
    m["chameleon.mini_interval_ns"] =
        number<SimTime>([](RunConfig& c) -> SimTime& { return c.chameleon.mini_interval_ns; });
    m["chameleon.interval_ns"] = number<SimTime>([](RunConfig& c) -> SimTime& { return c.chameleon.interval_ns; });
    m["chameleon.duty_fraction"] = number<double>([](RunConfig& c) -> double& { return c.chameleon.duty_fraction; });
    m["chameleon.hot_window"] =
        number<std::uint32_t>([](RunConfig& c) -> std::uint32_t& { return c.chameleon.hot_window; });
    return m;
  }();
  return table;
}

constexpr std::string_view kNodeFields[] = {"tier", "capacity", "latency_ns", "bandwidth", "distance"};

std::string node_get(const NodeParams& n, std::string_view field) {
  if (field == "tier") return std::string(to_string(n.tier));
  if (field == "capacity") return fmt_num(n.capacity);
  if (field == "latency_ns") return fmt_num(n.base_latency_ns);
  if (field == "bandwidth") return fmt_num(n.bandwidth);
  return fmt_num(n.distance);
}

void node_set(RunConfig& c, std::string_view key, std::string_view name, std::string_view field,
              std::string_view value) {
  auto& nodes = c.sim.nodes;
  auto it = std::find_if(nodes.begin(), nodes.end(), [&](const NodeParams& n) { return n.name == name; });
  if (it == nodes.end()) {
    // New nodes are introduced by naming their tier.
    if (field != "tier") throw ConfigError(fmt::format("unknown node '{}' in {}", name, key));
    NodeParams n{std::string(name), Tier::Cxl, 0, 170.0, 10.0, 1};
    nodes.push_back(n);
    it = std::prev(nodes.end());
  }
  if (field == "tier") {
    if (value == "local")
      it->tier = Tier::Local;
    else if (value == "cxl")
      it->tier = Tier::Cxl;
    else
      bad_value(key, value);
  } else if (field == "capacity") {
    it->capacity = parse_number<std::uint64_t>(key, value);
  } else if (field == "latency_ns") {
    it->base_latency_ns = parse_number<double>(key, value);
  } else if (field == "bandwidth") {
    it->bandwidth = parse_number<double>(key, value);
  } else if (field == "distance") {
    it->distance = parse_number<std::uint32_t>(key, value);
  } else {
    throw ConfigError(fmt::format("unknown key '{}'", key));
  }
}

}  // namespace

ConfigMap parse_config(std::istream& in) {
  ConfigMap map;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError(number, "expected key=value");
    const std::string_view key = trim(s.substr(0, eq));
    if (key.empty()) throw ParseError(number, "empty key");
    map[std::string(key)] = std::string(trim(s.substr(eq + 1)));
  }
  return map;
}

ConfigMap read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  return parse_config(in);
}

void write_config(const ConfigMap& map, std::ostream& out) {
  for (const auto& [k, v] : map) out << k << '=' << v << '\n';
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  if (key.starts_with("node.")) {
    const std::string_view rest = key.substr(5);
    const auto dot = rest.rfind('.');
    if (dot == std::string_view::npos || dot == 0) throw ConfigError(fmt::format("unknown key '{}'", key));
    node_set(config, key, rest.substr(0, dot), rest.substr(dot + 1), value);
    return;
  }
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(fmt::format("unknown key '{}'", key));
  it->second.set(config, key, value);
}

void apply_settings(RunConfig& config, const ConfigMap& map) {
  // Tiers first, so node creation does not depend on key order.
  for (const auto& [k, v] : map)
    if (k.starts_with("node.") && k.ends_with(".tier")) apply_setting(config, k, v);
  for (const auto& [k, v] : map)
    if (!(k.starts_with("node.") && k.ends_with(".tier"))) apply_setting(config, k, v);
  std::stable_sort(config.sim.nodes.begin(), config.sim.nodes.end(), [](const NodeParams& a, const NodeParams& b) {
    return std::tie(a.tier, a.distance, a.name) < std::tie(b.tier, b.distance, b.name);
  });
}

RunConfig from_config_map(const ConfigMap& map) {
  RunConfig config;
  if (std::any_of(map.begin(), map.end(), [](const auto& kv) { return kv.first.starts_with("node."); })) {
    config.sim.nodes.clear();
  }
  apply_settings(config, map);
  return config;
}

std::pair<std::string, std::string> split_setting(std::string_view setting) {
  const auto eq = setting.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("expected key=value, got '{}'", setting));
  }
  return {std::string(trim(setting.substr(0, eq))), std::string(trim(setting.substr(eq + 1)))};
}

ConfigMap to_config_map(const RunConfig& config) {
  ConfigMap map;
  for (const auto& [key, field] : fields()) map[key] = field.get(config);
  for (const NodeParams& n : config.sim.nodes)
    for (std::string_view f : kNodeFields) map[fmt::format("node.{}.{}", n.name, f)] = node_get(n, f);
  return map;
}

std::vector<std::string> documented_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : to_config_map(RunConfig{})) keys.push_back(key);
  return keys;
}

}  // namespace tiersim
