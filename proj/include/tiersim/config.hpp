#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tiersim/chameleon.hpp"
#include "tiersim/simulator.hpp"
#include "tiersim/workload.hpp"

namespace tiersim {

// Everything a single CLI invocation needs, in one place.
struct RunConfig {
  SimConfig sim = SimConfig::two_tier(50'000, 25'000);
  WorkloadSpec workload;
  CharacterizerConfig chameleon;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Flat `section.key=value` pairs, sorted by key.
using ConfigMap = std::map<std::string, std::string>;

// Parses `key=value` lines; blank lines and `#` comments are skipped.
// Throws ParseError.
ConfigMap parse_config(std::istream& in);
ConfigMap read_config(const std::filesystem::path& path);
void write_config(const ConfigMap& map, std::ostream& out);

// Throws ConfigError for unknown keys or malformed values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
// Applies a batch of settings; node order is normalised afterwards.
void apply_settings(RunConfig& config, const ConfigMap& map);
// Defaults overlaid with `map`. A map that names any node replaces the
// default node set.
RunConfig from_config_map(const ConfigMap& map);
// Parses "key=value".
std::pair<std::string, std::string> split_setting(std::string_view setting);

// Fully resolved view: every key, optional values filled in.
ConfigMap to_config_map(const RunConfig& config);

// Every fixed key (node keys are listed for the default nodes).
std::vector<std::string> documented_keys();

}  // namespace tiersim
