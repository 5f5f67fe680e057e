#pragma once

#include <iosfwd>
#include <span>

#include <json.hpp>

#include "tiersim/chameleon.hpp"
#include "tiersim/simulator.hpp"

namespace tiersim {

using Json = nlohmann::ordered_json;

Json to_json(const CounterSet& counters);
Json to_json(const WindowStats& window);
// Field names follow SimReport.
Json to_json(const SimReport& report);
Json to_json(const Characterization& ch);

void write_windows_csv(std::span<const WindowStats> windows, std::ostream& out);

// Two-space indented, trailing newline.
void write_json(const Json& j, std::ostream& out);

}  // namespace tiersim
