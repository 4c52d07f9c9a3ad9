#pragma once

#include <string>

#include "mna/simulator.hpp"

namespace mna {

// Versioned JSON rendering of a run report ("schema": 1).
std::string report_json(const SimReport& report, int indent = 2);

// Per-stream delivery table plus, for each measured path, the per-link loss
// the collector reconstructs from the final counters.
std::string summary_table(const SimReport& report);

}  // namespace mna
