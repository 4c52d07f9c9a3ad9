#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mna/simulator.hpp"

namespace mna {

// Line-oriented scenario description. Sections: [options], [nodes], [links],
// [tunnels], [paths], [requests], [streams], [nrps]. '#' starts a comment.
// Errors carry the 1-based source line.
Scenario parse_scenario(std::istream& in);
Scenario parse_scenario_text(const std::string& text);

// Input for the stack-building and validation commands: either a literal
// [stack] section or a [path] plus [requests] to compose, with optional
// [nodes] depth limits and an [options] ttl.
struct StackFile {
  std::optional<LabelStack> stack;
  std::optional<PathSpec> path;
  std::vector<NodeCapabilities> nodes;
  std::vector<NasRequest> requests;
  std::uint8_t ttl = 64;
};

StackFile parse_stack_file(std::istream& in);
StackFile parse_stack_file_text(const std::string& text);

// The stack a file describes: the literal one, or the composed one when the
// file gives a path. Throws ScenarioError when the file has neither.
LabelStack realize_stack(const StackFile& sf);

}  // namespace mna
