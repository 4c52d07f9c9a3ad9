#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mna/codec.hpp"

namespace mna {

// Per-node limits the ingress has to respect when it builds a stack.
struct NodeCapabilities {
  std::string node_id;
  unsigned rld = 0;
  unsigned max_select_nas = wire::kMaxNasLseCount;  // words, indicator included
  unsigned max_hbh_nas = wire::kMaxNasLseCount;

  bool mna_capable() const { return rld >= max_select_nas + max_hbh_nas + 1; }
};

// Worst-case number of forwarding entries that may sit between the top label
// and the deepest sub-stack a node must still be able to read. Negative means
// the node cannot support the limits at all.
inline int in_between_capacity(int rld, int max_select_nas, int max_hbh_nas) {
  return rld - max_select_nas - max_hbh_nas - 1;
}

// One action inside a sub-stack request. The first action of a request rides
// in the initial opcode entry (13-bit inline data), later ones in subsequent
// opcode entries (20-bit inline data). Each action may bind up to 7 ancillary
// data words.
struct ActionSpec {
  std::uint8_t opcode = 0;
  std::uint32_t data = 0;
  std::vector<std::uint32_t> ancillary;  // 30-bit values
  // Forces a subsequent opcode entry (20-bit data field); when the first
  // action of a request needs one, the initial entry carries a padding
  // opcode.
  bool wide = false;

  bool operator==(const ActionSpec&) const = default;
};

struct NasRequest {
  Scope scope = Scope::Hbh;
  std::string select_target;  // node id, select scope only
  std::vector<ActionSpec> actions;
};

// One hop of the path the stack is built for.
struct Hop {
  std::string node_id;
  std::uint32_t label = 0;
};

struct PathSpec {
  std::vector<Hop> hops;
  bool php = false;
};

class ComposeError : public std::runtime_error {
 public:
  enum class Kind { CapacityExceeded, NasTooLarge, BadRequest };
  ComposeError(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind(kind) {}
  Kind kind;
};

// Renders a request into a sub-stack (bos cleared; caller finalizes).
Nas build_nas(const NasRequest& request);

// Chooses the labels to place hop-by-hop copies under so that every node on
// the path sees a copy within its readable depth, counted from the top of the
// stack as the node receives it. Returns 0-based hop indices, ascending; the
// last one is where the original sits. select_nas_words[i] is the size of the
// select sub-stack under hop i's label (0 if none), hbh_nas_words the size of
// the copied sub-stack. Throws CapacityExceeded when no placement works.
std::vector<std::size_t> plan_hbh_copies(const std::vector<unsigned>& rlds,
                                         const std::vector<unsigned>& select_nas_words,
                                         unsigned hbh_nas_words);

// Builds the full stack for a path: per-hop forwarding labels, select
// sub-stacks directly below their target's label, hop-by-hop copies per
// plan_hbh_copies, i2e sub-stack at the bottom. Caps and readable depths come
// from caps, matched by node_id. ttl seeds every forwarding entry.
LabelStack compose_stack(const PathSpec& path, const std::vector<NasRequest>& requests,
                         const std::vector<NodeCapabilities>& caps, std::uint8_t ttl = 64);

struct Violation {
  std::string node_id;
  std::string what;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Replays the per-hop view of the stack (pop own label, pop exposed
// sub-stacks) and checks that every node can read what it must process within
// its depth limit and size caps: its select sub-stack, the topmost hop-by-hop
// sub-stack, and at the egress the i2e sub-stack.
ValidationReport validate_stack(const LabelStack& stack, const PathSpec& path,
                                const std::vector<NodeCapabilities>& caps);

}  // namespace mna
