#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mna/actions.hpp"
#include "mna/codec.hpp"
#include "mna/rng.hpp"

namespace mna {

enum class DropCause {
  TtlExpired,
  RerouteLoop,  // packet already carried a re-route mark when its link failed
  MeterExceeded,
  NoRoute,
  Malformed,
  RandomLoss,
};

const char* to_string(DropCause cause);

enum class FibOp {
  PopForward,  // pop own label, consume exposed sub-stacks, forward
  Swap,        // rewrite the top label, forward
  Deliver,     // this node terminates the path
};

struct FibEntry {
  FibOp op = FibOp::PopForward;
  std::string next_node;      // forwarding ops only
  std::uint32_t out_label = 0;  // swap only
  // Penultimate-hop popping: after own pop, remove the downstream label too
  // and leave whatever sits under it for the egress.
  bool php = false;

  bool operator==(const FibEntry&) const = default;
};

// Pre-installed protection for one adjacent link. labels[0] ends up on top.
// When marked is set the re-route also inserts a hop-by-hop marker sub-stack
// below the deepest tunnel label, so every node inside the tunnel refuses to
// re-route the packet a second time.
struct BackupTunnel {
  std::vector<std::uint32_t> labels;
  std::string first_hop;
  bool marked = true;
};

struct NodeState {
  std::string id;
  std::size_t rld = 64;
  std::unordered_map<std::uint32_t, FibEntry> fib;
  std::unordered_map<std::string, BackupTunnel> frr;  // keyed by protected next hop
  std::unordered_map<std::uint32_t, AmmFlowState> amm;
  MeterBank meters;
  std::uint64_t scribble_counter = 0;
  Rng rng{0};
};

struct Packet {
  std::vector<std::uint8_t> stack;  // encoded label stack, no payload
  double size = 1.0;
};

struct ProcessEnv {
  double now = 0;
  double arrival_loss_prob = 0;  // loss on the inbound link, charged here
  DecodeMode decode = DecodeMode::Strict;
  const ActionRegistry* registry = nullptr;
  // Liveness of the link from this node toward a neighbor. Default: all up.
  std::function<bool(const std::string& from, const std::string& to)> link_up;
};

struct Disposition {
  enum class Kind { Forward, Deliver, Drop };
  Kind kind = Kind::Drop;
  DropCause cause = DropCause::NoRoute;  // when kind == Drop
  std::string next_node;                 // when kind == Forward
  std::size_t popped = 0;                // stack entries removed
  std::size_t pushed = 0;                // stack entries added
  std::size_t unknown_opcodes = 0;       // skipped for lack of a handler
  bool reroute_marked = false;           // a marker action fired at this node
  bool rerouted = false;                 // a backup tunnel was entered here
  bool mutation_violation = false;       // an action touched read-only bits
  std::vector<std::pair<Scope, std::uint8_t>> executed;  // dispatch order
  std::vector<ExportRecord> exports;
};

// One node's handling of one packet: inbound loss, decode within the node's
// readable depth, topmost hop-by-hop sub-stack, label operation, exposed
// sub-stacks (select executes at the node that uncovers it, edge-to-edge at
// the delivering node), link protection, TTL. On Forward/Deliver pkt.stack
// holds the outgoing bytes; on Drop it is left as received.
Disposition process_packet(NodeState& node, Packet& pkt, const ProcessEnv& env);

}  // namespace mna
