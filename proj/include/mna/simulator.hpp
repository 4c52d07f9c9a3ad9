#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mna/actions.hpp"
#include "mna/composer.hpp"
#include "mna/engine.hpp"

namespace mna {

// ---- scenario model ----

struct NodeCfg {
  std::string id;
  unsigned rld = 64;
  unsigned max_select_nas = wire::kMaxNasLseCount;
  unsigned max_hbh_nas = wire::kMaxNasLseCount;
};

struct LinkCfg {
  std::string from, to;
  double loss = 0;           // inbound drop probability at `to`
  long long capacity = -1;   // packets per tick, negative = unlimited
  bool up = true;
};

struct TunnelHop {
  std::string node;
  std::uint32_t label = 0;
};

// Protection for the link node -> protects, detouring via the listed hops.
struct TunnelCfg {
  std::string node, protects;
  std::vector<TunnelHop> via;
  bool marked = true;
};

struct PathCfg {
  std::string name;
  PathSpec spec;
};

struct RequestCfg {
  std::string path;
  NasRequest request;
};

struct StreamCfg {
  std::string name, path;
  unsigned rate = 1;             // packets per tick
  double size = 1.0;             // capacity units
  std::uint64_t count = ~0ull;   // total packet budget
  unsigned start = 0;            // first tick
  // Per-packet measurement coloring: flips the loss color of the matching
  // flow's measurement action every `period` packets.
  std::optional<std::uint32_t> flow;
  std::uint64_t period = 0;
};

struct NrpCfg {
  std::string node;
  bool fallback = false;
  std::uint32_t selector = 0;
  double rate = 0, burst = 0;
};

struct ScenarioOptions {
  std::uint64_t seed = 1;
  std::uint64_t ticks = 1;
  std::uint8_t ttl = 64;
  bool meters = true;      // slice enforcement on/off
  bool protection = true;  // attach the re-route marker on backup tunnels
  DecodeMode decode = DecodeMode::Strict;
};

struct Scenario {
  ScenarioOptions options;
  std::vector<NodeCfg> nodes;
  std::vector<LinkCfg> links;
  std::vector<TunnelCfg> tunnels;
  std::vector<PathCfg> paths;
  std::vector<RequestCfg> requests;
  std::vector<StreamCfg> streams;
  std::vector<NrpCfg> nrps;
};

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& msg, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg : msg),
        line(line) {}
  std::size_t line;
};

// ---- results ----

struct StreamStats {
  std::string name;
  std::uint64_t sent = 0, delivered = 0;
  std::map<std::string, std::uint64_t> dropped;  // cause -> packets

  std::uint64_t dropped_total() const {
    std::uint64_t n = 0;
    for (auto& [c, v] : dropped) n += v;
    return n;
  }
  double loss_rate() const { return sent ? double(dropped_total()) / double(sent) : 0.0; }
};

struct SimReport {
  std::uint64_t ticks = 0;
  std::uint64_t sent = 0, delivered = 0, dropped = 0;
  // Drop ledger. Location is "A->B" for drops charged to a link (inbound
  // loss, malformed arrivals, capacity) and "@NODE" for drops decided inside
  // a node (ttl, meter, no route, reroute loop).
  std::map<std::string, std::map<std::string, std::uint64_t>> drops;
  std::vector<StreamStats> streams;
  // node -> flow -> per-color packet counts at end of run
  std::map<std::string, std::map<std::uint32_t, std::array<std::uint64_t, 2>>> amm_counts;
  std::vector<ExportRecord> exports;            // chronological, flush records last
  std::map<std::string, std::uint64_t> executed;  // action name -> dispatches
  std::map<std::size_t, std::uint64_t> hop_hist;  // nodes visited -> packets
  std::map<std::string, std::vector<std::string>> path_nodes;  // path -> hop ids
  std::map<std::string, std::vector<std::uint32_t>> path_flows;  // path -> measured flows
  std::uint64_t mutation_violations = 0;
  std::uint64_t unknown_opcodes = 0;
  std::uint64_t multi_reroutes = 0;  // packets that entered a second tunnel
};

// Deterministic run: identical (scenario, seed) gives a bit-identical report.
SimReport run_scenario(const Scenario& sc);

// 1 - prod(1 - p_i)
double expected_e2e_drop(const std::vector<double>& probs);

struct LinkLoss {
  std::uint64_t delta = 0;
  double rate = 0;

  bool operator==(const LinkLoss&) const = default;
};

// Per-link loss from per-node cumulative counters along a path, first counter
// being the generator total.
std::vector<LinkLoss> collector_link_loss(const std::vector<std::uint64_t>& totals);

// Control-plane sink for measurement exports: remembers the latest counter
// per (node, flow, color).
class Collector {
 public:
  void ingest(const ExportRecord& rec);

  // Sum of both color counters; throws std::out_of_range when the node never
  // exported for the flow.
  std::uint64_t total(const std::string& node, std::uint32_t flow) const;

  std::vector<LinkLoss> link_loss(const std::vector<std::string>& path_nodes,
                                  std::uint32_t flow) const;

 private:
  std::map<std::pair<std::string, std::uint32_t>, std::array<std::uint64_t, 2>> last_;
};

}  // namespace mna
