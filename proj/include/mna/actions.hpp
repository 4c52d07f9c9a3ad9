#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mna/codec.hpp"

namespace mna {

// Placeholder opcode assignments (7-bit space, no registry exists yet).
inline constexpr std::uint8_t kOpcodeNoop = 0;   // padding, no effect
inline constexpr std::uint8_t kOpcodeNffrr = 1;  // re-route mark
inline constexpr std::uint8_t kOpcodeAmm = 2;    // alternate-marking measurement
inline constexpr std::uint8_t kOpcodeNrp = 3;    // slice policing selector
inline constexpr std::uint8_t kOpcodeDummy = 96; // stress/no-semantics action

// ---- alternate-marking measurement ----

// Loss color is the second-lowest data bit so it stays inside the rewritable
// low part of a subsequent opcode entry.
FormatC amm_encode(std::uint32_t flow_id, bool loss_color, bool delay_color);

struct AmmFields {
  std::uint32_t flow_id;
  bool loss_color;
  bool delay_color;
};
AmmFields amm_decode(std::uint32_t data20);

struct AmmFlowState {
  std::uint64_t count[2] = {0, 0};
  int last_color = -1;  // -1 until the first packet
};

struct ExportRecord {
  std::string node_id;
  std::uint32_t flow_id = 0;
  int color = 0;
  std::uint64_t counter = 0;
  double timestamp = 0;

  bool operator==(const ExportRecord&) const = default;
};

// node_id, flow_id, color, counter, timestamp
std::string to_csv(const ExportRecord& rec);

// Counts the packet into its color bucket; when the color flips, the finished
// bucket's total is emitted for the control plane.
std::optional<ExportRecord> amm_process(AmmFlowState& state, std::string_view node_id,
                                        std::uint32_t flow_id, int color, double now);

// ---- token bucket ----

struct TokenBucket {
  double rate = 0;   // units per tick
  double burst = 0;  // bucket depth, units
  double tokens = 0;
  double last_time = 0;

  static TokenBucket make(double rate, double burst) { return {rate, burst, burst, 0}; }
};

// Refill up to now, then admit the packet if the budget covers it. The small
// epsilon absorbs float drift so a stream at exactly the configured rate is
// never starved.
bool tb_allow(TokenBucket& tb, double size, double now);

struct MeterBank {
  bool enabled = false;
  std::unordered_map<std::uint32_t, TokenBucket> by_selector;
  std::optional<TokenBucket> fallback;  // meters traffic outside any slice
};

// True when the packet may pass. Unknown selectors fall back to the default
// meter; traffic is unmetered only if no default is configured.
bool nrp_process(MeterBank& meters, std::uint32_t selector, double size, double now);

// ---- registry ----

// Mutable view over the ancillary-data words that follow one opcode entry
// inside a packet's raw stack. Writes touch only the rewritable low bits.
class AdWords {
 public:
  AdWords() = default;
  AdWords(std::uint8_t* first_word, std::size_t count) : base_(first_word), count_(count) {}

  std::size_t size() const { return count_; }
  std::uint32_t data(std::size_t i) const;            // 30-bit value
  void set_low(std::size_t i, std::uint32_t low11);   // rewritable bits only

 private:
  std::uint8_t* base_ = nullptr;
  std::size_t count_ = 0;
};

// Everything a handler may touch, sliced out of the owning node and packet.
struct ActionContext {
  std::string_view node_id;
  double now = 0;
  double packet_size = 0;
  std::unordered_map<std::uint32_t, AmmFlowState>* amm = nullptr;
  MeterBank* meters = nullptr;
  bool* reroute_marked = nullptr;
  std::uint64_t* scribble_counter = nullptr;
};

struct ActionEffect {
  bool drop = false;  // meter verdict
  std::optional<ExportRecord> export_record;
};

using ActionHandler =
    std::function<ActionEffect(ActionContext& ctx, std::uint32_t data, AdWords ads)>;

class ActionRegistry {
 public:
  struct Entry {
    std::string name;
    ActionHandler handler;
  };

  void add(std::uint8_t opcode, std::string name, ActionHandler handler);
  const Entry* find(std::uint8_t opcode) const;

  // noop, nffrr, amm, nrp, dummy
  static ActionRegistry with_builtins();

 private:
  std::map<std::uint8_t, Entry> entries_;
};

}  // namespace mna
