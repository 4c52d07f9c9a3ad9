#include "mna/actions.hpp"

#include <algorithm>
#include <sstream>

namespace mna {

namespace {

// Admission comparisons tolerate this much missing budget so float drift
// cannot starve a stream running at exactly its reserved rate.
constexpr double kTokenEpsilon = 1e-6;

std::uint32_t read_word(const std::uint8_t* p) {
  return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | p[3];
}

void write_word(std::uint8_t* p, std::uint32_t w) {
  p[0] = static_cast<std::uint8_t>(w >> 24);
  p[1] = static_cast<std::uint8_t>(w >> 16);
  p[2] = static_cast<std::uint8_t>(w >> 8);
  p[3] = static_cast<std::uint8_t>(w);
}

}  // namespace

FormatC amm_encode(std::uint32_t flow_id, bool loss_color, bool delay_color) {
  FormatC c;
  c.opcode = kOpcodeAmm;
  c.data = (flow_id << 2 | std::uint32_t(loss_color) << 1 | std::uint32_t(delay_color)) &
           wire::mask(wire::kCDataBits);
  c.nal = 0;
  return c;
}

AmmFields amm_decode(std::uint32_t data20) {
  return AmmFields{data20 >> 2, (data20 & 2) != 0, (data20 & 1) != 0};
}

std::string to_csv(const ExportRecord& rec) {
  std::ostringstream os;
  os << rec.node_id << ',' << rec.flow_id << ',' << (rec.color ? 'b' : 'a') << ',' << rec.counter
     << ',' << rec.timestamp;
  return os.str();
}

std::optional<ExportRecord> amm_process(AmmFlowState& state, std::string_view node_id,
                                        std::uint32_t flow_id, int color, double now) {
  std::optional<ExportRecord> out;
  if (state.last_color >= 0 && state.last_color != color) {
    out = ExportRecord{std::string(node_id), flow_id, state.last_color,
                       state.count[state.last_color], now};
  }
  ++state.count[color & 1];
  state.last_color = color & 1;
  return out;
}

bool tb_allow(TokenBucket& tb, double size, double now) {
  if (now > tb.last_time) {
    tb.tokens = std::min(tb.burst, tb.tokens + (now - tb.last_time) * tb.rate);
    tb.last_time = now;
  }
  if (tb.tokens + kTokenEpsilon < size) return false;
  tb.tokens -= size;
  return true;
}

bool nrp_process(MeterBank& meters, std::uint32_t selector, double size, double now) {
  if (!meters.enabled) return true;
  auto it = meters.by_selector.find(selector);
  if (it != meters.by_selector.end()) return tb_allow(it->second, size, now);
  if (meters.fallback) return tb_allow(*meters.fallback, size, now);
  return true;
}

std::uint32_t AdWords::data(std::size_t i) const {
  std::uint32_t w = read_word(base_ + 4 * i);
  return wire::field(w, wire::kDDataHiShift, wire::kDDataHiBits) << wire::kDDataLoBits |
         wire::field(w, wire::kDDataLoShift, wire::kDDataLoBits);
}

void AdWords::set_low(std::size_t i, std::uint32_t low11) {
  std::uint8_t* p = base_ + 4 * i;
  std::uint32_t w = read_word(p);
  w &= ~wire::kMutableMaskD;
  w |= (low11 & wire::mask(wire::kDDataLoBits)) << wire::kDDataLoShift;
  write_word(p, w);
}

void ActionRegistry::add(std::uint8_t opcode, std::string name, ActionHandler handler) {
  entries_[opcode] = Entry{std::move(name), std::move(handler)};
}

const ActionRegistry::Entry* ActionRegistry::find(std::uint8_t opcode) const {
  auto it = entries_.find(opcode);
  return it == entries_.end() ? nullptr : &it->second;
}

ActionRegistry ActionRegistry::with_builtins() {
  ActionRegistry reg;

  reg.add(kOpcodeNoop, "noop",
          [](ActionContext&, std::uint32_t, AdWords) { return ActionEffect{}; });

  reg.add(kOpcodeNffrr, "nffrr", [](ActionContext& ctx, std::uint32_t data, AdWords) {
    if ((data & 1) && ctx.reroute_marked) *ctx.reroute_marked = true;
    return ActionEffect{};
  });

  reg.add(kOpcodeAmm, "amm", [](ActionContext& ctx, std::uint32_t data, AdWords) {
    ActionEffect eff;
    if (!ctx.amm) return eff;
    AmmFields f = amm_decode(data);
    eff.export_record =
        amm_process((*ctx.amm)[f.flow_id], ctx.node_id, f.flow_id, f.loss_color ? 1 : 0, ctx.now);
    return eff;
  });

  reg.add(kOpcodeNrp, "nrp", [](ActionContext& ctx, std::uint32_t data, AdWords) {
    ActionEffect eff;
    if (!ctx.meters) return eff;
    eff.drop = !nrp_process(*ctx.meters, data, ctx.packet_size, ctx.now);
    return eff;
  });

  reg.add(kOpcodeDummy, "dummy", [](ActionContext& ctx, std::uint32_t, AdWords ads) {
    // Deterministic scribble over the rewritable region, one fresh value per
    // execution.
    for (std::size_t i = 0; i < ads.size(); ++i) {
      std::uint64_t n = ctx.scribble_counter ? ++*ctx.scribble_counter : i;
      ads.set_low(i, static_cast<std::uint32_t>((n * 2654435761u + i) & 0x7FF));
    }
    if (ctx.scribble_counter && ads.size() == 0) ++*ctx.scribble_counter;
    return ActionEffect{};
  });

  return reg;
}

}  // namespace mna
