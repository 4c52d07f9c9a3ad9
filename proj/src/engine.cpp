#include "mna/engine.hpp"

#include <algorithm>
#include <optional>

#include "mna/wire.hpp"

namespace mna {

namespace {

std::uint32_t read_word(const std::uint8_t* p) {
  return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | p[3];
}

void write_word(std::uint8_t* p, std::uint32_t w) {
  p[0] = std::uint8_t(w >> 24);
  p[1] = std::uint8_t(w >> 16);
  p[2] = std::uint8_t(w >> 8);
  p[3] = std::uint8_t(w);
}

std::uint32_t word_mutable_mask(const NasEntry& e) {
  return std::holds_alternative<FormatC>(e) ? wire::kMutableMaskC : wire::kMutableMaskD;
}

// Runs every opcode of one sub-stack through the registry, in entry order,
// skipping ancillary words via the per-opcode counts. Handlers see ancillary
// data through a scratch buffer; edits are folded back into the entries.
std::optional<DropCause> run_nas(NodeState& node, const ProcessEnv& env, double pkt_size,
                                 Nas& nas, Disposition& disp, bool& marked) {
  static const ActionRegistry kEmpty;
  const ActionRegistry& reg = env.registry ? *env.registry : kEmpty;

  ActionContext ctx;
  ctx.node_id = node.id;
  ctx.now = env.now;
  ctx.packet_size = pkt_size;
  ctx.amm = &node.amm;
  ctx.meters = &node.meters;
  ctx.reroute_marked = &marked;
  ctx.scribble_counter = &node.scribble_counter;

  std::vector<std::uint8_t> before = nas_words(nas);

  auto dispatch = [&](std::uint8_t op, std::uint32_t data, std::size_t d_first,
                      std::size_t d_count) -> std::optional<DropCause> {
    const auto* entry = reg.find(op);
    if (!entry) {
      ++disp.unknown_opcodes;
      if (nas.initial.u) return DropCause::Malformed;
      return std::nullopt;
    }
    std::vector<std::uint8_t> buf(4 * d_count);
    for (std::size_t t = 0; t < d_count; ++t)
      write_word(&buf[4 * t], pack_word(std::get<FormatD>(nas.rest[d_first + t])));
    disp.executed.emplace_back(nas.scope(), op);
    ActionEffect eff = entry->handler(ctx, data, AdWords(buf.data(), d_count));
    for (std::size_t t = 0; t < d_count; ++t)
      nas.rest[d_first + t] = unpack_d(read_word(&buf[4 * t]));
    if (eff.export_record) disp.exports.push_back(std::move(*eff.export_record));
    if (eff.drop) return DropCause::MeterExceeded;
    return std::nullopt;
  };

  std::optional<DropCause> verdict =
      dispatch(nas.initial.opcode, nas.initial.data, 0, nas.initial.nal);
  std::size_t i = nas.initial.nal;
  while (!verdict && i < nas.rest.size()) {
    const auto& c = std::get<FormatC>(nas.rest[i]);
    std::uint8_t nal = c.nal;
    verdict = dispatch(c.opcode, c.data, i + 1, nal);
    i += 1 + std::size_t(nal);
  }

  std::vector<std::uint8_t> after = nas_words(nas);
  for (std::size_t w = 0; w < before.size() / 4; ++w) {
    std::uint32_t m = w == 0   ? wire::kMutableMaskA
                      : w == 1 ? wire::kMutableMaskB
                               : word_mutable_mask(nas.rest[w - 2]);
    if ((read_word(&before[4 * w]) ^ read_word(&after[4 * w])) & ~m)
      disp.mutation_violation = true;
  }
  return verdict;
}

}  // namespace

const char* to_string(DropCause cause) {
  switch (cause) {
    case DropCause::TtlExpired: return "ttl_expired";
    case DropCause::RerouteLoop: return "reroute_loop";
    case DropCause::MeterExceeded: return "meter_exceeded";
    case DropCause::NoRoute: return "no_route";
    case DropCause::Malformed: return "malformed";
    case DropCause::RandomLoss: return "random_loss";
  }
  return "unknown";
}

Disposition process_packet(NodeState& node, Packet& pkt, const ProcessEnv& env) {
  Disposition disp;

  if (env.arrival_loss_prob > 0 && node.rng.next_double() < env.arrival_loss_prob) {
    disp.cause = DropCause::RandomLoss;
    return disp;
  }

  ParsedStack parsed;
  try {
    parsed = decode_stack(pkt.stack, node.rld, env.decode);
  } catch (const CodecError&) {
    disp.cause = DropCause::Malformed;
    return disp;
  }

  std::vector<StackEntry> entries = std::move(parsed.stack.entries);
  std::size_t visible_words = 0;
  for (const auto& e : entries)
    visible_words += std::holds_alternative<Lse>(e) ? 1 : std::get<Nas>(e).lse_count();
  std::vector<std::uint8_t> tail(pkt.stack.begin() + 4 * visible_words, pkt.stack.end());

  if (entries.empty() && !tail.empty()) {
    // The first sub-stack alone overflows this node's readable depth.
    disp.cause = DropCause::Malformed;
    return disp;
  }

  bool marked = false;

  // The topmost visible hop-by-hop sub-stack runs at every node.
  for (auto& e : entries) {
    auto* nas = std::get_if<Nas>(&e);
    if (!nas || nas->scope() != Scope::Hbh) continue;
    if (auto d = run_nas(node, env, pkt.size, *nas, disp, marked)) {
      disp.cause = *d;
      disp.reroute_marked = marked;
      return disp;
    }
    break;
  }
  disp.reroute_marked = marked;

  auto emit = [&](bool deliver, const std::string& next = {}) {
    if (tail.empty() && !entries.empty()) {
      LabelStack rebuilt{std::move(entries)};
      finalize_bos(rebuilt);
      pkt.stack = encode_stack_raw(rebuilt);
    } else {
      pkt.stack = encode_stack_raw(LabelStack{std::move(entries)});
      pkt.stack.insert(pkt.stack.end(), tail.begin(), tail.end());
    }
    disp.kind = deliver ? Disposition::Kind::Deliver : Disposition::Kind::Forward;
    disp.next_node = next;
  };

  // Consume leading sub-stacks at their point of exposure. Select runs here
  // (it sat directly below the label of the node that popped it), hop-by-hop
  // copies are spent, edge-to-edge runs only when delivering.
  auto pop_exposed = [&](bool delivering) -> std::optional<DropCause> {
    while (!entries.empty()) {
      auto* nas = std::get_if<Nas>(&entries.front());
      if (!nas) break;
      Scope s = nas->scope();
      if (s == Scope::I2e && !delivering) break;
      if (s == Scope::Select || (s == Scope::I2e && delivering))
        if (auto d = run_nas(node, env, pkt.size, *nas, disp, marked)) return d;
      entries.erase(entries.begin());
      ++disp.popped;
    }
    disp.reroute_marked = marked;
    return std::nullopt;
  };

  // No forwarding label on top: the label was popped upstream and this node
  // terminates the path.
  if (entries.empty() || std::holds_alternative<Nas>(entries.front())) {
    if (auto d = pop_exposed(true)) {
      disp.cause = *d;
      return disp;
    }
    emit(true);
    return disp;
  }

  Lse top = std::get<Lse>(entries.front());
  auto fit = node.fib.find(top.label);
  if (fit == node.fib.end()) {
    disp.cause = DropCause::NoRoute;
    return disp;
  }
  const FibEntry& fe = fit->second;

  if (fe.op == FibOp::Deliver) {
    entries.erase(entries.begin());
    ++disp.popped;
    if (auto d = pop_exposed(true)) {
      disp.cause = *d;
      return disp;
    }
    emit(true);
    return disp;
  }

  if (fe.op == FibOp::PopForward) {
    entries.erase(entries.begin());
    ++disp.popped;
    if (auto d = pop_exposed(false)) {
      disp.cause = *d;
      return disp;
    }
    if (fe.php && !entries.empty() && std::holds_alternative<Lse>(entries.front())) {
      entries.erase(entries.begin());
      ++disp.popped;
    }
  } else {
    std::get<Lse>(entries.front()).label = fe.out_label;
  }

  std::string next = fe.next_node;
  bool up = !env.link_up || env.link_up(node.id, next);
  if (!up) {
    if (marked) {
      disp.cause = DropCause::RerouteLoop;
      return disp;
    }
    auto bit = node.frr.find(next);
    if (bit == node.frr.end()) {
      disp.cause = DropCause::NoRoute;
      return disp;
    }
    const BackupTunnel& tun = bit->second;
    disp.rerouted = true;
    std::uint8_t tun_ttl = top.ttl > 0 ? std::uint8_t(top.ttl - 1) : 0;
    if (tun.marked) {
      Nas mark;
      mark.indicator.ttl = tun_ttl;
      mark.initial = FormatB{kOpcodeNffrr, 1, Scope::Hbh, 0, 0, false, false, false};
      entries.insert(entries.begin(), std::move(mark));
      ++disp.pushed;
    }
    for (auto it = tun.labels.rbegin(); it != tun.labels.rend(); ++it) {
      entries.insert(entries.begin(), Lse{*it, 0, false, tun_ttl});
      ++disp.pushed;
    }
    next = tun.first_hop;
    if (env.link_up && !env.link_up(node.id, next)) {
      disp.cause = DropCause::NoRoute;
      return disp;
    }
  }

  if (top.ttl <= 1) {
    disp.cause = DropCause::TtlExpired;
    return disp;
  }
  if (!entries.empty())
    if (auto* lse = std::get_if<Lse>(&entries.front())) lse->ttl = std::uint8_t(top.ttl - 1);

  emit(false, next);
  return disp;
}

}  // namespace mna
