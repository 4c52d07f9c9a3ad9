#include "mna/composer.hpp"

#include <algorithm>
#include <map>

#include "mna/actions.hpp"

namespace mna {

namespace {

[[noreturn]] void fail(ComposeError::Kind kind, const std::string& msg) {
  throw ComposeError(kind, msg);
}

// Word depth of an entry list prefix, stopping after `entries` items.
std::size_t words_of(const std::vector<StackEntry>& entries, std::size_t count) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < count; ++i)
    n += std::holds_alternative<Lse>(entries[i]) ? 1 : std::get<Nas>(entries[i]).lse_count();
  return n;
}

const NodeCapabilities& caps_for(const std::vector<NodeCapabilities>& caps,
                                 const std::string& node_id) {
  for (const auto& c : caps)
    if (c.node_id == node_id) return c;
  fail(ComposeError::Kind::BadRequest, "no capabilities declared for node " + node_id);
}

}  // namespace

Nas build_nas(const NasRequest& request) {
  if (request.actions.empty())
    fail(ComposeError::Kind::BadRequest, "request carries no actions");
  if (request.scope == Scope::Reserved)
    fail(ComposeError::Kind::BadRequest, "reserved scope");

  Nas nas;
  nas.initial.scope = request.scope;
  std::size_t next = 0;

  const auto& first = request.actions[0];
  if (first.ancillary.size() > wire::kMaxNal)
    fail(ComposeError::Kind::BadRequest, "more than 7 ancillary words on one opcode");
  if (!first.wide) {
    if (first.data > wire::mask(wire::kBDataBits))
      fail(ComposeError::Kind::BadRequest,
           "initial entry carries 13 data bits, got value " + std::to_string(first.data));
    nas.initial.opcode = first.opcode;
    nas.initial.data = static_cast<std::uint16_t>(first.data);
    nas.initial.nal = static_cast<std::uint8_t>(first.ancillary.size());
    for (std::uint32_t ad : first.ancillary) nas.rest.emplace_back(FormatD{ad, false});
    next = 1;
  } else {
    // Wide first action: the initial entry is a padding opcode and the real
    // action follows as a subsequent entry.
    nas.initial.opcode = kOpcodeNoop;
    nas.initial.data = 0;
    nas.initial.nal = 0;
  }

  for (std::size_t i = next; i < request.actions.size(); ++i) {
    const auto& a = request.actions[i];
    if (a.ancillary.size() > wire::kMaxNal)
      fail(ComposeError::Kind::BadRequest, "more than 7 ancillary words on one opcode");
    if (a.data > wire::mask(wire::kCDataBits))
      fail(ComposeError::Kind::BadRequest, "opcode data above 20 bits");
    FormatC c;
    c.opcode = a.opcode;
    c.data = a.data;
    c.nal = static_cast<std::uint8_t>(a.ancillary.size());
    nas.rest.emplace_back(c);
    for (std::uint32_t ad : a.ancillary) nas.rest.emplace_back(FormatD{ad, false});
  }

  if (nas.rest.size() > wire::kMaxNasl)
    fail(ComposeError::Kind::NasTooLarge,
         "request renders to " + std::to_string(2 + nas.rest.size()) + " words, cap is " +
             std::to_string(wire::kMaxNasLseCount));
  nas.initial.nasl = static_cast<std::uint8_t>(nas.rest.size());
  return nas;
}

std::vector<std::size_t> plan_hbh_copies(const std::vector<unsigned>& rlds,
                                         const std::vector<unsigned>& select_nas_words,
                                         unsigned hbh_nas_words) {
  std::size_t k = rlds.size();
  std::vector<std::size_t> positions;
  std::size_t first_uncovered = 0;
  while (first_uncovered < k) {
    // Deepest hop whose copy stays readable for every node it has to serve.
    // Depth grows monotonically with the copy position, so stop at the first
    // infeasible candidate.
    std::optional<std::size_t> best;
    for (std::size_t c = first_uncovered; c < k; ++c) {
      bool ok = true;
      for (std::size_t t = first_uncovered; t <= c && ok; ++t) {
        unsigned depth = hbh_nas_words;
        for (std::size_t u = t; u <= c; ++u) depth += 1 + select_nas_words[u];
        ok = depth <= rlds[t];
      }
      if (!ok) break;
      best = c;
    }
    if (!best)
      fail(ComposeError::Kind::CapacityExceeded,
           "depth " + std::to_string(rlds[first_uncovered]) + " at hop " +
               std::to_string(first_uncovered) + " cannot reach a hop-by-hop copy of " +
               std::to_string(hbh_nas_words) + " words");
    positions.push_back(*best);
    first_uncovered = *best + 1;
  }
  return positions;
}

LabelStack compose_stack(const PathSpec& path, const std::vector<NasRequest>& requests,
                         const std::vector<NodeCapabilities>& caps, std::uint8_t ttl) {
  if (path.hops.empty()) fail(ComposeError::Kind::BadRequest, "empty path");
  std::size_t k = path.hops.size();

  std::map<std::size_t, Nas> selects;  // hop index -> sub-stack
  std::optional<Nas> hbh, i2e;
  for (const auto& req : requests) {
    switch (req.scope) {
      case Scope::Select: {
        auto it = std::find_if(path.hops.begin(), path.hops.end(),
                               [&](const Hop& h) { return h.node_id == req.select_target; });
        if (it == path.hops.end())
          fail(ComposeError::Kind::BadRequest,
               "select target " + req.select_target + " is not on the path");
        std::size_t idx = static_cast<std::size_t>(it - path.hops.begin());
        if (selects.count(idx))
          fail(ComposeError::Kind::BadRequest,
               "two select requests for node " + req.select_target);
        selects.emplace(idx, build_nas(req));
        break;
      }
      case Scope::Hbh:
        if (hbh)
          fail(ComposeError::Kind::BadRequest,
               "two hop-by-hop requests: only the topmost copy would execute");
        hbh = build_nas(req);
        break;
      case Scope::I2e:
        if (i2e) fail(ComposeError::Kind::BadRequest, "two edge-to-edge requests");
        i2e = build_nas(req);
        break;
      default:
        fail(ComposeError::Kind::BadRequest, "reserved scope");
    }
  }

  // Per-node size caps. The hop-by-hop sub-stack is processed everywhere, a
  // select sub-stack only at its target.
  std::vector<unsigned> rlds, select_words;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = caps_for(caps, path.hops[i].node_id);
    rlds.push_back(c.rld);
    unsigned sw = 0;
    if (auto it = selects.find(i); it != selects.end()) {
      sw = static_cast<unsigned>(it->second.lse_count());
      if (sw > c.max_select_nas)
        fail(ComposeError::Kind::NasTooLarge,
             "select sub-stack of " + std::to_string(sw) + " words exceeds cap " +
                 std::to_string(c.max_select_nas) + " at " + c.node_id);
      if (1 + sw > c.rld)
        fail(ComposeError::Kind::CapacityExceeded,
             "select sub-stack of " + std::to_string(sw) + " words is out of depth " +
                 std::to_string(c.rld) + " at " + c.node_id);
    }
    if (hbh && hbh->lse_count() > c.max_hbh_nas)
      fail(ComposeError::Kind::NasTooLarge,
           "hop-by-hop sub-stack of " + std::to_string(hbh->lse_count()) +
               " words exceeds cap " + std::to_string(c.max_hbh_nas) + " at " + c.node_id);
    select_words.push_back(sw);
  }

  std::vector<std::size_t> copy_at;
  if (hbh)
    copy_at = plan_hbh_copies(rlds, select_words, static_cast<unsigned>(hbh->lse_count()));

  LabelStack stack;
  std::size_t egress_block_words = 0;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t before = words_of(stack.entries, stack.entries.size());
    stack.entries.emplace_back(Lse{path.hops[i].label, 0, false, ttl});
    if (auto it = selects.find(i); it != selects.end()) stack.entries.emplace_back(it->second);
    if (std::binary_search(copy_at.begin(), copy_at.end(), i)) {
      Nas copy = *hbh;
      copy.indicator.ttl = ttl;
      stack.entries.emplace_back(std::move(copy));
    }
    if (i + 1 == k)
      egress_block_words = words_of(stack.entries, stack.entries.size()) - before;
  }
  if (i2e) {
    stack.entries.emplace_back(*i2e);
    // The egress reads its whole bottom block: label, select, copy, then the
    // edge-to-edge sub-stack. With penultimate-hop popping the label is gone
    // before arrival.
    const auto& ec = caps_for(caps, path.hops.back().node_id);
    std::size_t need = egress_block_words + i2e->lse_count() - (path.php ? 1 : 0);
    if (need > ec.rld)
      fail(ComposeError::Kind::CapacityExceeded,
           "edge-to-edge sub-stack ends at depth " + std::to_string(need) +
               ", readable depth at " + ec.node_id + " is " + std::to_string(ec.rld));
  }
  finalize_bos(stack);
  return stack;
}

ValidationReport validate_stack(const LabelStack& stack, const PathSpec& path,
                                const std::vector<NodeCapabilities>& caps) {
  ValidationReport report;
  auto flag = [&](const std::string& node, std::string what) {
    report.violations.push_back({node, std::move(what)});
  };

  bool stack_has_hbh = false, stack_has_i2e = false;
  for (const auto& e : stack.entries) {
    if (const auto* nas = std::get_if<Nas>(&e)) {
      stack_has_hbh |= nas->scope() == Scope::Hbh;
      stack_has_i2e |= nas->scope() == Scope::I2e;
    }
  }

  std::vector<StackEntry> view(stack.entries.begin(), stack.entries.end());
  std::size_t k = path.hops.size();

  for (std::size_t i = 0; i < k; ++i) {
    const auto& hop = path.hops[i];
    const auto& c = caps_for(caps, hop.node_id);
    bool egress = i + 1 == k;
    bool php_egress = egress && path.php;

    // Top of the received view must be this hop's forwarding label (the
    // penultimate hop already popped it when penultimate-hop popping is on).
    std::size_t at = 0;
    if (!php_egress) {
      const Lse* top = view.empty() ? nullptr : std::get_if<Lse>(&view[0]);
      if (!top || top->label != hop.label) {
        flag(hop.node_id, "top of stack is not this node's forwarding label");
        return report;
      }
      at = 1;
    }

    // Depth of each visible sub-stack, counted from the received top.
    std::size_t depth = php_egress ? 0 : 1;
    bool hbh_seen = false;
    for (std::size_t e = at; e < view.size(); ++e) {
      const auto* nas = std::get_if<Nas>(&view[e]);
      std::size_t words = nas ? nas->lse_count() : 1;
      std::size_t end_depth = depth + words;
      if (nas) {
        bool select_mine = nas->scope() == Scope::Select && e == at && !php_egress;
        if (php_egress && nas->scope() == Scope::Select && e == 0) select_mine = true;
        if (select_mine) {
          if (end_depth > c.rld)
            flag(hop.node_id, "select sub-stack ends at depth " + std::to_string(end_depth) +
                                  ", readable depth is " + std::to_string(c.rld));
          if (words > c.max_select_nas)
            flag(hop.node_id, "select sub-stack of " + std::to_string(words) +
                                  " words exceeds cap " + std::to_string(c.max_select_nas));
        }
        if (nas->scope() == Scope::Hbh && !hbh_seen) {
          hbh_seen = true;
          if (end_depth > c.rld)
            flag(hop.node_id, "hop-by-hop sub-stack ends at depth " + std::to_string(end_depth) +
                                  ", readable depth is " + std::to_string(c.rld));
          if (words > c.max_hbh_nas)
            flag(hop.node_id, "hop-by-hop sub-stack of " + std::to_string(words) +
                                  " words exceeds cap " + std::to_string(c.max_hbh_nas));
        }
        if (nas->scope() == Scope::I2e && egress && end_depth > c.rld)
          flag(hop.node_id, "edge-to-edge sub-stack ends at depth " + std::to_string(end_depth) +
                                ", readable depth is " + std::to_string(c.rld));
      }
      depth = end_depth;
    }
    if (stack_has_hbh && !hbh_seen)
      flag(hop.node_id, "no hop-by-hop sub-stack visible");
    if (egress && stack_has_i2e) {
      const auto* last_nas = view.empty() ? nullptr : std::get_if<Nas>(&view.back());
      if (!last_nas || last_nas->scope() != Scope::I2e)
        flag(hop.node_id, "edge-to-edge sub-stack is not at the bottom");
    }

    if (egress) break;

    // Hand the next node its view: pop the label, then every exposed
    // sub-stack (selects execute here, hop-by-hop copies are dropped). A
    // penultimate hop with popping enabled then removes the egress label too,
    // leaving whatever sits under it for the egress to read.
    if (!view.empty()) view.erase(view.begin());
    while (!view.empty() && std::holds_alternative<Nas>(view[0])) view.erase(view.begin());
    if (path.php && i + 2 == k && !view.empty() && std::holds_alternative<Lse>(view[0]))
      view.erase(view.begin());
  }
  return report;
}

}  // namespace mna
