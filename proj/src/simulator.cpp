#include "mna/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "mna/rng.hpp"

namespace mna {

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

struct StreamRt {
  const StreamCfg* cfg = nullptr;
  std::size_t index = 0;
  std::uint64_t seq = 0;                    // packets injected so far
  std::vector<std::uint8_t> bytes[2];       // per-color encodings
  bool colored = false;
  std::string ingress;
};

struct Injection {
  StreamRt* stream;
  double ts;
  int color;
};

}  // namespace

double expected_e2e_drop(const std::vector<double>& probs) {
  double pass = 1.0;
  for (double p : probs) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("drop probability outside [0,1]");
    pass *= 1.0 - p;
  }
  return 1.0 - pass;
}

std::vector<LinkLoss> collector_link_loss(const std::vector<std::uint64_t>& totals) {
  std::vector<LinkLoss> out;
  for (std::size_t i = 0; i + 1 < totals.size(); ++i) {
    if (totals[i + 1] > totals[i])
      throw std::invalid_argument("counter grows along the path at hop " + std::to_string(i + 1));
    std::uint64_t delta = totals[i] - totals[i + 1];
    out.push_back({delta, totals[i] ? double(delta) / double(totals[i]) : 0.0});
  }
  return out;
}

void Collector::ingest(const ExportRecord& rec) {
  last_[{rec.node_id, rec.flow_id}][rec.color & 1] = rec.counter;
}

std::uint64_t Collector::total(const std::string& node, std::uint32_t flow) const {
  const auto& colors = last_.at({node, flow});
  return colors[0] + colors[1];
}

std::vector<LinkLoss> Collector::link_loss(const std::vector<std::string>& path_nodes,
                                           std::uint32_t flow) const {
  std::vector<std::uint64_t> totals;
  totals.reserve(path_nodes.size());
  for (const auto& n : path_nodes) totals.push_back(total(n, flow));
  return collector_link_loss(totals);
}

SimReport run_scenario(const Scenario& sc) {
  static const ActionRegistry kRegistry = ActionRegistry::with_builtins();

  SimReport report;
  report.ticks = sc.options.ticks;

  // Nodes, in id order for deterministic iteration.
  std::map<std::string, NodeState> nodes;
  std::vector<NodeCapabilities> caps;
  Rng master(sc.options.seed);
  for (const auto& nc : sc.nodes) {
    if (nodes.count(nc.id)) throw ScenarioError("duplicate node " + nc.id);
    NodeState st;
    st.id = nc.id;
    st.rld = nc.rld;
    st.rng = master.split(fnv1a64(nc.id));
    nodes.emplace(nc.id, std::move(st));
    caps.push_back({nc.id, nc.rld, nc.max_select_nas, nc.max_hbh_nas});
  }
  auto node_at = [&](const std::string& id, const char* what) -> NodeState& {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw ScenarioError(std::string(what) + " references unknown node " + id);
    return it->second;
  };

  std::map<std::pair<std::string, std::string>, const LinkCfg*> links;
  for (const auto& l : sc.links) {
    node_at(l.from, "link");
    node_at(l.to, "link");
    if (!links.emplace(std::make_pair(l.from, l.to), &l).second)
      throw ScenarioError("duplicate link " + l.from + " -> " + l.to);
  }

  auto install_fib = [&](NodeState& n, std::uint32_t label, FibEntry fe, const std::string& what) {
    auto [it, fresh] = n.fib.emplace(label, fe);
    if (!fresh && !(it->second == fe))
      throw ScenarioError(what + " re-binds label " + std::to_string(label) + " at " + n.id);
  };

  std::map<std::string, const PathCfg*> paths;
  for (const auto& p : sc.paths) {
    if (!paths.emplace(p.name, &p).second) throw ScenarioError("duplicate path " + p.name);
    const auto& hops = p.spec.hops;
    if (hops.empty()) throw ScenarioError("path " + p.name + " has no hops");
    for (std::size_t i = 0; i < hops.size(); ++i) {
      NodeState& n = node_at(hops[i].node_id, "path");
      FibEntry fe;
      if (i + 1 == hops.size()) {
        fe = {FibOp::Deliver, "", 0, false};
      } else {
        fe = {FibOp::PopForward, hops[i + 1].node_id, 0,
              p.spec.php && i + 2 == hops.size()};
      }
      install_fib(n, hops[i].label, fe, "path " + p.name);
    }
    report.path_nodes[p.name] = {};
    for (const auto& h : hops) report.path_nodes[p.name].push_back(h.node_id);
  }

  for (const auto& t : sc.tunnels) {
    NodeState& plr = node_at(t.node, "tunnel");
    node_at(t.protects, "tunnel");
    if (t.via.empty()) throw ScenarioError("tunnel at " + t.node + " has no hops");
    BackupTunnel bt;
    bt.first_hop = t.via.front().node;
    bt.marked = t.marked && sc.options.protection;
    for (std::size_t i = 0; i < t.via.size(); ++i) {
      bt.labels.push_back(t.via[i].label);
      NodeState& hop = node_at(t.via[i].node, "tunnel");
      std::string next = i + 1 < t.via.size() ? t.via[i + 1].node : t.protects;
      install_fib(hop, t.via[i].label, {FibOp::PopForward, next, 0, false},
                  "tunnel at " + t.node);
    }
    if (!plr.frr.emplace(t.protects, std::move(bt)).second)
      throw ScenarioError("duplicate tunnel protecting " + t.node + " -> " + t.protects);
  }

  for (const auto& m : sc.nrps) {
    NodeState& n = node_at(m.node, "nrp");
    n.meters.enabled = sc.options.meters;
    if (m.fallback)
      n.meters.fallback = TokenBucket::make(m.rate, m.burst);
    else if (!n.meters.by_selector.emplace(m.selector, TokenBucket::make(m.rate, m.burst)).second)
      throw ScenarioError("duplicate meter selector " + std::to_string(m.selector) + " at " +
                          m.node);
  }

  // Compose one stack template per path and check it against every hop's
  // readable depth up front.
  std::map<std::string, LabelStack> templates;
  for (const auto& [name, p] : paths) {
    std::vector<NasRequest> reqs;
    for (const auto& r : sc.requests)
      if (r.path == name) reqs.push_back(r.request);
    LabelStack stack;
    try {
      stack = compose_stack(p->spec, reqs, caps, sc.options.ttl);
    } catch (const ComposeError& e) {
      throw ScenarioError("path " + name + ": " + e.what());
    }
    ValidationReport vr = validate_stack(stack, p->spec, caps);
    if (!vr.ok())
      throw ScenarioError("path " + name + ": " + vr.violations.front().node_id + ": " +
                          vr.violations.front().what);
    for (const auto& r : sc.requests)
      if (r.path == name)
        for (const auto& a : r.request.actions)
          if (a.opcode == kOpcodeAmm)
            report.path_flows[name].push_back(amm_decode(a.data).flow_id);
    templates.emplace(name, std::move(stack));
  }

  std::vector<StreamRt> streams(sc.streams.size());
  report.streams.resize(sc.streams.size());
  for (std::size_t i = 0; i < sc.streams.size(); ++i) {
    const StreamCfg& cfg = sc.streams[i];
    StreamRt& rt = streams[i];
    rt.cfg = &cfg;
    rt.index = i;
    report.streams[i].name = cfg.name;
    auto pit = paths.find(cfg.path);
    if (pit == paths.end())
      throw ScenarioError("stream " + cfg.name + " references unknown path " + cfg.path);
    rt.ingress = pit->second->spec.hops.front().node_id;
    if (cfg.rate == 0) throw ScenarioError("stream " + cfg.name + " has rate 0");

    LabelStack tmpl = templates.at(cfg.path);
    rt.bytes[0] = encode_stack(tmpl);
    if (cfg.flow) {
      rt.colored = true;
      bool found = false;
      for (auto& entry : tmpl.entries) {
        auto* nas = std::get_if<Nas>(&entry);
        if (!nas) continue;
        for (auto& ne : nas->rest) {
          auto* c = std::get_if<FormatC>(&ne);
          if (!c || c->opcode != kOpcodeAmm) continue;
          AmmFields f = amm_decode(c->data);
          if (f.flow_id != *cfg.flow) continue;
          c->data = amm_encode(f.flow_id, true, f.delay_color).data;
          found = true;
        }
      }
      if (!found)
        throw ScenarioError("stream " + cfg.name + " colors flow " + std::to_string(*cfg.flow) +
                            " but path " + cfg.path + " carries no such measurement action");
      rt.bytes[1] = encode_stack(tmpl);
    }
  }

  auto link_of = [&](const std::string& a, const std::string& b) -> const LinkCfg* {
    auto it = links.find({a, b});
    return it == links.end() ? nullptr : it->second;
  };

  ProcessEnv env;
  env.registry = &kRegistry;
  env.decode = sc.options.decode;
  env.link_up = [&](const std::string& a, const std::string& b) {
    const LinkCfg* l = link_of(a, b);
    return !l || l->up;
  };

  std::map<std::pair<std::string, std::string>, long long> link_used;
  std::vector<Injection> batch;

  for (std::uint64_t tick = 0; tick < sc.options.ticks; ++tick) {
    link_used.clear();
    batch.clear();
    for (auto& rt : streams) {
      const StreamCfg& cfg = *rt.cfg;
      if (tick < cfg.start) continue;
      for (unsigned m = 0; m < cfg.rate && rt.seq < cfg.count; ++m, ++rt.seq) {
        int color = 0;
        if (rt.colored && cfg.period) color = int((rt.seq / cfg.period) & 1);
        batch.push_back({&rt, double(tick) + double(m) / cfg.rate, color});
      }
    }
    // Random tie-break first, then timestamp order: meters see monotone
    // time, simultaneous arrivals contend for capacity in random order.
    for (std::size_t i = batch.size(); i > 1; --i)
      std::swap(batch[i - 1], batch[master.next_below(i)]);
    std::stable_sort(batch.begin(), batch.end(),
                     [](const Injection& a, const Injection& b) { return a.ts < b.ts; });

    for (const Injection& inj : batch) {
      StreamStats& stats = report.streams[inj.stream->index];
      ++stats.sent;
      ++report.sent;

      Packet pkt{inj.stream->bytes[inj.color], inj.stream->cfg->size};
      std::string at = inj.stream->ingress;
      std::string from;
      std::size_t hops = 0;
      int reroutes = 0;
      env.now = inj.ts;

      while (true) {
        const LinkCfg* in_link = from.empty() ? nullptr : link_of(from, at);
        env.arrival_loss_prob = in_link ? in_link->loss : 0.0;
        Disposition disp = process_packet(nodes.at(at), pkt, env);
        ++hops;

        for (auto& [scope, op] : disp.executed) {
          (void)scope;
          const auto* entry = kRegistry.find(op);
          ++report.executed[entry ? entry->name : "op" + std::to_string(op)];
        }
        report.unknown_opcodes += disp.unknown_opcodes;
        report.mutation_violations += disp.mutation_violation ? 1 : 0;
        for (auto& rec : disp.exports) report.exports.push_back(std::move(rec));
        if (disp.rerouted && ++reroutes == 2) ++report.multi_reroutes;

        if (disp.kind == Disposition::Kind::Drop) {
          bool inbound =
              disp.cause == DropCause::RandomLoss || disp.cause == DropCause::Malformed;
          std::string where = inbound && !from.empty() ? from + "->" + at : "@" + at;
          ++report.drops[where][to_string(disp.cause)];
          ++stats.dropped[to_string(disp.cause)];
          ++report.dropped;
          ++report.hop_hist[hops];
          break;
        }
        if (disp.kind == Disposition::Kind::Deliver) {
          ++stats.delivered;
          ++report.delivered;
          ++report.hop_hist[hops];
          break;
        }

        const std::string& next = disp.next_node;
        if (const LinkCfg* out = link_of(at, next); out && out->capacity >= 0) {
          if (++link_used[{at, next}] > out->capacity) {
            ++report.drops[at + "->" + next]["capacity"];
            ++stats.dropped["capacity"];
            ++report.dropped;
            ++report.hop_hist[hops];
            break;
          }
        }
        from = at;
        at = next;
      }
    }
  }

  // Final counter flush: the collector learns every node's closing totals.
  for (auto& [id, node] : nodes) {
    std::vector<std::uint32_t> flows;
    flows.reserve(node.amm.size());
    for (auto& [flow, st] : node.amm) flows.push_back(flow);
    std::sort(flows.begin(), flows.end());
    for (std::uint32_t flow : flows) {
      const AmmFlowState& st = node.amm[flow];
      report.amm_counts[id][flow] = {st.count[0], st.count[1]};
      for (int color = 0; color < 2; ++color)
        if (st.count[color])
          report.exports.push_back(
              {id, flow, color, st.count[color], double(sc.options.ticks)});
    }
  }
  return report;
}

}  // namespace mna
