#include "mna/report.hpp"

#include <cstdio>

#include <json.hpp>

namespace mna {

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string report_json(const SimReport& r, int indent) {
  nlohmann::json j;
  j["schema"] = 1;
  j["ticks"] = r.ticks;
  j["totals"] = {{"sent", r.sent}, {"delivered", r.delivered}, {"dropped", r.dropped}};

  j["streams"] = nlohmann::json::array();
  for (const auto& s : r.streams)
    j["streams"].push_back({{"name", s.name},
                            {"sent", s.sent},
                            {"delivered", s.delivered},
                            {"dropped", s.dropped},
                            {"loss_rate", s.loss_rate()}});

  j["drops"] = r.drops;

  j["amm"] = nlohmann::json::object();
  for (const auto& [node, flows] : r.amm_counts)
    for (const auto& [flow, counts] : flows)
      j["amm"][node][std::to_string(flow)] = {counts[0], counts[1]};

  j["exports"] = nlohmann::json::array();
  for (const auto& e : r.exports)
    j["exports"].push_back({{"node", e.node_id},
                            {"flow", e.flow_id},
                            {"color", e.color},
                            {"count", e.counter},
                            {"ts", e.timestamp}});

  j["executed"] = r.executed;

  j["hop_histogram"] = nlohmann::json::object();
  for (const auto& [hops, n] : r.hop_hist) j["hop_histogram"][std::to_string(hops)] = n;

  j["paths"] = nlohmann::json::object();
  for (const auto& [name, nodes] : r.path_nodes) {
    j["paths"][name]["nodes"] = nodes;
    auto fit = r.path_flows.find(name);
    j["paths"][name]["flows"] =
        fit == r.path_flows.end() ? std::vector<std::uint32_t>{} : fit->second;
  }

  j["anomalies"] = {{"mutation_violations", r.mutation_violations},
                    {"unknown_opcodes", r.unknown_opcodes},
                    {"multi_reroutes", r.multi_reroutes}};
  return j.dump(indent);
}

std::string summary_table(const SimReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %12s %12s %12s %8s\n", "stream", "sent", "delivered",
                "dropped", "loss");
  out += line;
  for (const auto& s : r.streams) {
    std::snprintf(line, sizeof line, "%-16s %12llu %12llu %12llu %8s\n", s.name.c_str(),
                  (unsigned long long)s.sent, (unsigned long long)s.delivered,
                  (unsigned long long)s.dropped_total(), fixed4(s.loss_rate()).c_str());
    out += line;
  }

  for (const auto& [path, flows] : r.path_flows) {
    auto nit = r.path_nodes.find(path);
    if (nit == r.path_nodes.end()) continue;
    const auto& nodes = nit->second;
    for (std::uint32_t flow : flows) {
      Collector col;
      for (const auto& e : r.exports) col.ingest(e);
      std::vector<LinkLoss> loss;
      try {
        loss = col.link_loss(nodes, flow);
      } catch (const std::out_of_range&) {
        continue;  // flow never counted anywhere
      }
      out += "\npath " + path + " flow " + std::to_string(flow) + " measured loss:\n";
      for (std::size_t i = 0; i < loss.size(); ++i) {
        std::snprintf(line, sizeof line, "  %-6s -> %-6s lost %12llu  rate %8s\n",
                      nodes[i].c_str(), nodes[i + 1].c_str(),
                      (unsigned long long)loss[i].delta, fixed4(loss[i].rate).c_str());
        out += line;
      }
    }
  }
  return out;
}

}  // namespace mna
