#include "mna/scenario.hpp"

#include <cstdlib>
#include <istream>
#include <sstream>

namespace mna {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
  const char* p = s.c_str();
  char* end = nullptr;
  errno = 0;
  unsigned long long v = std::strtoull(p, &end, 0);
  if (end == p || *end || errno)
    throw ScenarioError("expected a number, got '" + s + "'", line);
  return v;
}

double parse_f64(const std::string& s, std::size_t line) {
  const char* p = s.c_str();
  char* end = nullptr;
  double v = std::strtod(p, &end);
  if (end == p || *end)
    throw ScenarioError("expected a number, got '" + s + "'", line);
  return v;
}

bool parse_bool(const std::string& s, std::size_t line) {
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw ScenarioError("expected on/off, got '" + s + "'", line);
}

// "node:label"
TunnelHop parse_hop(const std::string& tok, std::size_t line) {
  auto colon = tok.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
    throw ScenarioError("expected node:label, got '" + tok + "'", line);
  std::uint64_t label = parse_u64(tok.substr(colon + 1), line);
  if (label > wire::mask(wire::kFwdLabelBits)) throw ScenarioError("label out of range in '" + tok + "'", line);
  return {tok.substr(0, colon), std::uint32_t(label)};
}

// "key=value" or a bare flag. Returns (key, value-or-empty).
std::pair<std::string, std::string> split_attr(const std::string& tok) {
  auto eq = tok.find('=');
  if (eq == std::string::npos) return {tok, ""};
  return {tok.substr(0, eq), tok.substr(eq + 1)};
}

// "name" or "name(k=v,k=v,flag)". No spaces inside the token.
ActionSpec parse_action(const std::string& tok, std::size_t line) {
  std::string name = tok;
  std::vector<std::pair<std::string, std::string>> args;
  if (auto open = tok.find('('); open != std::string::npos) {
    if (tok.back() != ')') throw ScenarioError("unterminated action '" + tok + "'", line);
    name = tok.substr(0, open);
    std::string body = tok.substr(open + 1, tok.size() - open - 2);
    std::string item;
    std::istringstream ss(body);
    while (std::getline(ss, item, ','))
      if (!item.empty()) args.push_back(split_attr(item));
  }
  auto arg = [&](const char* key) -> const std::string* {
    for (auto& [k, v] : args)
      if (k == key) return &v;
    return nullptr;
  };
  auto num = [&](const char* key, std::uint64_t fallback) {
    const std::string* v = arg(key);
    return v ? parse_u64(*v, line) : fallback;
  };
  auto ads_of = [&] {
    std::vector<std::uint32_t> ads;
    for (std::uint64_t i = 0, n = num("ads", 0); i < n; ++i)
      ads.push_back(std::uint32_t(i + 1));
    return ads;
  };

  ActionSpec spec;
  if (name == "noop") {
    spec = {kOpcodeNoop, 0, {}, false};
  } else if (name == "nffrr") {
    spec = {kOpcodeNffrr, std::uint32_t(num("data", 1)), {}, false};
  } else if (name == "amm") {
    FormatC c = amm_encode(std::uint32_t(num("flow", 0)), num("l", 0) != 0, num("d", 0) != 0);
    spec = {kOpcodeAmm, c.data, {}, true};
  } else if (name == "nrp") {
    spec = {kOpcodeNrp, std::uint32_t(num("sel", 0)), {}, false};
  } else if (name == "dummy") {
    spec = {kOpcodeDummy, std::uint32_t(num("data", 0)), ads_of(), arg("wide") != nullptr};
  } else if (name == "op") {
    if (!arg("code")) throw ScenarioError("op(...) needs code=", line);
    spec = {std::uint8_t(num("code", 0)), std::uint32_t(num("data", 0)), ads_of(),
            arg("wide") != nullptr};
  } else {
    throw ScenarioError("unknown action '" + name + "'", line);
  }
  return spec;
}

// "hbh", "i2e", "select" or "select:NODE"
void parse_scope(const std::string& tok, NasRequest& req, std::size_t line) {
  if (tok == "hbh") {
    req.scope = Scope::Hbh;
  } else if (tok == "i2e") {
    req.scope = Scope::I2e;
  } else if (tok == "select") {
    req.scope = Scope::Select;
  } else if (tok.rfind("select:", 0) == 0) {
    req.scope = Scope::Select;
    req.select_target = tok.substr(7);
  } else {
    throw ScenarioError("expected hbh, i2e or select[:NODE], got '" + tok + "'", line);
  }
}

NodeCfg parse_node_line(const std::vector<std::string>& t, std::size_t line) {
  if (t.size() < 2) throw ScenarioError("expected: ID RLD [max_select=N] [max_hbh=N]", line);
  NodeCfg n;
  n.id = t[0];
  n.rld = unsigned(parse_u64(t[1], line));
  for (std::size_t i = 2; i < t.size(); ++i) {
    auto [k, v] = split_attr(t[i]);
    if (k == "max_select")
      n.max_select_nas = unsigned(parse_u64(v, line));
    else if (k == "max_hbh")
      n.max_hbh_nas = unsigned(parse_u64(v, line));
    else
      throw ScenarioError("unknown node attribute '" + k + "'", line);
  }
  return n;
}

PathSpec parse_path_hops(const std::vector<std::string>& t, std::size_t first, std::size_t line) {
  PathSpec spec;
  std::size_t i = first;
  if (i < t.size() && t[i] == "php") {
    spec.php = true;
    ++i;
  }
  for (; i < t.size(); ++i) {
    TunnelHop h = parse_hop(t[i], line);
    spec.hops.push_back({h.node, h.label});
  }
  if (spec.hops.empty()) throw ScenarioError("path has no hops", line);
  return spec;
}

struct LineReader {
  std::istream& in;
  std::size_t line = 0;

  bool next(std::string& out) {
    std::string raw;
    while (std::getline(in, raw)) {
      ++line;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      auto b = raw.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      auto e = raw.find_last_not_of(" \t\r");
      out = raw.substr(b, e - b + 1);
      return true;
    }
    return false;
  }
};

}  // namespace

Scenario parse_scenario(std::istream& in) {
  Scenario sc;
  LineReader rd{in};
  std::string section, text;
  while (rd.next(text)) {
    std::size_t ln = rd.line;
    if (text.front() == '[') {
      if (text.back() != ']') throw ScenarioError("unterminated section header", ln);
      section = text.substr(1, text.size() - 2);
      static const char* known[] = {"options", "nodes", "links",   "tunnels",
                                    "paths",   "requests", "streams", "nrps"};
      if (std::find_if(std::begin(known), std::end(known),
                       [&](const char* k) { return section == k; }) == std::end(known))
        throw ScenarioError("unknown section [" + section + "]", ln);
      continue;
    }
    std::vector<std::string> t = tokenize(text);
    if (section == "options") {
      // KEY VALUE or KEY = VALUE
      if (t.size() == 3 && t[1] == "=") t.erase(t.begin() + 1);
      if (t.size() != 2) throw ScenarioError("expected: KEY VALUE", ln);
      const std::string& k = t[0];
      const std::string& v = t[1];
      if (k == "seed")
        sc.options.seed = parse_u64(v, ln);
      else if (k == "ticks")
        sc.options.ticks = parse_u64(v, ln);
      else if (k == "ttl")
        sc.options.ttl = std::uint8_t(parse_u64(v, ln));
      else if (k == "meters")
        sc.options.meters = parse_bool(v, ln);
      else if (k == "protection")
        sc.options.protection = parse_bool(v, ln);
      else if (k == "decode")
        sc.options.decode = v == "lenient"  ? DecodeMode::Lenient
                            : v == "strict" ? DecodeMode::Strict
                                            : throw ScenarioError(
                                                  "decode must be strict or lenient", ln);
      else
        throw ScenarioError("unknown option '" + k + "'", ln);
    } else if (section == "nodes") {
      sc.nodes.push_back(parse_node_line(t, ln));
    } else if (section == "links") {
      if (t.size() < 2) throw ScenarioError("expected: FROM TO [loss=P] [capacity=N] [down]", ln);
      LinkCfg l;
      l.from = t[0];
      l.to = t[1];
      for (std::size_t i = 2; i < t.size(); ++i) {
        auto [k, v] = split_attr(t[i]);
        if (k == "loss")
          l.loss = parse_f64(v, ln);
        else if (k == "capacity")
          l.capacity = (long long)(parse_u64(v, ln));
        else if (k == "down")
          l.up = false;
        else
          throw ScenarioError("unknown link attribute '" + k + "'", ln);
      }
      if (l.loss < 0 || l.loss > 1) throw ScenarioError("loss outside [0,1]", ln);
      sc.links.push_back(std::move(l));
    } else if (section == "tunnels") {
      if (t.size() < 3 || t.size() > 4)
        throw ScenarioError("expected: NODE NEXT hop:label[,hop:label...] [unmarked]", ln);
      TunnelCfg tc;
      tc.node = t[0];
      tc.protects = t[1];
      std::istringstream hops(t[2]);
      std::string hop;
      while (std::getline(hops, hop, ','))
        if (!hop.empty()) tc.via.push_back(parse_hop(hop, ln));
      if (tc.via.empty()) throw ScenarioError("tunnel has no hops", ln);
      if (t.size() == 4) {
        if (t[3] != "unmarked") throw ScenarioError("unknown tunnel attribute '" + t[3] + "'", ln);
        tc.marked = false;
      }
      sc.tunnels.push_back(std::move(tc));
    } else if (section == "paths") {
      if (t.size() < 2) throw ScenarioError("expected: NAME [php] node:label ...", ln);
      PathCfg p;
      p.name = t[0];
      p.spec = parse_path_hops(t, 1, ln);
      sc.paths.push_back(std::move(p));
    } else if (section == "requests") {
      if (t.size() < 3) throw ScenarioError("expected: PATH SCOPE ACTION ...", ln);
      RequestCfg r;
      r.path = t[0];
      parse_scope(t[1], r.request, ln);
      for (std::size_t i = 2; i < t.size(); ++i)
        r.request.actions.push_back(parse_action(t[i], ln));
      sc.requests.push_back(std::move(r));
    } else if (section == "streams") {
      if (t.size() < 2) throw ScenarioError("expected: NAME PATH [rate=N] ...", ln);
      StreamCfg s;
      s.name = t[0];
      s.path = t[1];
      for (std::size_t i = 2; i < t.size(); ++i) {
        auto [k, v] = split_attr(t[i]);
        if (k == "rate")
          s.rate = unsigned(parse_u64(v, ln));
        else if (k == "size")
          s.size = parse_f64(v, ln);
        else if (k == "count")
          s.count = parse_u64(v, ln);
        else if (k == "start")
          s.start = unsigned(parse_u64(v, ln));
        else if (k == "flow")
          s.flow = std::uint32_t(parse_u64(v, ln));
        else if (k == "period")
          s.period = parse_u64(v, ln);
        else
          throw ScenarioError("unknown stream attribute '" + k + "'", ln);
      }
      sc.streams.push_back(std::move(s));
    } else if (section == "nrps") {
      if (t.size() != 4) throw ScenarioError("expected: NODE SELECTOR|fallback RATE BURST", ln);
      NrpCfg m;
      m.node = t[0];
      if (t[1] == "fallback")
        m.fallback = true;
      else
        m.selector = std::uint32_t(parse_u64(t[1], ln));
      m.rate = parse_f64(t[2], ln);
      m.burst = parse_f64(t[3], ln);
      sc.nrps.push_back(std::move(m));
    } else {
      throw ScenarioError("content before any section header", ln);
    }
  }
  return sc;
}

Scenario parse_scenario_text(const std::string& text) {
  std::istringstream ss(text);
  return parse_scenario(ss);
}

StackFile parse_stack_file(std::istream& in) {
  StackFile sf;
  LabelStack stack;
  bool have_stack = false;
  LineReader rd{in};
  std::string section, text;
  while (rd.next(text)) {
    std::size_t ln = rd.line;
    if (text.front() == '[') {
      if (text.back() != ']') throw ScenarioError("unterminated section header", ln);
      section = text.substr(1, text.size() - 2);
      if (section != "stack" && section != "path" && section != "nodes" &&
          section != "requests" && section != "options")
        throw ScenarioError("unknown section [" + section + "]", ln);
      continue;
    }
    std::vector<std::string> t = tokenize(text);
    if (section == "stack") {
      have_stack = true;
      if (t[0] == "label") {
        if (t.size() < 2) throw ScenarioError("expected: label N [ttl=T] [tc=C]", ln);
        Lse lse;
        std::uint64_t label = parse_u64(t[1], ln);
        if (label > wire::mask(wire::kFwdLabelBits)) throw ScenarioError("label out of range", ln);
        lse.label = std::uint32_t(label);
        lse.ttl = 64;
        for (std::size_t i = 2; i < t.size(); ++i) {
          auto [k, v] = split_attr(t[i]);
          if (k == "ttl")
            lse.ttl = std::uint8_t(parse_u64(v, ln));
          else if (k == "tc")
            lse.tc = std::uint8_t(parse_u64(v, ln));
          else
            throw ScenarioError("unknown label attribute '" + k + "'", ln);
        }
        stack.entries.emplace_back(lse);
      } else if (t[0] == "nas") {
        if (t.size() < 3) throw ScenarioError("expected: nas SCOPE ACTION ...", ln);
        NasRequest req;
        parse_scope(t[1], req, ln);
        for (std::size_t i = 2; i < t.size(); ++i)
          req.actions.push_back(parse_action(t[i], ln));
        try {
          stack.entries.emplace_back(build_nas(req));
        } catch (const ComposeError& e) {
          throw ScenarioError(e.what(), ln);
        }
      } else {
        throw ScenarioError("expected 'label' or 'nas', got '" + t[0] + "'", ln);
      }
    } else if (section == "path") {
      if (sf.path) throw ScenarioError("second path line", ln);
      sf.path = parse_path_hops(t, 0, ln);
    } else if (section == "nodes") {
      NodeCfg n = parse_node_line(t, ln);
      sf.nodes.push_back({n.id, n.rld, n.max_select_nas, n.max_hbh_nas});
    } else if (section == "requests") {
      if (t.size() < 2) throw ScenarioError("expected: SCOPE ACTION ...", ln);
      NasRequest req;
      parse_scope(t[0], req, ln);
      for (std::size_t i = 1; i < t.size(); ++i)
        req.actions.push_back(parse_action(t[i], ln));
      sf.requests.push_back(std::move(req));
    } else if (section == "options") {
      if (t.size() == 3 && t[1] == "=") t.erase(t.begin() + 1);
      if (t.size() != 2 || t[0] != "ttl") throw ScenarioError("expected: ttl N", ln);
      sf.ttl = std::uint8_t(parse_u64(t[1], ln));
    } else {
      throw ScenarioError("content before any section header", ln);
    }
  }
  if (have_stack) sf.stack = std::move(stack);
  return sf;
}

StackFile parse_stack_file_text(const std::string& text) {
  std::istringstream ss(text);
  return parse_stack_file(ss);
}

LabelStack realize_stack(const StackFile& sf) {
  if (sf.stack) {
    LabelStack out = *sf.stack;
    if (out.entries.empty()) throw ScenarioError("empty stack");
    finalize_bos(out);
    return out;
  }
  if (!sf.path) throw ScenarioError("file has neither [stack] nor [path]");
  std::vector<NodeCapabilities> caps = sf.nodes;
  try {
    return compose_stack(*sf.path, sf.requests, caps, sf.ttl);
  } catch (const ComposeError& e) {
    throw ScenarioError(e.what());
  }
}

}  // namespace mna
