#include <map>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>
#include "mna/actions.hpp"
#include "mna/composer.hpp"
#include "mna/engine.hpp"
#include "stack_gen.hpp"

using namespace mna;

namespace {

struct HopLog {
  std::string node;
  Disposition disp;
};

struct MiniNet {
  std::map<std::string, NodeState> nodes;
  std::set<std::pair<std::string, std::string>> down;
  ActionRegistry reg = ActionRegistry::with_builtins();
  double now = 0;

  NodeState& at(const std::string& id) {
    auto& n = nodes[id];
    if (n.id.empty()) n.id = id;
    return n;
  }

  ProcessEnv env() {
    ProcessEnv e;
    e.now = now;
    e.registry = &reg;
    e.link_up = [this](const std::string& a, const std::string& b) {
      return !down.count({a, b});
    };
    return e;
  }

  // Walks the packet until it stops moving, one node per hop.
  std::vector<HopLog> run(const std::string& ingress, Packet& pkt, std::size_t max_hops = 64) {
    std::vector<HopLog> log;
    std::string where = ingress;
    for (std::size_t i = 0; i < max_hops; ++i) {
      Disposition d = process_packet(at(where), pkt, env());
      log.push_back({where, d});
      if (d.kind != Disposition::Kind::Forward) break;
      where = d.next_node;
    }
    return log;
  }
};

Nas hbh_amm_nas(std::uint32_t flow, bool color) {
  Nas nas;
  nas.initial = FormatB{kOpcodeNoop, 0, Scope::Hbh, 1, 0, false, false, false};
  nas.rest.emplace_back(amm_encode(flow, color, false));
  return nas;
}

}  // namespace

TEST_CASE("engine forwards a composed path end to end") {
  PathSpec path{{{"R1", 101}, {"R2", 102}, {"R3", 103}}, false};
  std::vector<NodeCapabilities> caps = {
      {"R1", 20, 17, 17}, {"R2", 20, 17, 17}, {"R3", 20, 17, 17}};
  std::vector<NasRequest> reqs;
  reqs.push_back({Scope::Hbh, "", {{kOpcodeAmm, amm_encode(9, false, false).data, {}, true}}});
  reqs.push_back({Scope::Select, "R2", {{kOpcodeDummy, 5, {0x12345}}}});
  reqs.push_back({Scope::I2e, "", {{kOpcodeDummy, 0, {}}}});

  LabelStack stack = compose_stack(path, reqs, caps, 8);
  Packet pkt{encode_stack(stack), 1.0};

  MiniNet net;
  net.at("R1").fib[101] = {FibOp::PopForward, "R2", 0, false};
  net.at("R2").fib[102] = {FibOp::PopForward, "R3", 0, false};
  net.at("R3").fib[103] = {FibOp::Deliver, "", 0, false};

  auto log = net.run("R1", pkt);
  REQUIRE(log.size() == 3);
  CHECK(log[0].disp.kind == Disposition::Kind::Forward);
  CHECK(log[0].disp.next_node == "R2");
  CHECK(log[0].disp.popped == 1);
  CHECK(log[1].disp.kind == Disposition::Kind::Forward);
  CHECK(log[1].disp.popped == 2);  // own label plus its select sub-stack
  CHECK(log[2].disp.kind == Disposition::Kind::Deliver);

  // The hop-by-hop measurement counted once per node.
  for (const char* id : {"R1", "R2", "R3"}) CHECK(net.at(id).amm[9].count[0] == 1);

  // The select ran only at its target, the edge-to-edge only at the egress.
  CHECK(net.at("R1").scribble_counter == 0);
  CHECK(net.at("R2").scribble_counter == 1);
  CHECK(net.at("R3").scribble_counter == 1);
  CHECK(pkt.stack.empty());
}

TEST_CASE("engine decrements ttl across hops and copies it down on pop") {
  PathSpec path{{{"R1", 101}, {"R2", 102}, {"R3", 103}}, false};
  std::vector<NodeCapabilities> caps = {
      {"R1", 20, 17, 17}, {"R2", 20, 17, 17}, {"R3", 20, 17, 17}};
  LabelStack stack = compose_stack(path, {}, caps, 8);
  Packet pkt{encode_stack(stack), 1.0};

  MiniNet net;
  net.at("R1").fib[101] = {FibOp::PopForward, "R2", 0, false};
  net.at("R2").fib[102] = {FibOp::PopForward, "R3", 0, false};
  net.at("R3").fib[103] = {FibOp::Deliver, "", 0, false};

  Disposition d1 = process_packet(net.at("R1"), pkt, net.env());
  REQUIRE(d1.kind == Disposition::Kind::Forward);
  ParsedStack after1 = decode_stack(pkt.stack);
  CHECK(std::get<Lse>(after1.stack.entries[0]).ttl == 7);

  Disposition d2 = process_packet(net.at("R2"), pkt, net.env());
  REQUIRE(d2.kind == Disposition::Kind::Forward);
  ParsedStack after2 = decode_stack(pkt.stack);
  CHECK(std::get<Lse>(after2.stack.entries[0]).ttl == 6);
}

TEST_CASE("engine expires ttl on forward but not on deliver") {
  MiniNet net;
  net.at("A").fib[70] = {FibOp::PopForward, "B", 0, false};
  net.at("B").fib[71] = {FibOp::Deliver, "", 0, false};

  LabelStack s1{{Lse{70, 0, false, 1}, Lse{71, 0, false, 1}}};
  finalize_bos(s1);
  Packet p1{encode_stack(s1), 1.0};
  Disposition d = process_packet(net.at("A"), p1, net.env());
  CHECK(d.kind == Disposition::Kind::Drop);
  CHECK(d.cause == DropCause::TtlExpired);

  LabelStack s2{{Lse{70, 0, false, 2}, Lse{71, 0, false, 2}}};
  finalize_bos(s2);
  Packet p2{encode_stack(s2), 1.0};
  auto log = net.run("A", p2);
  REQUIRE(log.size() == 2);
  CHECK(log[1].disp.kind == Disposition::Kind::Deliver);
}

TEST_CASE("engine swap rewrites the label in place") {
  MiniNet net;
  net.at("A").fib[60] = {FibOp::Swap, "B", 61, false};

  LabelStack s{{Lse{60, 0, false, 5}}};
  finalize_bos(s);
  Packet p{encode_stack(s), 1.0};
  Disposition d = process_packet(net.at("A"), p, net.env());
  REQUIRE(d.kind == Disposition::Kind::Forward);
  CHECK(d.popped == 0);
  ParsedStack out = decode_stack(p.stack);
  const Lse& top = std::get<Lse>(out.stack.entries[0]);
  CHECK(top.label == 61);
  CHECK(top.ttl == 4);
}

TEST_CASE("engine drops on missing route and on inbound loss") {
  MiniNet net;
  LabelStack s{{Lse{999, 0, false, 5}}};
  finalize_bos(s);
  Packet p{encode_stack(s), 1.0};
  Disposition d = process_packet(net.at("A"), p, net.env());
  CHECK(d.kind == Disposition::Kind::Drop);
  CHECK(d.cause == DropCause::NoRoute);

  ProcessEnv lossy = net.env();
  lossy.arrival_loss_prob = 1.0;
  Packet p2{encode_stack(s), 1.0};
  Disposition d2 = process_packet(net.at("A"), p2, lossy);
  CHECK(d2.cause == DropCause::RandomLoss);
}

TEST_CASE("engine inbound loss is reproducible per node seed") {
  auto pattern = [](std::uint64_t seed) {
    MiniNet net;
    net.at("A").rng = Rng(seed);
    net.at("A").fib[50] = {FibOp::PopForward, "B", 0, false};
    ProcessEnv env = net.env();
    env.arrival_loss_prob = 0.5;
    std::vector<bool> out;
    for (int i = 0; i < 200; ++i) {
      LabelStack s{{Lse{50, 0, false, 5}}};
      finalize_bos(s);
      Packet p{encode_stack(s), 1.0};
      out.push_back(process_packet(net.at("A"), p, env).kind == Disposition::Kind::Drop);
    }
    return out;
  };
  auto a = pattern(42), b = pattern(42), c = pattern(43);
  CHECK(a == b);
  CHECK(a != c);
  int drops = static_cast<int>(std::count(a.begin(), a.end(), true));
  CHECK(drops > 60);
  CHECK(drops < 140);
}

TEST_CASE("engine dispatches opcodes in entry order, skipping ancillary words") {
  ActionRegistry reg;
  std::vector<std::pair<int, std::uint32_t>> seen;
  reg.add(10, "x", [&](ActionContext&, std::uint32_t data, AdWords ads) {
    seen.emplace_back(10, data);
    CHECK(ads.size() == 1);
    return ActionEffect{};
  });
  reg.add(11, "y", [&](ActionContext&, std::uint32_t data, AdWords ads) {
    seen.emplace_back(11, data);
    CHECK(ads.size() == 1);
    return ActionEffect{};
  });

  Nas nas;
  nas.initial = FormatB{10, 0x155, Scope::Hbh, 3, 1, false, false, false};
  nas.rest.emplace_back(FormatD{7, false});
  FormatC c;
  c.opcode = 11;
  c.data = 0xBEEF;
  c.nal = 1;
  nas.rest.emplace_back(c);
  nas.rest.emplace_back(FormatD{9, false});

  LabelStack s{{Lse{50, 0, false, 5}, nas}};
  finalize_bos(s);
  Packet p{encode_stack(s), 1.0};

  MiniNet net;
  net.reg = std::move(reg);
  net.at("A").fib[50] = {FibOp::PopForward, "B", 0, false};
  Disposition d = process_packet(net.at("A"), p, net.env());
  REQUIRE(d.kind == Disposition::Kind::Forward);
  CHECK(d.unknown_opcodes == 0);
  REQUIRE(seen.size() == 2);
  CHECK(seen[0] == std::pair<int, std::uint32_t>{10, 0x155});
  CHECK(seen[1] == std::pair<int, std::uint32_t>{11, 0xBEEF});
}

TEST_CASE("engine skips unknown opcodes unless the sub-stack demands a drop") {
  Nas nas;
  nas.initial = FormatB{77, 3, Scope::Hbh, 0, 0, false, false, false};
  LabelStack s{{Lse{50, 0, false, 5}, Lse{51, 0, false, 5}, nas}};
  finalize_bos(s);

  MiniNet net;
  net.at("A").fib[50] = {FibOp::PopForward, "B", 0, false};

  Packet p{encode_stack(s), 1.0};
  Disposition d = process_packet(net.at("A"), p, net.env());
  CHECK(d.kind == Disposition::Kind::Forward);
  CHECK(d.unknown_opcodes == 1);

  std::get<Nas>(s.entries[2]).initial.u = true;
  Packet p2{encode_stack(s), 1.0};
  Disposition d2 = process_packet(net.at("A"), p2, net.env());
  CHECK(d2.kind == Disposition::Kind::Drop);
  CHECK(d2.cause == DropCause::Malformed);
}

TEST_CASE("engine drops malformed stacks but stays blind beyond its depth") {
  // Sub-stack whose nal chain promises more words than exist.
  std::vector<std::uint8_t> bytes;
  testgen::push_word(bytes, testgen::ref_fwd(50, 0, false, 9));
  testgen::push_word(bytes, testgen::ref_fwd(4, 0, false, 9));
  testgen::push_word(bytes, testgen::ref_b(2, 0, 1, 3, 3, false, false, false));
  testgen::push_word(bytes, testgen::ref_d(1, true));

  MiniNet net;
  net.at("A").fib[50] = {FibOp::PopForward, "B", 0, false};

  Packet p{bytes, 1.0};
  Disposition d = process_packet(net.at("A"), p, net.env());
  CHECK(d.kind == Disposition::Kind::Drop);
  CHECK(d.cause == DropCause::Malformed);

  // With depth 1 the node never sees the damage and forwards the tail as-is.
  net.at("A").rld = 1;
  Packet p2{bytes, 1.0};
  Disposition d2 = process_packet(net.at("A"), p2, net.env());
  REQUIRE(d2.kind == Disposition::Kind::Forward);
  CHECK(std::vector<std::uint8_t>(p2.stack.end() - 12, p2.stack.end()) ==
        std::vector<std::uint8_t>(bytes.end() - 12, bytes.end()));
}

TEST_CASE("engine charges meters and drops past the configured rate") {
  Nas nas;
  nas.initial = FormatB{kOpcodeNrp, 5, Scope::Hbh, 0, 0, false, false, false};
  LabelStack s{{Lse{50, 0, false, 5}, Lse{51, 0, false, 5}, nas}};
  finalize_bos(s);
  std::vector<std::uint8_t> bytes = encode_stack(s);

  MiniNet net;
  net.at("A").fib[50] = {FibOp::PopForward, "B", 0, false};
  net.at("A").meters.enabled = true;
  net.at("A").meters.by_selector.emplace(5, TokenBucket::make(0, 1));

  Packet p1{bytes, 1.0};
  CHECK(process_packet(net.at("A"), p1, net.env()).kind == Disposition::Kind::Forward);
  Packet p2{bytes, 1.0};
  Disposition d2 = process_packet(net.at("A"), p2, net.env());
  CHECK(d2.kind == Disposition::Kind::Drop);
  CHECK(d2.cause == DropCause::MeterExceeded);

  net.at("A").meters.enabled = false;
  Packet p3{bytes, 1.0};
  CHECK(process_packet(net.at("A"), p3, net.env()).kind == Disposition::Kind::Forward);
}

TEST_CASE("engine surfaces measurement exports on color flips") {
  MiniNet net;
  net.at("A").fib[50] = {FibOp::PopForward, "B", 0, false};

  int flips[] = {0, 0, 1, 1, 0};
  std::vector<ExportRecord> exports;
  for (int i = 0; i < 5; ++i) {
    LabelStack s{{Lse{50, 0, false, 5}, Lse{51, 0, false, 5}, hbh_amm_nas(9, flips[i] != 0)}};
    finalize_bos(s);
    Packet p{encode_stack(s), 1.0};
    net.now = i;
    Disposition d = process_packet(net.at("A"), p, net.env());
    REQUIRE(d.kind == Disposition::Kind::Forward);
    for (auto& r : d.exports) exports.push_back(r);
  }
  REQUIRE(exports.size() == 2);
  CHECK(exports[0] == ExportRecord{"A", 9, 0, 2, 2.0});
  CHECK(exports[1] == ExportRecord{"A", 9, 1, 2, 4.0});
  CHECK(net.at("A").amm[9].count[0] == 3);
  CHECK(net.at("A").amm[9].count[1] == 2);
}

TEST_CASE("engine lets actions rewrite only the rewritable ancillary bits") {
  Nas nas;
  nas.initial = FormatB{kOpcodeDummy, 0, Scope::Hbh, 2, 2, false, false, false};
  nas.rest.emplace_back(FormatD{0x2AAAAAAA, false});
  nas.rest.emplace_back(FormatD{0x15555555, false});
  LabelStack s{{Lse{50, 0, false, 5}, Lse{51, 0, false, 5}, nas}};
  finalize_bos(s);

  MiniNet net;
  net.at("A").fib[50] = {FibOp::PopForward, "B", 0, false};
  Packet p{encode_stack(s), 1.0};
  Disposition d = process_packet(net.at("A"), p, net.env());
  REQUIRE(d.kind == Disposition::Kind::Forward);
  CHECK(!d.mutation_violation);
  CHECK(net.at("A").scribble_counter == 2);

  ParsedStack out = decode_stack(p.stack);
  const Nas& got = std::get<Nas>(out.stack.entries[1]);
  std::uint32_t d0 = std::get<FormatD>(got.rest[0]).data;
  std::uint32_t d1 = std::get<FormatD>(got.rest[1]).data;
  CHECK((d0 & ~0x7FFu) == (0x2AAAAAAAu & ~0x7FFu));
  CHECK((d1 & ~0x7FFu) == (0x15555555u & ~0x7FFu));
  CHECK(d0 == ((0x2AAAAAAAu & ~0x7FFu) | ((1 * 2654435761u + 0) & 0x7FF)));
  CHECK(d1 == ((0x15555555u & ~0x7FFu) | ((2 * 2654435761u + 1) & 0x7FF)));
}

TEST_CASE("engine protection reroutes once and refuses a second detour") {
  MiniNet net;
  net.at("R1").fib[101] = {FibOp::PopForward, "R2", 0, false};
  net.at("R2").fib[102] = {FibOp::PopForward, "R3", 0, false};
  net.at("R2").fib[212] = {FibOp::PopForward, "R3", 0, false};
  net.at("R3").fib[103] = {FibOp::Deliver, "", 0, false};
  net.at("R5").fib[205] = {FibOp::PopForward, "R6", 0, false};
  net.at("R6").fib[206] = {FibOp::PopForward, "R3", 0, false};
  net.at("R2").frr["R3"] = {{205, 206}, "R5", true};
  net.at("R6").frr["R3"] = {{212}, "R2", true};
  net.down = {{"R2", "R3"}, {"R6", "R3"}};

  auto make_packet = [](std::uint8_t ttl) {
    LabelStack s{{Lse{101, 0, false, ttl}, Lse{102, 0, false, ttl}, Lse{103, 0, false, ttl}}};
    finalize_bos(s);
    return Packet{encode_stack(s), 1.0};
  };

  SUBCASE("marked packets die at the second failure") {
    Packet p = make_packet(10);
    auto log = net.run("R1", p);
    REQUIRE(log.size() == 4);
    CHECK(log[0].node == "R1");
    CHECK(log[1].node == "R2");
    CHECK(log[1].disp.rerouted);
    CHECK(log[2].node == "R5");
    CHECK(log[2].disp.reroute_marked);
    CHECK(log[3].node == "R6");
    CHECK(log[3].disp.kind == Disposition::Kind::Drop);
    CHECK(log[3].disp.cause == DropCause::RerouteLoop);
  }

  SUBCASE("without the marker the packet loops until ttl runs out") {
    net.at("R2").frr["R3"].marked = false;
    net.at("R6").frr["R3"].marked = false;
    for (std::uint8_t ttl : {std::uint8_t(6), std::uint8_t(9)}) {
      Packet p = make_packet(ttl);
      auto log = net.run("R1", p, 64);
      CHECK(log.size() == ttl);
      CHECK(log.back().disp.kind == Disposition::Kind::Drop);
      CHECK(log.back().disp.cause == DropCause::TtlExpired);
    }
  }
}

TEST_CASE("engine penultimate pop hands the egress a label-less block") {
  PathSpec path{{{"R1", 101}, {"R2", 102}, {"R3", 103}}, true};
  std::vector<NodeCapabilities> caps = {
      {"R1", 20, 17, 17}, {"R2", 20, 17, 17}, {"R3", 20, 17, 17}};
  std::vector<NasRequest> reqs;
  reqs.push_back({Scope::Select, "R3", {{kOpcodeDummy, 5, {0xABC}}}});
  reqs.push_back({Scope::I2e, "", {{kOpcodeDummy, 0, {}}}});
  LabelStack stack = compose_stack(path, reqs, caps, 8);

  MiniNet net;
  net.at("R1").fib[101] = {FibOp::PopForward, "R2", 0, false};
  net.at("R2").fib[102] = {FibOp::PopForward, "R3", 0, true};

  Packet p{encode_stack(stack), 1.0};
  auto log = net.run("R1", p);
  REQUIRE(log.size() == 3);
  CHECK(log[1].disp.popped == 2);
  CHECK(log[2].disp.kind == Disposition::Kind::Deliver);
  CHECK(net.at("R3").scribble_counter == 2);
  CHECK(p.stack.empty());
}
