#include "mna/codec.hpp"

#include <doctest.h>

#include <algorithm>

#include "mna/hex.hpp"
#include "mna/rng.hpp"
#include "stack_gen.hpp"

using namespace mna;

namespace {

LabelStack plain_labels(std::initializer_list<std::uint32_t> labels, std::uint8_t ttl = 64) {
  LabelStack s;
  for (std::uint32_t l : labels) s.entries.emplace_back(Lse{l, 0, false, ttl});
  finalize_bos(s);
  return s;
}

Nas strip_mutable(Nas nas) {
  nas.indicator.ttl = 0;
  for (auto& e : nas.rest) {
    if (auto* c = std::get_if<FormatC>(&e)) c->data &= ~0x7Fu;
    if (auto* d = std::get_if<FormatD>(&e)) d->data &= ~0x7FFu;
  }
  return nas;
}

}  // namespace

TEST_CASE("single bottom-of-stack word matches the frozen wire value") {
  LabelStack s;
  s.entries.emplace_back(Lse{0, 0, true, 0});
  auto bytes = encode_stack(s);
  REQUIRE(bytes.size() == 4);
  CHECK(to_hex(bytes) == "00000100");
  CHECK(pack_word(Lse{0, 0, true, 0}) == 0x00000100u);
}

TEST_CASE("word packers agree with the reference encoder on random entries") {
  Rng rng(0xC0DEC);
  for (int i = 0; i < 2000; ++i) {
    auto stack = testgen::random_stack(rng);
    auto ref = testgen::ref_encode(stack);
    CHECK(encode_stack(stack) == ref);
  }
}

TEST_CASE("minimal sub-stack below one label is three words with the indicator label") {
  LabelStack s;
  s.entries.emplace_back(Lse{100, 0, false, 64});
  Nas nas;
  nas.initial.opcode = 9;
  nas.initial.scope = Scope::Hbh;
  s.entries.emplace_back(nas);
  finalize_bos(s);

  auto bytes = encode_stack(s);
  REQUIRE(bytes.size() == 12);
  std::uint32_t indicator = std::uint32_t(bytes[4]) << 24 | std::uint32_t(bytes[5]) << 16 |
                            std::uint32_t(bytes[6]) << 8 | bytes[7];
  CHECK((indicator >> 12) == wire::kNasIndicatorLabel);

  auto parsed = decode_stack(bytes);
  CHECK(parsed.stack == s);
  CHECK(parsed.consumed_lse_count == 3);
  CHECK(!parsed.truncated);
}

TEST_CASE("nal chain drives the C/D classification of the tail") {
  // Initial opcode with one AD, then an opcode with one AD, then a bare
  // opcode: tail reads D, C, D, C.
  Nas nas;
  nas.initial.opcode = 3;
  nas.initial.scope = Scope::Hbh;
  nas.initial.nal = 1;
  nas.rest.emplace_back(FormatD{0x2AAAAAAA, false});
  FormatC c1;
  c1.opcode = 7;
  c1.data = 0x12345;
  c1.nal = 1;
  nas.rest.emplace_back(c1);
  nas.rest.emplace_back(FormatD{0x15555555, false});
  FormatC c2;
  c2.opcode = 11;
  c2.data = 0xFFFFF;
  nas.rest.emplace_back(c2);
  nas.initial.nasl = 4;

  LabelStack s;
  s.entries.emplace_back(Lse{777, 0, false, 32});
  s.entries.emplace_back(nas);
  finalize_bos(s);

  auto parsed = decode_stack(testgen::ref_encode(s));
  REQUIRE(parsed.stack.entries.size() == 2);
  const auto& got = std::get<Nas>(parsed.stack.entries[1]);
  REQUIRE(got.rest.size() == 4);
  CHECK(std::holds_alternative<FormatD>(got.rest[0]));
  CHECK(std::holds_alternative<FormatC>(got.rest[1]));
  CHECK(std::holds_alternative<FormatD>(got.rest[2]));
  CHECK(std::holds_alternative<FormatC>(got.rest[3]));
  CHECK(parsed.stack == s);
}

TEST_CASE("roundtrip holds over generated stacks") {
  Rng rng(0x5EED);
  for (int i = 0; i < 2000; ++i) {
    auto stack = testgen::random_stack(rng);
    auto parsed = decode_stack(encode_stack(stack));
    CHECK(parsed.stack == stack);
    CHECK(!parsed.truncated);
    CHECK(parsed.consumed_lse_count == stack.lse_count());
  }
}

TEST_CASE("encoded length is predictable from the entry list") {
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    auto stack = testgen::random_stack(rng);
    CHECK(encode_stack(stack).size() == 4 * stack.lse_count());
  }
}

TEST_CASE("depth limit truncates the walk") {
  auto s = plain_labels({100, 200, 300, 400, 500, 600});
  auto bytes = encode_stack(s);
  auto parsed = decode_stack(bytes, 3);
  CHECK(parsed.truncated);
  CHECK(parsed.consumed_lse_count == 3);
  REQUIRE(parsed.stack.entries.size() == 3);
  CHECK(std::get<Lse>(parsed.stack.entries[2]).label == 300);

  // Depth limit landing inside a sub-stack hides the partial sub-stack but
  // still accounts for the words in front of the cut.
  LabelStack t;
  t.entries.emplace_back(Lse{100, 0, false, 64});
  Nas nas;
  nas.initial.nal = 1;
  nas.rest.emplace_back(FormatD{123, false});
  nas.initial.nasl = 1;
  t.entries.emplace_back(nas);
  finalize_bos(t);
  auto cut = decode_stack(encode_stack(t), 2);
  CHECK(cut.truncated);
  CHECK(cut.consumed_lse_count == 2);
  CHECK(cut.stack.entries.size() == 1);
}

TEST_CASE("strict decode rejects structural damage") {
  // nal chain runs past nasl
  Nas nas;
  nas.initial.nal = 2;
  nas.rest.emplace_back(FormatD{1, false});
  nas.initial.nasl = 1;  // one AD missing
  LabelStack s;
  s.entries.emplace_back(Lse{55, 0, false, 9});
  s.entries.emplace_back(nas);
  finalize_bos(s);
  auto bytes = testgen::ref_encode(s);
  CHECK_THROWS_AS(decode_stack(bytes), CodecError);

  // bottom of stack before the promised sub-stack length
  Nas nas2;
  nas2.initial.nasl = 2;
  nas2.initial.nal = 2;
  nas2.rest.emplace_back(FormatD{1, false});
  nas2.rest.emplace_back(FormatD{2, false});
  LabelStack s2;
  s2.entries.emplace_back(nas2);
  finalize_bos(s2);
  auto bytes2 = testgen::ref_encode(s2);
  bytes2.resize(bytes2.size() - 4);  // drop the final AD word
  CHECK_THROWS_AS(decode_stack(bytes2), CodecError);

  // garbage after bottom of stack
  auto bytes3 = encode_stack(plain_labels({100}));
  testgen::push_word(bytes3, 0xDEADBEEF);
  bool threw = false;
  try {
    decode_stack(bytes3);
  } catch (const CodecError& e) {
    threw = true;
    CHECK(e.kind == CodecError::Kind::TrailingGarbage);
  }
  CHECK(threw);

  // lenient mode reports instead of throwing
  auto lenient = decode_stack(bytes3, kNoRldLimit, DecodeMode::Lenient);
  CHECK(!lenient.warnings.empty());
}

TEST_CASE("encode validates structure") {
  // bos in the middle
  LabelStack s = plain_labels({1000, 2000});
  std::get<Lse>(s.entries[0]).bos = true;
  CHECK_THROWS_AS(encode_stack(s), CodecError);

  // no bos at all
  LabelStack s2;
  s2.entries.emplace_back(Lse{1000, 0, false, 64});
  CHECK_THROWS_AS(encode_stack(s2), CodecError);

  // i2e not last
  LabelStack s3;
  s3.entries.emplace_back(Lse{1000, 0, false, 64});
  Nas i2e;
  i2e.initial.scope = Scope::I2e;
  s3.entries.emplace_back(i2e);
  s3.entries.emplace_back(Lse{2000, 0, false, 64});
  finalize_bos(s3);
  CHECK_THROWS_AS(encode_stack(s3), CodecError);

  // two select sub-stacks below one label
  LabelStack s4;
  s4.entries.emplace_back(Lse{1000, 0, false, 64});
  Nas sel;
  sel.initial.scope = Scope::Select;
  s4.entries.emplace_back(sel);
  s4.entries.emplace_back(sel);
  finalize_bos(s4);
  CHECK_THROWS_AS(encode_stack(s4), CodecError);

  // nasl disagreeing with the entry count
  LabelStack s5;
  s5.entries.emplace_back(Lse{1000, 0, false, 64});
  Nas bad;
  bad.initial.nasl = 3;
  s5.entries.emplace_back(bad);
  finalize_bos(s5);
  CHECK_THROWS_AS(encode_stack(s5), CodecError);

  // field out of range
  LabelStack s6;
  s6.entries.emplace_back(Lse{1u << 20, 0, true, 64});
  CHECK_THROWS_AS(encode_stack(s6), CodecError);
}

TEST_CASE("mutable-bit fuzz keeps opcodes, scope, lengths, labels intact") {
  Rng rng(0xF11B);
  for (int i = 0; i < 500; ++i) {
    auto stack = testgen::random_stack(rng);
    std::vector<testgen::Tag> tags;
    auto bytes = testgen::ref_encode(stack, &tags);
    for (std::size_t w = 0; w < tags.size(); ++w) {
      std::uint32_t mask = 0;
      if (tags[w] == testgen::Tag::C) mask = 0x7Fu << 5;
      if (tags[w] == testgen::Tag::D) mask = 0x7FFu << 1;
      if (!mask) continue;
      std::uint32_t flips = static_cast<std::uint32_t>(rng.next()) & mask;
      bytes[4 * w + 0] ^= static_cast<std::uint8_t>(flips >> 24);
      bytes[4 * w + 1] ^= static_cast<std::uint8_t>(flips >> 16);
      bytes[4 * w + 2] ^= static_cast<std::uint8_t>(flips >> 8);
      bytes[4 * w + 3] ^= static_cast<std::uint8_t>(flips);
    }
    auto parsed = decode_stack(bytes);
    REQUIRE(parsed.stack.entries.size() == stack.entries.size());
    for (std::size_t e = 0; e < stack.entries.size(); ++e) {
      if (const auto* lse = std::get_if<Lse>(&stack.entries[e])) {
        CHECK(*lse == std::get<Lse>(parsed.stack.entries[e]));
      } else {
        auto want = strip_mutable(std::get<Nas>(stack.entries[e]));
        auto got = strip_mutable(std::get<Nas>(parsed.stack.entries[e]));
        CHECK(want == got);
      }
    }
  }
}

TEST_CASE("bit budget of the maximal sub-stack") {
  // Initial opcode, seven ADs, one more opcode, seven more ADs, plus the
  // indicator: 17 words.
  Nas nas;
  nas.initial.opcode = 1;
  nas.initial.nal = 7;
  for (int i = 0; i < 7; ++i) nas.rest.emplace_back(FormatD{});
  FormatC c;
  c.opcode = 2;
  c.nal = 7;
  nas.rest.emplace_back(c);
  for (int i = 0; i < 7; ++i) nas.rest.emplace_back(FormatD{});
  nas.initial.nasl = 15;

  auto report = mutable_bit_report(nas);
  CHECK(report.lse_count == 17);
  CHECK(report.total_bits == 544);
  CHECK(report.mutable_bits == 161);
  CHECK(report.data_bits == 453);
  CHECK(report.note.find("424") != std::string::npos);
}

TEST_CASE("bit budget agrees with brute-force position counting") {
  // Data bit offsets from the MSB of the word, per format, written out by
  // hand from the layout:
  //   B: 7..19    C: 7..19 and 20..26    D: 0..18 and 20..30
  auto count_from = [](testgen::Tag tag, unsigned from) {
    unsigned n = 0;
    auto add = [&](unsigned lo, unsigned hi) {
      for (unsigned o = lo; o <= hi; ++o)
        if (o >= from) ++n;
    };
    switch (tag) {
      case testgen::Tag::B: add(7, 19); break;
      case testgen::Tag::C: add(7, 19); add(20, 26); break;
      case testgen::Tag::D: add(0, 18); add(20, 30); break;
      default: break;
    }
    return n;
  };

  Rng rng(0xB17);
  for (int i = 0; i < 300; ++i) {
    auto nas = testgen::random_nas(rng, Scope::Hbh);
    LabelStack s;
    s.entries.emplace_back(nas);
    std::vector<testgen::Tag> tags;
    testgen::ref_encode(s, &tags);
    unsigned data = 0, mut = 0;
    for (auto t : tags) {
      data += count_from(t, 0);
      mut += count_from(t, 20);
    }
    auto report = mutable_bit_report(nas);
    CHECK(report.data_bits == data);
    CHECK(report.mutable_bits == mut);
    CHECK(report.total_bits == 32 * tags.size());
  }
}

TEST_CASE("dissect annotates instead of failing") {
  CHECK(dissect_text({}) == "empty stack\n");

  auto bytes = encode_stack(plain_labels({100, 200, 300}));
  auto text = dissect_text(bytes, 2);
  CHECK(text.find("truncated") != std::string::npos);

  // trailing garbage is annotated, not fatal
  testgen::push_word(bytes, 0xDEADBEEF);
  auto text2 = dissect_text(bytes);
  CHECK(text2.find("trailing") != std::string::npos);

  // odd byte counts are annotated too
  bytes.push_back(0xAB);
  auto text3 = dissect_text(bytes);
  CHECK(!text3.empty());
}

TEST_CASE("hex helpers") {
  CHECK(to_hex({0xde, 0xad, 0x01}) == "dead01");
  auto parsed = from_hex(" DE ad\n01\t");
  REQUIRE(parsed.has_value());
  CHECK(*parsed == std::vector<std::uint8_t>{0xde, 0xad, 0x01});
  CHECK(!from_hex("xyz").has_value());
  CHECK(!from_hex("abc").has_value());
}
