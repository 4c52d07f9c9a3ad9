#include "mna/codec.hpp"

#include <cstdio>
#include <sstream>

namespace mna {

namespace {

using wire::field;
using wire::mask;

void put_word(std::vector<std::uint8_t>& out, std::uint32_t w) {
  out.push_back(static_cast<std::uint8_t>(w >> 24));
  out.push_back(static_cast<std::uint8_t>(w >> 16));
  out.push_back(static_cast<std::uint8_t>(w >> 8));
  out.push_back(static_cast<std::uint8_t>(w));
}

std::uint32_t get_word(std::span<const std::uint8_t> bytes, std::size_t word_index) {
  std::size_t off = word_index * 4;
  return std::uint32_t(bytes[off]) << 24 | std::uint32_t(bytes[off + 1]) << 16 |
         std::uint32_t(bytes[off + 2]) << 8 | bytes[off + 3];
}

[[noreturn]] void fail(CodecError::Kind kind, const std::string& msg,
                       std::size_t word = CodecError::npos) {
  throw CodecError(kind, msg, word);
}

void check_range(std::uint64_t value, unsigned bits, const char* what) {
  if (value > mask(bits))
    fail(CodecError::Kind::InvariantViolation,
         std::string(what) + " out of range: " + std::to_string(value));
}

// Validates everything encode promises: field ranges, nal chain vs nasl,
// bos placement, select/i2e positioning.
void validate_stack(const LabelStack& stack) {
  std::size_t total = stack.lse_count();
  std::size_t seen = 0;
  auto expect_bos = [&](bool bos, const char* what) {
    ++seen;
    bool last = seen == total;
    if (bos != last)
      fail(CodecError::Kind::InvariantViolation,
           std::string(bos ? "bottom-of-stack before the last word ("
                           : "missing bottom-of-stack on the last word (") +
               what + ")",
           seen - 1);
  };

  for (std::size_t i = 0; i < stack.entries.size(); ++i) {
    const auto& entry = stack.entries[i];
    if (const auto* lse = std::get_if<Lse>(&entry)) {
      check_range(lse->label, wire::kFwdLabelBits, "label");
      check_range(lse->tc, wire::kFwdTcBits, "tc");
      expect_bos(lse->bos, "forwarding entry");
      continue;
    }
    const auto& nas = std::get<Nas>(entry);
    if (nas.scope() == Scope::Reserved)
      fail(CodecError::Kind::InvariantViolation, "reserved scope value");
    if (nas.scope() == Scope::I2e && i + 1 != stack.entries.size())
      fail(CodecError::Kind::InvariantViolation, "i2e sub-stack must be the last entry");
    if (nas.scope() == Scope::Select) {
      bool below_label = i > 0 && std::holds_alternative<Lse>(stack.entries[i - 1]);
      if (!below_label)
        fail(CodecError::Kind::InvariantViolation,
             "select sub-stack must sit directly below a forwarding label");
    }
    check_range(nas.indicator.spl, wire::kFwdLabelBits, "indicator label");
    check_range(nas.indicator.tc, wire::kFwdTcBits, "indicator tc");
    check_range(nas.initial.opcode, wire::kBOpcodeBits, "opcode");
    check_range(nas.initial.data, wire::kBDataBits, "initial data");
    check_range(nas.initial.nasl, wire::kBNaslBits, "nasl");
    if (nas.initial.nal > wire::kMaxNal)
      fail(CodecError::Kind::InvariantViolation, "nal above 7");
    if (nas.initial.nasl != nas.rest.size())
      fail(CodecError::Kind::InvariantViolation,
           "nasl " + std::to_string(nas.initial.nasl) + " but " +
               std::to_string(nas.rest.size()) + " entries follow");
    if (nas.lse_count() > wire::kMaxNasLseCount)
      fail(CodecError::Kind::InvariantViolation, "sub-stack above 17 words");

    expect_bos(nas.indicator.bos, "indicator");
    expect_bos(nas.initial.bos, "initial opcode entry");

    // nal chain: the initial opcode's ADs come first, then each subsequent
    // opcode brings its own.
    std::size_t pending_ad = nas.initial.nal;
    for (const auto& ne : nas.rest) {
      if (const auto* c = std::get_if<FormatC>(&ne)) {
        if (pending_ad > 0)
          fail(CodecError::Kind::InvariantViolation,
               "opcode entry where ancillary data was promised");
        check_range(c->opcode, wire::kCOpcodeBits, "opcode");
        check_range(c->data, wire::kCDataBits, "opcode data");
        if (c->nal > wire::kMaxNal) fail(CodecError::Kind::InvariantViolation, "nal above 7");
        pending_ad = c->nal;
        expect_bos(c->bos, "opcode entry");
      } else {
        const auto& d = std::get<FormatD>(ne);
        if (pending_ad == 0)
          fail(CodecError::Kind::InvariantViolation, "ancillary data entry not bound to an opcode");
        --pending_ad;
        check_range(d.data, wire::kDDataBits, "ancillary data");
        expect_bos(d.bos, "ancillary data entry");
      }
    }
    if (pending_ad > 0)
      fail(CodecError::Kind::InvariantViolation, "nal chain runs past the end of the sub-stack");
  }
}

struct NasDecodeResult {
  Nas nas;
  std::size_t words_used = 0;
  bool hit_rld = false;
  bool hit_end = false;
  bool saw_bos = false;
};

// Reads one sub-stack starting at the indicator word. Caller guarantees the
// indicator word exists and carries the indicator label.
NasDecodeResult decode_nas(std::span<const std::uint8_t> bytes, std::size_t start,
                           std::size_t total_words, std::size_t budget) {
  NasDecodeResult r;
  std::size_t i = start;

  std::uint32_t aw = get_word(bytes, i);
  r.nas.indicator = unpack_a(aw);
  ++i;
  ++r.words_used;
  if (r.nas.indicator.bos) {
    fail(CodecError::Kind::MalformedNas, "sub-stack indicator carries bottom-of-stack", i - 1);
  }
  if (r.words_used == budget && i < total_words) {
    r.hit_rld = true;
    return r;
  }
  if (i >= total_words)
    fail(CodecError::Kind::MalformedNas, "stack ends after the sub-stack indicator", i - 1);

  std::uint32_t bw = get_word(bytes, i);
  r.nas.initial = unpack_b(bw);
  ++i;
  ++r.words_used;
  std::size_t expect = r.nas.initial.nasl;
  std::size_t pending_ad = r.nas.initial.nal;
  if (pending_ad > expect)
    fail(CodecError::Kind::MalformedNas, "nal chain runs past the promised sub-stack length",
         i - 1);
  r.saw_bos = r.nas.initial.bos;
  if (r.nas.initial.bos && expect > 0)
    fail(CodecError::Kind::MalformedNas, "bottom-of-stack before the promised sub-stack length",
         i - 1);

  for (std::size_t k = 0; k < expect; ++k) {
    if (r.saw_bos)
      fail(CodecError::Kind::MalformedNas, "bottom-of-stack before the promised sub-stack length",
           i - 1);
    if (r.words_used == budget) {
      r.hit_rld = true;
      return r;
    }
    if (i >= total_words) {
      r.hit_end = true;
      fail(CodecError::Kind::MalformedNas, "stack ends inside a sub-stack", i - 1);
    }
    std::uint32_t w = get_word(bytes, i);
    if (pending_ad > 0) {
      FormatD d = unpack_d(w);
      r.saw_bos = d.bos;
      r.nas.rest.emplace_back(d);
      --pending_ad;
    } else {
      FormatC c = unpack_c(w);
      if (k + 1 + c.nal > expect)
        fail(CodecError::Kind::MalformedNas, "nal chain runs past the promised sub-stack length",
             i);
      pending_ad = c.nal;
      r.saw_bos = c.bos;
      r.nas.rest.emplace_back(c);
    }
    ++i;
    ++r.words_used;
  }
  return r;
}

}  // namespace

const char* scope_name(Scope s) {
  switch (s) {
    case Scope::Select: return "select";
    case Scope::Hbh: return "hbh";
    case Scope::I2e: return "i2e";
    default: return "reserved";
  }
}

std::size_t LabelStack::lse_count() const {
  std::size_t n = 0;
  for (const auto& e : entries)
    n += std::holds_alternative<Lse>(e) ? 1 : std::get<Nas>(e).lse_count();
  return n;
}

std::uint32_t pack_word(const Lse& e) {
  return e.label << wire::kFwdLabelShift | std::uint32_t(e.tc) << wire::kFwdTcShift |
         std::uint32_t(e.bos) << wire::kFwdBosShift | e.ttl;
}

std::uint32_t pack_word(const FormatA& e) {
  return pack_word(Lse{e.spl, e.tc, e.bos, e.ttl});
}

std::uint32_t pack_word(const FormatB& e) {
  return std::uint32_t(e.opcode) << wire::kBOpcodeShift |
         std::uint32_t(e.data) << wire::kBDataShift |
         std::uint32_t(e.scope) << wire::kBIhsShift | std::uint32_t(e.nasl) << wire::kBNaslShift |
         std::uint32_t(e.nal) << wire::kBNalShift | std::uint32_t(e.r) << wire::kBRShift |
         std::uint32_t(e.bos) << wire::kBSShift | std::uint32_t(e.u);
}

std::uint32_t pack_word(const FormatC& e) {
  std::uint32_t hi = e.data >> wire::kCDataLoBits;
  std::uint32_t lo = e.data & mask(wire::kCDataLoBits);
  return std::uint32_t(e.opcode) << wire::kCOpcodeShift | hi << wire::kCDataHiShift |
         lo << wire::kCDataLoShift | std::uint32_t(e.nal) << wire::kCNalShift |
         std::uint32_t(e.bos) << wire::kCSShift | std::uint32_t(e.res);
}

std::uint32_t pack_word(const FormatD& e) {
  std::uint32_t hi = e.data >> wire::kDDataLoBits;
  std::uint32_t lo = e.data & mask(wire::kDDataLoBits);
  return hi << wire::kDDataHiShift | lo << wire::kDDataLoShift | std::uint32_t(e.bos);
}

Lse unpack_forwarding(std::uint32_t w) {
  return Lse{field(w, wire::kFwdLabelShift, wire::kFwdLabelBits),
             static_cast<std::uint8_t>(field(w, wire::kFwdTcShift, wire::kFwdTcBits)),
             field(w, wire::kFwdBosShift, 1) != 0,
             static_cast<std::uint8_t>(field(w, wire::kFwdTtlShift, wire::kFwdTtlBits))};
}

FormatA unpack_a(std::uint32_t w) {
  Lse lse = unpack_forwarding(w);
  return FormatA{lse.label, lse.tc, lse.bos, lse.ttl};
}

FormatB unpack_b(std::uint32_t w) {
  FormatB b;
  b.opcode = static_cast<std::uint8_t>(field(w, wire::kBOpcodeShift, wire::kBOpcodeBits));
  b.data = static_cast<std::uint16_t>(field(w, wire::kBDataShift, wire::kBDataBits));
  b.scope = static_cast<Scope>(field(w, wire::kBIhsShift, wire::kBIhsBits));
  b.nasl = static_cast<std::uint8_t>(field(w, wire::kBNaslShift, wire::kBNaslBits));
  b.nal = static_cast<std::uint8_t>(field(w, wire::kBNalShift, wire::kBNalBits));
  b.r = field(w, wire::kBRShift, 1) != 0;
  b.bos = field(w, wire::kBSShift, 1) != 0;
  b.u = field(w, wire::kBUShift, 1) != 0;
  return b;
}

FormatC unpack_c(std::uint32_t w) {
  FormatC c;
  c.opcode = static_cast<std::uint8_t>(field(w, wire::kCOpcodeShift, wire::kCOpcodeBits));
  c.data = field(w, wire::kCDataHiShift, wire::kCDataHiBits) << wire::kCDataLoBits |
           field(w, wire::kCDataLoShift, wire::kCDataLoBits);
  c.nal = static_cast<std::uint8_t>(field(w, wire::kCNalShift, wire::kCNalBits));
  c.bos = field(w, wire::kCSShift, 1) != 0;
  c.res = field(w, wire::kCResShift, 1) != 0;
  return c;
}

FormatD unpack_d(std::uint32_t w) {
  FormatD d;
  d.data = field(w, wire::kDDataHiShift, wire::kDDataHiBits) << wire::kDDataLoBits |
           field(w, wire::kDDataLoShift, wire::kDDataLoBits);
  d.bos = field(w, wire::kDSShift, 1) != 0;
  return d;
}

namespace {

void emit_nas(std::vector<std::uint8_t>& out, const Nas& nas) {
  put_word(out, pack_word(nas.indicator));
  put_word(out, pack_word(nas.initial));
  for (const auto& ne : nas.rest) {
    if (const auto* c = std::get_if<FormatC>(&ne))
      put_word(out, pack_word(*c));
    else
      put_word(out, pack_word(std::get<FormatD>(ne)));
  }
}

void emit_entries(std::vector<std::uint8_t>& out, const LabelStack& stack) {
  out.reserve(out.size() + 4 * stack.lse_count());
  for (const auto& entry : stack.entries) {
    if (const auto* lse = std::get_if<Lse>(&entry))
      put_word(out, pack_word(*lse));
    else
      emit_nas(out, std::get<Nas>(entry));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_stack(const LabelStack& stack) {
  validate_stack(stack);
  std::vector<std::uint8_t> out;
  emit_entries(out, stack);
  return out;
}

std::vector<std::uint8_t> encode_stack_raw(const LabelStack& stack) {
  std::vector<std::uint8_t> out;
  emit_entries(out, stack);
  return out;
}

std::vector<std::uint8_t> nas_words(const Nas& nas) {
  std::vector<std::uint8_t> out;
  out.reserve(4 * nas.lse_count());
  emit_nas(out, nas);
  return out;
}

ParsedStack decode_stack(std::span<const std::uint8_t> bytes, std::size_t rld, DecodeMode mode) {
  ParsedStack out;
  bool lenient = mode == DecodeMode::Lenient;
  auto soft_fail = [&](CodecError::Kind kind, const std::string& msg, std::size_t word) {
    if (!lenient) fail(kind, msg, word);
    out.warnings.push_back(msg);
  };

  if (bytes.size() % 4 != 0) {
    soft_fail(CodecError::Kind::InvariantViolation,
              "byte length " + std::to_string(bytes.size()) + " is not a multiple of 4",
              CodecError::npos);
    bytes = bytes.subspan(0, bytes.size() - bytes.size() % 4);
  }
  std::size_t total_words = bytes.size() / 4;
  std::size_t i = 0;
  bool saw_bos = false;

  while (i < total_words && !saw_bos) {
    if (out.consumed_lse_count >= rld) {
      out.truncated = true;
      return out;
    }
    std::uint32_t w = get_word(bytes, i);
    std::uint32_t label = field(w, wire::kFwdLabelShift, wire::kFwdLabelBits);
    if (label != wire::kNasIndicatorLabel) {
      Lse lse = unpack_forwarding(w);
      saw_bos = lse.bos;
      out.stack.entries.emplace_back(lse);
      ++i;
      ++out.consumed_lse_count;
      continue;
    }

    std::size_t budget = rld - out.consumed_lse_count;
    NasDecodeResult r;
    if (lenient) {
      try {
        r = decode_nas(bytes, i, total_words, budget);
      } catch (const CodecError& e) {
        out.warnings.push_back(e.what());
        // Reinterpret the unusable region as raw forwarding entries so the
        // caller still sees every word it is entitled to read.
        while (i < total_words && out.consumed_lse_count < rld && !saw_bos) {
          Lse lse = unpack_forwarding(get_word(bytes, i));
          saw_bos = lse.bos;
          out.stack.entries.emplace_back(lse);
          ++i;
          ++out.consumed_lse_count;
        }
        continue;
      }
    } else {
      r = decode_nas(bytes, i, total_words, budget);
    }
    out.consumed_lse_count += r.words_used;
    i += r.words_used;
    if (r.hit_rld) {
      // The depth limit cut inside the sub-stack: its words count as
      // consumed but the partial sub-stack is not usable.
      out.truncated = true;
      return out;
    }
    saw_bos = r.saw_bos;
    out.stack.entries.emplace_back(std::move(r.nas));
  }

  if (!saw_bos && i >= total_words && total_words > 0) {
    soft_fail(CodecError::Kind::MalformedNas, "no bottom-of-stack flag before the end", i - 1);
  }
  if (saw_bos && i < total_words) {
    soft_fail(CodecError::Kind::TrailingGarbage,
              std::to_string(total_words - i) + " word(s) after bottom-of-stack", i);
  }
  return out;
}

MutableBitReport mutable_bit_report(const Nas& nas) {
  MutableBitReport r;
  r.lse_count = static_cast<unsigned>(nas.lse_count());
  r.total_bits = 32 * r.lse_count;
  r.data_bits = wire::kDataBitsA + wire::kDataBitsB;
  r.mutable_bits = wire::kMutableBitsA + wire::kMutableBitsB;
  for (const auto& ne : nas.rest) {
    if (std::holds_alternative<FormatC>(ne)) {
      r.data_bits += wire::kDataBitsC;
      r.mutable_bits += wire::kMutableBitsC;
    } else {
      r.data_bits += wire::kDataBitsD;
      r.mutable_bits += wire::kMutableBitsD;
    }
  }
  if (r.lse_count == wire::kMaxNasLseCount) {
    r.note =
        "counted per-entry data capacity; design notes historically quote 424 data bits for "
        "the maximal sub-stack, the per-entry sum is " +
        std::to_string(r.data_bits);
  }
  return r;
}

LabelStack& finalize_bos(LabelStack& stack) {
  auto set_all = [](StackEntry& entry, auto&& set_bos) {
    if (auto* lse = std::get_if<Lse>(&entry)) {
      set_bos(lse->bos);
      return;
    }
    auto& nas = std::get<Nas>(entry);
    set_bos(nas.indicator.bos);
    set_bos(nas.initial.bos);
    for (auto& ne : nas.rest) {
      if (auto* c = std::get_if<FormatC>(&ne))
        set_bos(c->bos);
      else
        set_bos(std::get<FormatD>(ne).bos);
    }
  };
  bool dummy = false;
  bool* last = &dummy;
  for (auto& entry : stack.entries) {
    set_all(entry, [&](bool& b) {
      b = false;
      last = &b;
    });
  }
  if (last != &dummy) *last = true;
  return stack;
}

std::string dissect_text(std::span<const std::uint8_t> bytes, std::size_t rld) {
  if (bytes.empty()) return "empty stack\n";
  std::ostringstream os;
  char buf[160];

  std::size_t usable = bytes.size() - bytes.size() % 4;
  std::size_t total_words = usable / 4;
  std::size_t i = 0;
  bool saw_bos = false;
  // Words promised by an open sub-stack and the live ancillary-data counter.
  std::size_t nas_left = 0;
  std::size_t pending_ad = 0;

  while (i < total_words) {
    if (i >= rld) {
      os << "  ... truncated at depth limit " << rld << "\n";
      return os.str();
    }
    if (saw_bos) {
      os << "  ! trailing data: " << (total_words - i) << " word(s) after bottom-of-stack\n";
      break;
    }
    std::uint32_t w = get_word(bytes, i);
    std::snprintf(buf, sizeof buf, "[%2zu] %08x  ", i, w);
    os << buf;

    if (nas_left > 0) {
      --nas_left;
      if (pending_ad > 0) {
        --pending_ad;
        FormatD d = unpack_d(w);
        std::snprintf(buf, sizeof buf, "AD    data=0x%08x bos=%d", d.data, d.bos);
        os << buf;
        saw_bos = d.bos;
      } else {
        FormatC c = unpack_c(w);
        std::snprintf(buf, sizeof buf, "OPC   opcode=%u data=0x%05x nal=%u bos=%d", c.opcode,
                      c.data, c.nal, c.bos);
        os << buf;
        if (c.nal > nas_left) {
          os << "  ! nal chain runs past the promised sub-stack length";
          pending_ad = nas_left;
        } else {
          pending_ad = c.nal;
        }
        saw_bos = c.bos;
      }
      if (saw_bos && nas_left > 0)
        os << "  ! bottom-of-stack before the promised sub-stack length";
      os << "\n";
      ++i;
      continue;
    }

    std::uint32_t label = field(w, wire::kFwdLabelShift, wire::kFwdLabelBits);
    if (label == wire::kNasIndicatorLabel) {
      FormatA a = unpack_a(w);
      std::snprintf(buf, sizeof buf, "IND   spl=%u tc=%u ttl=%u bos=%d", a.spl, a.tc, a.ttl,
                    a.bos);
      os << buf;
      saw_bos = a.bos;
      if (a.bos) os << "  ! sub-stack indicator carries bottom-of-stack";
      os << "\n";
      ++i;
      if (saw_bos) continue;
      if (i >= total_words) {
        os << "  ! stack ends after the sub-stack indicator\n";
        break;
      }
      if (i >= rld) continue;
      std::uint32_t bw = get_word(bytes, i);
      FormatB b = unpack_b(bw);
      std::snprintf(buf, sizeof buf,
                    "[%2zu] %08x  INI   opcode=%u data=0x%04x scope=%s nasl=%u nal=%u r=%d bos=%d "
                    "u=%d",
                    i, bw, b.opcode, b.data, scope_name(b.scope), b.nasl, b.nal, b.r, b.bos, b.u);
      os << buf;
      saw_bos = b.bos;
      if (b.bos && b.nasl > 0) os << "  ! bottom-of-stack before the promised sub-stack length";
      os << "\n";
      nas_left = b.nasl;
      pending_ad = b.nal;
      ++i;
      continue;
    }

    Lse lse = unpack_forwarding(w);
    std::snprintf(buf, sizeof buf, "FWD   label=%u tc=%u ttl=%u bos=%d", lse.label, lse.tc,
                  lse.ttl, lse.bos);
    os << buf << "\n";
    saw_bos = lse.bos;
    ++i;
  }

  if (!saw_bos && i >= total_words) os << "  ! no bottom-of-stack flag before the end\n";
  if (bytes.size() % 4 != 0)
    os << "  ! " << bytes.size() % 4 << " stray byte(s) beyond the last full word\n";
  return os.str();
}

}  // namespace mna
