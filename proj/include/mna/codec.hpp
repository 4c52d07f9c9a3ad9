#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mna/wire.hpp"

namespace mna {

// Processing scope of a network action sub-stack, encoded in the IHS field of
// the initial opcode entry. Value 3 is reserved on the wire.
enum class Scope : std::uint8_t { Select = 0, Hbh = 1, I2e = 2, Reserved = 3 };

const char* scope_name(Scope s);

// Plain forwarding entry.
struct Lse {
  std::uint32_t label = 0;  // 20 bits
  std::uint8_t tc = 0;      // 3 bits
  bool bos = false;
  std::uint8_t ttl = 0;

  bool operator==(const Lse&) const = default;
};

// Sub-stack indicator: a forwarding entry whose label is a special value.
struct FormatA {
  std::uint32_t spl = wire::kNasIndicatorLabel;
  std::uint8_t tc = 0;
  bool bos = false;
  std::uint8_t ttl = 0;

  bool operator==(const FormatA&) const = default;
};

// Initial opcode entry. nasl counts the entries that follow this one within
// the sub-stack; nal counts the ancillary data entries bound to this opcode.
// r and u are carried verbatim and never interpreted.
struct FormatB {
  std::uint8_t opcode = 0;   // 7 bits
  std::uint16_t data = 0;    // 13 bits
  Scope scope = Scope::Select;
  std::uint8_t nasl = 0;     // 4 bits
  std::uint8_t nal = 0;      // 3 bits, <= 7
  bool r = false;
  bool bos = false;
  bool u = false;

  bool operator==(const FormatB&) const = default;
};

// Subsequent opcode entry. data is the 20-bit value; only its low 7 bits sit
// in the rewritable region of the word.
struct FormatC {
  std::uint8_t opcode = 0;  // 7 bits
  std::uint32_t data = 0;   // 20 bits
  std::uint8_t nal = 0;     // 3 bits, <= 7
  bool bos = false;
  bool res = false;         // carried verbatim

  bool operator==(const FormatC&) const = default;
};

// Ancillary data entry. data is the 30-bit value; only its low 11 bits sit in
// the rewritable region of the word.
struct FormatD {
  std::uint32_t data = 0;  // 30 bits
  bool bos = false;

  bool operator==(const FormatD&) const = default;
};

using NasEntry = std::variant<FormatC, FormatD>;

// One network action sub-stack: indicator, initial opcode entry, then
// rest.size() == initial.nasl further entries whose C/D classification is
// fully determined by the nal chain.
struct Nas {
  FormatA indicator;
  FormatB initial;
  std::vector<NasEntry> rest;

  bool operator==(const Nas&) const = default;

  // Entries on the wire, indicator included.
  std::size_t lse_count() const { return 2 + rest.size(); }
  Scope scope() const { return initial.scope; }
};

using StackEntry = std::variant<Lse, Nas>;

struct LabelStack {
  std::vector<StackEntry> entries;

  bool operator==(const LabelStack&) const = default;

  std::size_t lse_count() const;
};

inline constexpr std::size_t kNoRldLimit = std::numeric_limits<std::size_t>::max();

enum class DecodeMode { Strict, Lenient };

// Result of reading a stack within a readable label depth. truncated means
// the depth limit cut the walk short; consumed_lse_count includes the words
// of a sub-stack that was only partially readable (such a sub-stack is not
// materialized in entries). warnings is only populated in lenient mode.
struct ParsedStack {
  LabelStack stack;
  bool truncated = false;
  std::size_t consumed_lse_count = 0;
  std::vector<std::string> warnings;
};

class CodecError : public std::runtime_error {
 public:
  enum class Kind { InvariantViolation, MalformedNas, TrailingGarbage };

  CodecError(Kind kind, std::string msg, std::size_t word_index = npos)
      : std::runtime_error(std::move(msg)), kind(kind), word_index(word_index) {}

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Kind kind;
  std::size_t word_index;  // offending word, if known
};

// Word-level packing. These trust their arguments to be in range.
std::uint32_t pack_word(const Lse& e);
std::uint32_t pack_word(const FormatA& e);
std::uint32_t pack_word(const FormatB& e);
std::uint32_t pack_word(const FormatC& e);
std::uint32_t pack_word(const FormatD& e);

Lse unpack_forwarding(std::uint32_t word);
FormatA unpack_a(std::uint32_t word);
FormatB unpack_b(std::uint32_t word);
FormatC unpack_c(std::uint32_t word);
FormatD unpack_d(std::uint32_t word);

std::uint32_t pack_word(const Lse& entry);
std::uint32_t pack_word(const FormatA& entry);
std::uint32_t pack_word(const FormatB& entry);
std::uint32_t pack_word(const FormatC& entry);
std::uint32_t pack_word(const FormatD& entry);

// Serializes a stack to network byte order. Validates field ranges, nal
// chain consistency, bottom-of-stack flags (set on the last entry only),
// sub-stack placement (at most one select sub-stack directly below a label,
// exactly-last i2e) and throws CodecError on violation.
std::vector<std::uint8_t> encode_stack(const LabelStack& stack);

// Serializes without whole-stack validation. A node that can only read part
// of a deep stack re-emits its visible slice with this; the slice legally
// lacks a bottom-of-stack flag.
std::vector<std::uint8_t> encode_stack_raw(const LabelStack& stack);

// Wire words of one sub-stack, indicator first.
std::vector<std::uint8_t> nas_words(const Nas& nas);

// Reads a stack from network byte order, classifying at most rld entries.
// Strict mode throws CodecError on malformed input; lenient mode downgrades
// structural problems to warnings and re-interprets unusable words as plain
// forwarding entries.
ParsedStack decode_stack(std::span<const std::uint8_t> bytes, std::size_t rld = kNoRldLimit,
                         DecodeMode mode = DecodeMode::Strict);

struct MutableBitReport {
  unsigned lse_count = 0;
  unsigned total_bits = 0;
  unsigned data_bits = 0;
  unsigned mutable_bits = 0;
  // Set when the counted data capacity differs from the figure the design
  // documents historically quoted for the maximal sub-stack.
  std::string note;
};

MutableBitReport mutable_bit_report(const Nas& nas);

// Human-readable annotation of raw stack bytes. Never throws on content;
// malformed regions are annotated in place.
std::string dissect_text(std::span<const std::uint8_t> bytes, std::size_t rld = kNoRldLimit);

// Convenience: sets bos on the final word of the final entry and clears it
// everywhere else, returning the same stack.
LabelStack& finalize_bos(LabelStack& stack);

}  // namespace mna
