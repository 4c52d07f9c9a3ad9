#pragma once

#include <cstdint>

// On-the-wire layout of label stack entries. Every field position used by the
// codec lives in this one table; bump kLayoutVersion when any of it changes.
//
// All entries are 32-bit words in network byte order, MSB first. Offsets below
// are bit positions counted from the LSB of the host-order word, so a field at
// offset O with width W occupies bits [O, O+W).
//
// Forwarding entry and NAS indicator (format A):
//   label(20) | tc(3) | bos(1) | ttl(8)
// Initial opcode entry (format B):
//   opcode(7) | data(13) | ihs(2) | nasl(4) | nal(3) | r(1) | s(1) | u(1)
// Subsequent opcode entry (format C):
//   opcode(7) | data_hi(13) | data_lo(7) | nal(3) | s(1) | res(1)
// Ancillary data entry (format D):
//   data_hi(19) | disc(1)=0 | data_lo(11) | s(1)
//
// The first 20 bits of every word are hash-relevant and must never change in
// flight; formats C and D therefore split their data fields so that only the
// low part is rewritable.

namespace mna::wire {

inline constexpr int kLayoutVersion = 1;

// Special label that introduces a network action sub-stack. Placeholder value
// from the experimental range below 16.
inline constexpr std::uint32_t kNasIndicatorLabel = 4;

inline constexpr std::uint32_t kWordBits = 32;
inline constexpr std::uint32_t kImmutablePrefixBits = 20;

// forwarding / format A
inline constexpr unsigned kFwdLabelShift = 12, kFwdLabelBits = 20;
inline constexpr unsigned kFwdTcShift = 9, kFwdTcBits = 3;
inline constexpr unsigned kFwdBosShift = 8;
inline constexpr unsigned kFwdTtlShift = 0, kFwdTtlBits = 8;

// format B
inline constexpr unsigned kBOpcodeShift = 25, kBOpcodeBits = 7;
inline constexpr unsigned kBDataShift = 12, kBDataBits = 13;
inline constexpr unsigned kBIhsShift = 10, kBIhsBits = 2;
inline constexpr unsigned kBNaslShift = 6, kBNaslBits = 4;
inline constexpr unsigned kBNalShift = 3, kBNalBits = 3;
inline constexpr unsigned kBRShift = 2;
inline constexpr unsigned kBSShift = 1;
inline constexpr unsigned kBUShift = 0;

// format C
inline constexpr unsigned kCOpcodeShift = 25, kCOpcodeBits = 7;
inline constexpr unsigned kCDataHiShift = 12, kCDataHiBits = 13;
inline constexpr unsigned kCDataLoShift = 5, kCDataLoBits = 7;
inline constexpr unsigned kCNalShift = 2, kCNalBits = 3;
inline constexpr unsigned kCSShift = 1;
inline constexpr unsigned kCResShift = 0;
inline constexpr unsigned kCDataBits = kCDataHiBits + kCDataLoBits; // 20

// format D
inline constexpr unsigned kDDataHiShift = 13, kDDataHiBits = 19;
inline constexpr unsigned kDDiscShift = 12;
inline constexpr unsigned kDDataLoShift = 1, kDDataLoBits = 11;
inline constexpr unsigned kDSShift = 0;
inline constexpr unsigned kDDataBits = kDDataHiBits + kDDataLoBits; // 30

inline constexpr std::uint32_t mask(unsigned bits) {
  return bits >= 32 ? 0xFFFFFFFFu : ((1u << bits) - 1u);
}

inline constexpr std::uint32_t field(std::uint32_t word, unsigned shift, unsigned bits) {
  return (word >> shift) & mask(bits);
}

// Rewritable bits per word, as a host-order mask. Only the low data parts of
// formats C and D may change in flight.
inline constexpr std::uint32_t kMutableMaskFwd = 0;
inline constexpr std::uint32_t kMutableMaskA = 0;
inline constexpr std::uint32_t kMutableMaskB = 0;
inline constexpr std::uint32_t kMutableMaskC = mask(kCDataLoBits) << kCDataLoShift;
inline constexpr std::uint32_t kMutableMaskD = mask(kDDataLoBits) << kDDataLoShift;

// Data capacity per format, in bits.
inline constexpr unsigned kDataBitsA = 0;
inline constexpr unsigned kDataBitsB = kBDataBits;
inline constexpr unsigned kDataBitsC = kCDataBits;
inline constexpr unsigned kDataBitsD = kDDataBits;

// Mutable-data capacity per format, in bits.
inline constexpr unsigned kMutableBitsA = 0;
inline constexpr unsigned kMutableBitsB = 0;
inline constexpr unsigned kMutableBitsC = kCDataLoBits;
inline constexpr unsigned kMutableBitsD = kDDataLoBits;

// A sub-stack is the indicator plus at most 1 + 15 opcode/data entries.
inline constexpr unsigned kMaxNasl = mask(kBNaslBits);     // 15
inline constexpr unsigned kMaxNal = 7;                     // capped below mask(3)
inline constexpr unsigned kMaxNasLseCount = 2 + kMaxNasl;  // 17

static_assert(kBOpcodeBits + kBDataBits + kBIhsBits + kBNaslBits + kBNalBits + 3 == 32);
static_assert(kCOpcodeBits + kCDataHiBits + kCDataLoBits + kCNalBits + 2 == 32);
static_assert(kDDataHiBits + 1 + kDDataLoBits + 1 == 32);

}  // namespace mna::wire
