#pragma once

#include <cstdint>

namespace mna {

// splitmix64: tiny splittable generator with a stable cross-platform output
// sequence. std::mt19937_64 itself is portable but the standard distributions
// are not, and simulation runs must be bit-identical for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 significant bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). Modulo bias is irrelevant at our n << 2^64.
  std::uint64_t next_below(std::uint64_t n) { return n ? next() % n : 0; }

  // Derives an independent child stream, e.g. one per node.
  Rng split(std::uint64_t salt) {
    Rng mixer(state_ ^ (salt * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
    return Rng(mixer.next());
  }

 private:
  std::uint64_t state_;
};

}  // namespace mna
