#include "cpdm/bits.hpp"

#include <random>
#include <stdexcept>

namespace cpdm {
namespace {

// Fibonacci LFSR for x^degree + x^tap2 + 1. The state keeps the last
// `degree` outputs with bit k holding y_{n+k}, so the recurrence
// y_{n+degree} = y_{n+tap2} ^ y_n reads taps at bit tap2 and bit 0.
std::vector<uint8_t> lfsr_bits(std::size_t n, uint64_t seed, int degree, int tap2) {
  const uint32_t mask = (1u << degree) - 1;
  uint32_t state = static_cast<uint32_t>(seed) & mask;
  if (state == 0) state = 1;
  std::vector<uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    uint32_t fb = ((state >> tap2) ^ state) & 1u;
    out[i] = static_cast<uint8_t>(state & 1u);
    state = ((state >> 1) | (fb << (degree - 1))) & mask;
  }
  return out;
}

}  // namespace

BitStream generate_bits(std::size_t n, uint64_t seed, BitGen generator) {
  if (n == 0) throw std::invalid_argument("generate_bits: n must be > 0");
  BitStream s;
  s.seed = seed;
  s.generator = generator;
  switch (generator) {
    case BitGen::Prbs15:
      s.bits = lfsr_bits(n, seed, 15, 14);
      break;
    case BitGen::Prbs23:
      s.bits = lfsr_bits(n, seed, 23, 18);
      break;
    case BitGen::Uniform: {
      std::mt19937_64 rng(seed);
      s.bits.resize(n);
      uint64_t word = 0;
      int avail = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (avail == 0) {
          word = rng();
          avail = 64;
        }
        s.bits[i] = static_cast<uint8_t>(word & 1u);
        word >>= 1;
        --avail;
      }
      break;
    }
  }
  return s;
}

}  // namespace cpdm
