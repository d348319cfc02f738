#pragma once

#include <cstdint>
#include <vector>

namespace cpdm {

enum class BitGen { Prbs15, Prbs23, Uniform };

struct BitStream {
  std::vector<uint8_t> bits;
  uint64_t seed = 1;
  BitGen generator = BitGen::Prbs15;

  std::size_t size() const { return bits.size(); }
};

/// Deterministic bit source. PRBS15 uses x^15 + x^14 + 1, PRBS23 uses
/// x^23 + x^18 + 1; the seed selects the (nonzero) register start state.
BitStream generate_bits(std::size_t n, uint64_t seed, BitGen generator);

}  // namespace cpdm
