#pragma once

#include "cpdm/bits.hpp"
#include "cpdm/waveform.hpp"

namespace cpdm {

/// Rectangular 8-QAM on a 4x2 grid, unit mean symbol energy, exactly two
/// amplitude radii. points[label] is the symbol for the 3-bit label
/// (b2 b1 b0, b2 = MSB of the bit triple).
///
/// Labeling (quasi-Gray): b2 b1 select the in-phase level through a 2-bit
/// Gray code (00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3), b0 selects the
/// quadrature level (0 -> -1, 1 -> +1); all divided by sqrt(6).
struct Constellation8Qam {
  std::array<cd, 8> points{};

  double inner_radius() const;
  double outer_radius() const;
};

Constellation8Qam rect8qam();

/// Maps bit triples to symbols at 1 sample/symbol.
ComplexWaveform map_8qam(const BitStream& bits, const Constellation8Qam& c,
                         double symbol_rate);

/// Minimum-distance label per symbol; ties break to the lower label index.
int decide_8qam(cd symbol, const Constellation8Qam& c);

/// Minimum-distance hard decision back to bits.
BitStream demap_8qam(const ComplexWaveform& symbols, const Constellation8Qam& c);

}  // namespace cpdm
