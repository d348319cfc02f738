#include "cpdm/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpdm {

Constellation8Qam rect8qam() {
  Constellation8Qam c;
  const double scale = 1.0 / std::sqrt(6.0);  // mean energy (2 + 10)/2 = 6
  // Gray-coded I levels indexed by the two MSBs of the label.
  const double i_levels[4] = {-3.0, -1.0, +3.0, +1.0};  // 00, 01, 10, 11
  for (int label = 0; label < 8; ++label) {
    const double re = i_levels[label >> 1];
    const double im = (label & 1) ? +1.0 : -1.0;
    c.points[static_cast<std::size_t>(label)] = cd(re, im) * scale;
  }
  return c;
}

double Constellation8Qam::inner_radius() const {
  double r = std::abs(points[0]);
  for (const cd& p : points) r = std::min(r, std::abs(p));
  return r;
}

double Constellation8Qam::outer_radius() const {
  double r = 0;
  for (const cd& p : points) r = std::max(r, std::abs(p));
  return r;
}

ComplexWaveform map_8qam(const BitStream& bits, const Constellation8Qam& c,
                         double symbol_rate) {
  if (bits.size() % 3 != 0)
    throw std::invalid_argument("map_8qam: bit count not divisible by 3");
  ComplexWaveform w;
  w.sample_rate = symbol_rate;
  w.samples.resize(static_cast<Index>(bits.size() / 3));
  for (Index i = 0; i < w.samples.size(); ++i) {
    const std::size_t k = static_cast<std::size_t>(i) * 3;
    const int label = (bits.bits[k] << 2) | (bits.bits[k + 1] << 1) | bits.bits[k + 2];
    w.samples[i] = c.points[static_cast<std::size_t>(label)];
  }
  return w;
}

int decide_8qam(cd symbol, const Constellation8Qam& c) {
  int best = 0;
  double best_d = std::norm(symbol - c.points[0]);
  for (int label = 1; label < 8; ++label) {
    const double d = std::norm(symbol - c.points[static_cast<std::size_t>(label)]);
    if (d < best_d) {
      best_d = d;
      best = label;
    }
  }
  return best;
}

BitStream demap_8qam(const ComplexWaveform& symbols, const Constellation8Qam& c) {
  BitStream out;
  out.bits.resize(static_cast<std::size_t>(symbols.size()) * 3);
  for (Index i = 0; i < symbols.size(); ++i) {
    const int label = decide_8qam(symbols.samples[i], c);
    const std::size_t k = static_cast<std::size_t>(i) * 3;
    out.bits[k] = static_cast<uint8_t>((label >> 2) & 1);
    out.bits[k + 1] = static_cast<uint8_t>((label >> 1) & 1);
    out.bits[k + 2] = static_cast<uint8_t>(label & 1);
  }
  return out;
}

}  // namespace cpdm
