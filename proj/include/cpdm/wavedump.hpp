#pragma once

#include <string>

#include "cpdm/waveform.hpp"

namespace cpdm {

// Binary waveform dump: 32-byte header (magic "CPDMWAVE", sample_rate as
// float64, length as uint64, 8 reserved zero bytes) followed by
// little-endian float64 interleaved (re, im) pairs.
void write_waveform(const std::string& path, const ComplexWaveform& w);
ComplexWaveform read_waveform(const std::string& path);

}  // namespace cpdm
