#pragma once

#include <vector>

#include "cpdm/transmitter.hpp"
#include "cpdm/waveform.hpp"

namespace cpdm {

struct PhotodiodeParams {
  double responsivity_a_w = 0.95;
  double dark_current_a = 10e-9;
  double temperature_k = 298.0;
  double load_resistance_ohm = 50.0;
  double thermal_bandwidth_hz = 10e9;
  bool noiseless = false;
};

struct AdcParams {
  double sample_rate = 0.0;   // Hz; derived from samples_per_bit when 0
  int bits = 0;               // 0 = infinite resolution
  int samples_per_bit = 4;    // against the 112-Gbps aggregate

  /// Receiver rate per tributary: samples_per_bit x 28e9 Sa/s.
  double rate_per_tributary() const {
    return sample_rate > 0 ? sample_rate : samples_per_bit * 28e9;
  }
};

/// Per-branch complex basebands (RCP-H, RCP-V, LCP-H, LCP-V).
struct FrontendOutput {
  std::vector<ComplexWaveform> branches;
};

/// Polarization-diversity coherent receiver: per branch, 90-degree hybrid +
/// balanced pair gives a photocurrent proportional to R*sqrt(P_LO_branch)
/// times the branch field, mixed down by the LO (phase noise and frequency
/// offset included), with shot/thermal/dark noise and TIA gain.
FrontendOutput coherent_detect(const CpdmField& field, const LaserParams& lo,
                               double lo_freq_offset_hz,
                               const PhotodiodeParams& pd, double tia_gain_db,
                               const CpdmMuxModel& mux, uint64_t seed);

/// Anti-alias resampling to the ADC rate plus optional uniform
/// quantization over a +-4 sigma full scale.
ComplexWaveform adc(const ComplexWaveform& w, const AdcParams& p, uint64_t seed);

}  // namespace cpdm
