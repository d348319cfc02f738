#pragma once

#include <vector>

#include "cpdm/jones.hpp"
#include "cpdm/waveform.hpp"

namespace cpdm {

struct LaserParams {
  double power_dbm = 20.0;
  double linewidth_hz = 0.1e6;
  double wavelength_m = 1550e-9;
  double azimuth_deg = 45.0;
};

/// CW laser: constant amplitude sqrt(P), Wiener phase noise with
/// increment variance 2*pi*linewidth/rate.
ComplexWaveform laser(const LaserParams& p, Index n, double rate, uint64_t seed);

enum class Pulse { Nrz, Rrc };

struct IqModulatorParams {
  double gain_imbalance_db = 0.0;
  double phase_error_rad = 0.0;
  double dc_offset_i = 0.0;  // fraction of RMS symbol amplitude
  double dc_offset_q = 0.0;

  bool ideal() const {
    return gain_imbalance_db == 0 && phase_error_rad == 0 && dc_offset_i == 0 &&
           dc_offset_q == 0;
  }
};

/// Shapes symbols to the carrier rate and modulates the optical carrier.
/// Impairments: out = g_I*I + j*g_Q*(Q*cos(phi) + I*sin(phi)) + offsets,
/// with g_{I,Q} = 10^(+-imbalance/40).
ComplexWaveform iq_modulate(const ComplexWaveform& carrier,
                            const ComplexWaveform& symbols, int sps, Pulse pulse,
                            double rrc_beta, const IqModulatorParams& imp);

enum class MuxMode { Ideal4, PhysicalJones };

struct CpdmMuxModel {
  MuxMode mode = MuxMode::Ideal4;
  double waveplate_angle = kPi / 4.0;

  TxMap tx_map() const;  // physical 2x4 map including combiner scaling
};

/// Multiplexed transmitter output. Ideal4 keeps the four tributaries as
/// two orthogonal Jones pairs (RCP pair then LCP pair); PhysicalJones
/// collapses them through the rank-2 waveplate network into one field.
struct CpdmField {
  MuxMode mode = MuxMode::Ideal4;
  std::vector<JonesSignal> signals;
};

CpdmField cpdm_mux(const TributarySet& tribs, const CpdmMuxModel& model);

/// Scales the field so total average power (x plus y) equals p_dbm.
JonesSignal set_launch_power(const JonesSignal& sig, double p_dbm);

}  // namespace cpdm
