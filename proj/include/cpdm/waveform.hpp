#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>

namespace cpdm {

using cd = std::complex<double>;
using Arraycd = Eigen::ArrayXcd;
using Arrayd = Eigen::ArrayXd;
using Index = Eigen::Index;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kSpeedOfLight = 2.99792458e8;   // m/s
inline constexpr double kPlanck = 6.62607015e-34;       // J s
inline constexpr double kBoltzmann = 1.380649e-23;      // J/K
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kOsnrRefBandwidth = 12.5e9;     // 0.1 nm at 1550 nm

inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watt(double dbm) { return 1e-3 * db_to_lin(dbm); }
inline double watt_to_dbm(double w) { return lin_to_db(w * 1e3); }

/// A uniformly sampled complex baseband waveform. Optical fields carry
/// units of sqrt(W), electrical ones are arbitrary voltage scale.
struct ComplexWaveform {
  Arraycd samples;
  double sample_rate = 0.0;            // Hz
  double center_frequency_offset = 0;  // Hz, relative to the baseband reference

  Index size() const { return samples.size(); }
};

inline double mean_power(const ComplexWaveform& w) {
  if (w.samples.size() == 0) return 0.0;
  return w.samples.abs2().mean();
}

/// Two-component optical field on a fixed H/V linear basis.
/// noise_psd tracks the in-band PSD of additive noise injected so far
/// (W/Hz, both polarizations combined) and noise_power its total power
/// (W); both feed the bookkeeping OSNR estimator.
struct JonesSignal {
  ComplexWaveform x, y;
  double noise_psd = 0.0;
  double noise_power = 0.0;

  double sample_rate() const { return x.sample_rate; }
  Index size() const { return x.size(); }
};

inline double total_power(const JonesSignal& s) {
  return mean_power(s.x) + mean_power(s.y);
}

/// The four logical CPDM channels (RCP-H, RCP-V, LCP-H, LCP-V).
struct TributarySet {
  ComplexWaveform rcp_h, rcp_v, lcp_h, lcp_v;

  std::array<const ComplexWaveform*, 4> all() const {
    return {&rcp_h, &rcp_v, &lcp_h, &lcp_v};
  }
  std::array<ComplexWaveform*, 4> all() {
    return {&rcp_h, &rcp_v, &lcp_h, &lcp_v};
  }
};

}  // namespace cpdm
