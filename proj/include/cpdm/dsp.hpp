#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cpdm/channel.hpp"
#include "cpdm/constellation.hpp"
#include "cpdm/resample.hpp"
#include "cpdm/waveform.hpp"

namespace cpdm {

enum class CdcMode { Freq, Time };

struct DspConfig {
  struct {
    int order = 4;
    double bw_3db_hz = 28e9;
  } bessel;
  struct {
    double sps = 2.0;
    ResampleMethod method = ResampleMethod::Cubic;
  } resamp;
  struct {
    // Off by default: the whitening step assumes equal-variance rails, which
    // the rectangular 8-QAM violates by design (5:1 ratio). Enable only when
    // the modulator is configured with real quadrature error.
    bool enable = false;
  } qi;
  struct {
    CdcMode mode = CdcMode::Freq;
    int n_taps = 0;  // Time mode; 0 = automatic from beta2*L*B^2
  } cdc;
  struct {
    bool enable = false;
    int steps_per_span = 20;
    double xi_nl = 0.76;  // gamma scaling; 0.48 preset also available
  } dbp;
  struct {
    bool enable = true;
    double loop_bw = 2e-3;  // normalized to symbol rate
  } timing;
  struct {
    int n_taps = 15;
    double mu_cma = 1e-3;
    double mu_rde = 5e-4;
    int stage1_len = 20000;
  } eq;
  struct {
    bool enable = true;
    double search_range_hz = 2e9;
  } foe;
  struct {
    int b_test_phases = 32;
    int window = 64;
    int symmetry_order = 4;
  } cpe;
};

/// 4th-order Bessel low-pass applied as the sampled analog frequency
/// response; -3 dB point lands exactly on bw_3db_hz.
ComplexWaveform bessel_filter(const ComplexWaveform& w, int order, double bw_3db_hz);

/// Gram-Schmidt orthogonalization of I against Q (DC removed); output has
/// orthogonal, equal-variance quadratures with the input power restored.
ComplexWaveform qi_compensate(const ComplexWaveform& w);

/// All-pass chromatic dispersion compensation over distance_km,
/// H(w) = exp(+j(beta2/2)w^2 L - j(beta3/6)w^3 L).
ComplexWaveform cd_compensate(const ComplexWaveform& w, const FiberParams& f,
                              double distance_km, CdcMode mode, int n_taps = 0);

/// Backward split-step plan. Per-span gain always matches span loss, so
/// the plan is scale preserving and xi_nl = 0 degenerates exactly to
/// cd_compensate over the same total length.
struct DbpPlan {
  FiberParams fiber;
  double span_km = 80.0;
  int n_spans = 10;
  int steps_per_span = 20;
  double xi_nl = 0.76;

  double total_km() const { return span_km * n_spans; }
};

/// Digital backpropagation of a polarization pair (symmetric split step
/// over -z, Manakov total-intensity nonlinear phase). Samples must carry
/// physical power scale for the nonlinear phase to be meaningful.
std::pair<ComplexWaveform, ComplexWaveform> dbp(const ComplexWaveform& wx,
                                                const ComplexWaveform& wy,
                                                const DbpPlan& plan);

struct TimingResult {
  std::vector<ComplexWaveform> aligned;  // symbol-aligned, 2 sps
  double residual_ui = 0.0;              // final interpolator phase estimate
  bool converged = true;
};

/// Gardner timing recovery with a proportional-integral loop and cubic
/// interpolation. All channels share one recovered clock.
TimingResult timing_recover(const std::vector<ComplexWaveform>& chans,
                            double loop_bw);

struct FoeResult {
  ComplexWaveform corrected;
  double offset_hz = 0.0;
  bool peak_found = true;
};

/// Spectral-peak frequency offset estimation on the 4th power of the
/// outer-ring symbols (1 sps input).
FoeResult foe(const ComplexWaveform& symbols, const Constellation8Qam& c,
              double search_range_hz);

struct CpeResult {
  ComplexWaveform corrected;
  Arrayd phase_track;
  int cycle_slips = 0;
};

/// Blind phase search over [0, pi/2) with block unwrapping. The distance
/// metric folds the constellation over the quadrant group, so the
/// estimate is invariant to pi/2 rotations of the input.
CpeResult cpe_bps(const ComplexWaveform& symbols, const Constellation8Qam& c,
                  int b_test_phases, int window);

}  // namespace cpdm
