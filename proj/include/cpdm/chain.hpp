#pragma once

#include <string>
#include <vector>

#include "cpdm/dsp.hpp"
#include "cpdm/equalizer.hpp"
#include "cpdm/rx_frontend.hpp"

namespace cpdm {

struct StageMetric {
  std::string name;
  double value = 0.0;
};

struct StageReport {
  std::vector<StageMetric> stages;  // one entry per stage (i)-(viii)
  double foe_estimate_hz = 0.0;
  double eq_converged_error = 0.0;
  double mean_bps_phase_step = 0.0;
  int cycle_slips = 0;
  bool eq_singular = false;
  bool timing_converged = true;

  std::string to_json() const;
};

struct ChainOutput {
  std::vector<ComplexWaveform> symbols;  // 1 sps per tributary
  StageReport report;
};

/// Runs the eight receiver stages in order: Bessel filter, resampling to
/// 2 sps, QI compensation, CD compensation (or DBP, which subsumes it),
/// timing recovery, adaptive butterfly equalization per polarization
/// pair, then FOE and BPS carrier recovery. expected_power is the
/// physical optical power the DBP nonlinear phase should see (total over
/// a polarization pair at the last span output); ignored without DBP.
ChainOutput run_chain(const FrontendOutput& front, const DspConfig& cfg,
                      const LinkPlan& link, const FiberParams& fiber,
                      const Constellation8Qam& c, double expected_power_w,
                      const std::string& tap_dir = "");

}  // namespace cpdm
