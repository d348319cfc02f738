#pragma once

#include <vector>

#include "cpdm/constellation.hpp"
#include "cpdm/waveform.hpp"

namespace cpdm {

struct EqualizerConfig {
  int n_taps = 15;
  double mu_cma = 1e-3;
  double mu_rde = 5e-4;
  int stage1_len = 20000;  // CMA symbols before switching to RDE
};

struct EqualizerResult {
  std::vector<ComplexWaveform> outputs;  // 1 sps
  double converged_error = 0.0;          // mean |e|^2 over the output pass
  bool singular = false;                 // two outputs locked to one source
};

/// Two-stage CMA -> radius-directed butterfly equalizer over N channels at
/// 2 samples/symbol (NxN FIR bank, center-spike diagonal init). Inputs are
/// power normalized first, so decisions are invariant to input scaling.
/// Adaptation runs over the whole block, then a second pass with the
/// warmed taps produces the output symbols.
EqualizerResult adaptive_equalize(const std::vector<ComplexWaveform>& chans,
                                  const EqualizerConfig& cfg,
                                  const Constellation8Qam& c);

}  // namespace cpdm
