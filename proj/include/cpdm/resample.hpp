#pragma once

#include "cpdm/waveform.hpp"

namespace cpdm {

enum class ResampleMethod { Cubic, Fft };

/// Rate conversion. Fft is exact for band-limited content (spectral
/// zero-pad/truncate); Cubic is piecewise-cubic interpolation in time.
/// Downsampling applies an anti-alias low-pass at the new Nyquist
/// frequency first, so out-of-band noise does not fold into the result.
ComplexWaveform resample(const ComplexWaveform& w, double new_rate,
                         ResampleMethod method);

}  // namespace cpdm
