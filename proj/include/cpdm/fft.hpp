#pragma once

#include "cpdm/waveform.hpp"

namespace cpdm {

// In-place complex FFT, e^{-j w t} forward convention. Inverse is 1/N
// normalized so ifft(fft(x)) == x.
void fft_inplace(Arraycd& v);
void ifft_inplace(Arraycd& v);

Arraycd fft(const Arraycd& v);
Arraycd ifft(const Arraycd& v);

/// Angular frequency of each FFT bin (rad/s), fftfreq layout.
Arrayd angular_freqs(Index n, double sample_rate);

/// Baseband frequency of each FFT bin (Hz), fftfreq layout.
Arrayd bin_freqs(Index n, double sample_rate);

}  // namespace cpdm
