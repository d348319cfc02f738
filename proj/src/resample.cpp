#include "cpdm/resample.hpp"

#include <cmath>
#include <stdexcept>

#include "cpdm/fft.hpp"

namespace cpdm {
namespace {

ComplexWaveform resample_fft(const ComplexWaveform& w, double new_rate) {
  const Index n = w.size();
  const Index m = static_cast<Index>(std::llround(
      static_cast<double>(n) * new_rate / w.sample_rate));
  if (m <= 0) throw std::invalid_argument("resample: output length would be 0");

  Arraycd spec = fft(w.samples);
  Arraycd out = Arraycd::Zero(m);
  const Index half = std::min(n, m) / 2;
  for (Index k = 0; k <= half; ++k) out[k] = spec[k];
  for (Index k = 1; k < std::min(n, m) - half; ++k) out[m - k] = spec[n - k];
  if (std::min(n, m) % 2 == 0 && half > 0) {
    // Split the shared Nyquist bin to keep real signals real.
    out[half] *= 0.5;
    out[m - half] += out[half];
  }
  ifft_inplace(out);
  ComplexWaveform r;
  r.samples = out * (static_cast<double>(m) / static_cast<double>(n));
  r.sample_rate = new_rate;
  r.center_frequency_offset = w.center_frequency_offset;
  return r;
}

cd catmull_rom(cd p0, cd p1, cd p2, cd p3, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (p2 - p0) * t +
                (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3);
}

// Zeroes spectral content beyond +-cutoff_hz so decimation does not fold
// out-of-band signal or noise into the retained band.
ComplexWaveform antialias(const ComplexWaveform& w, double cutoff_hz) {
  const Index n = w.size();
  Arraycd spec = fft(w.samples);
  const double df = w.sample_rate / static_cast<double>(n);
  for (Index k = 0; k < n; ++k) {
    const double f = (k <= n / 2 ? k : k - n) * df;
    if (std::abs(f) > cutoff_hz) spec[k] = 0.0;
  }
  ComplexWaveform out = w;
  out.samples = ifft(spec);
  return out;
}

ComplexWaveform resample_cubic(const ComplexWaveform& w_in, double new_rate) {
  const ComplexWaveform w =
      new_rate < w_in.sample_rate ? antialias(w_in, new_rate / 2.0) : w_in;
  const Index n = w.size();
  const Index m = static_cast<Index>(std::llround(
      static_cast<double>(n) * new_rate / w.sample_rate));
  if (m <= 0) throw std::invalid_argument("resample: output length would be 0");
  const double step = w.sample_rate / new_rate;
  ComplexWaveform r;
  r.samples.resize(m);
  r.sample_rate = new_rate;
  r.center_frequency_offset = w.center_frequency_offset;
  auto at = [&](Index i) {
    if (i < 0) i = 0;
    if (i >= n) i = n - 1;
    return w.samples[i];
  };
  for (Index i = 0; i < m; ++i) {
    const double pos = static_cast<double>(i) * step;
    const Index k = static_cast<Index>(std::floor(pos));
    const double t = pos - static_cast<double>(k);
    r.samples[i] = catmull_rom(at(k - 1), at(k), at(k + 1), at(k + 2), t);
  }
  return r;
}

}  // namespace

ComplexWaveform resample(const ComplexWaveform& w, double new_rate,
                         ResampleMethod method) {
  if (w.size() == 0) throw std::invalid_argument("resample: empty input");
  if (new_rate <= 0) throw std::invalid_argument("resample: rate must be > 0");
  if (new_rate == w.sample_rate) return w;
  return method == ResampleMethod::Fft ? resample_fft(w, new_rate)
                                       : resample_cubic(w, new_rate);
}

}  // namespace cpdm
