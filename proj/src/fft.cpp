#include "cpdm/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace cpdm {
namespace {

struct PlanCache {
  std::map<std::pair<Index, int>, fftw_plan> plans;
  std::mutex mtx;

  fftw_plan get(Index n, int sign) {
    std::lock_guard lock(mtx);
    auto key = std::make_pair(n, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    // Plan on a scratch buffer; executions use the new-array interface.
    fftw_complex* buf = fftw_alloc_complex(static_cast<size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    plans.emplace(key, p);
    return p;
  }
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void execute(Arraycd& v, int sign) {
  if (v.size() == 0) throw std::invalid_argument("fft: empty input");
  fftw_plan p = cache().get(v.size(), sign);
  auto* data = reinterpret_cast<fftw_complex*>(v.data());
  fftw_execute_dft(p, data, data);
}

}  // namespace

void fft_inplace(Arraycd& v) { execute(v, FFTW_FORWARD); }

void ifft_inplace(Arraycd& v) {
  execute(v, FFTW_BACKWARD);
  v /= static_cast<double>(v.size());
}

Arraycd fft(const Arraycd& v) {
  Arraycd out = v;
  fft_inplace(out);
  return out;
}

Arraycd ifft(const Arraycd& v) {
  Arraycd out = v;
  ifft_inplace(out);
  return out;
}

Arrayd bin_freqs(Index n, double sample_rate) {
  Arrayd f(n);
  const double df = sample_rate / static_cast<double>(n);
  for (Index k = 0; k < n; ++k) {
    Index kk = (k <= (n - 1) / 2) ? k : k - n;
    f[k] = df * static_cast<double>(kk);
  }
  return f;
}

Arrayd angular_freqs(Index n, double sample_rate) {
  return 2.0 * kPi * bin_freqs(n, sample_rate);
}

}  // namespace cpdm
