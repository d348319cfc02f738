#include "cpdm/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cpdm/fft.hpp"

namespace cpdm {

namespace {

constexpr double kManakov = 8.0 / 9.0;

// Reverse Bessel polynomial theta_n evaluated at s.
cd reverse_bessel(int order, cd s) {
  cd tm2 = 1.0;           // theta_0
  cd tm1 = s + 1.0;       // theta_1
  if (order == 0) return tm2;
  for (int k = 2; k <= order; ++k) {
    cd t = static_cast<double>(2 * k - 1) * tm1 + s * s * tm2;
    tm2 = tm1;
    tm1 = t;
  }
  return tm1;
}

// Normalized angular frequency where the order-n Bessel prototype hits -3 dB.
double bessel_w3db(int order) {
  const double dc = std::abs(reverse_bessel(order, 0.0));
  double lo = 0.1, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double mag2 = std::norm(dc / reverse_bessel(order, cd(0, mid)));
    (mag2 > 0.5 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Arraycd apply_freq_response(const Arraycd& v, const Arraycd& h) {
  return ifft(Arraycd(fft(v) * h));
}

}  // namespace

ComplexWaveform bessel_filter(const ComplexWaveform& w, int order,
                              double bw_3db_hz) {
  if (bw_3db_hz >= w.sample_rate / 2.0)
    throw std::invalid_argument("bessel_filter: bandwidth at or above Nyquist");
  static thread_local std::pair<int, double> cached{-1, 0.0};
  if (cached.first != order) cached = {order, bessel_w3db(order)};
  const double w3 = cached.second;

  const Index n = w.size();
  const Arrayd f = bin_freqs(n, w.sample_rate);
  const cd dc = reverse_bessel(order, 0.0);
  Arraycd h(n);
  for (Index k = 0; k < n; ++k)
    h[k] = dc / reverse_bessel(order, cd(0, f[k] / bw_3db_hz * w3));
  ComplexWaveform out = w;
  out.samples = apply_freq_response(w.samples, h);
  return out;
}

ComplexWaveform qi_compensate(const ComplexWaveform& w) {
  const Index n = w.size();
  if (n == 0) throw std::invalid_argument("qi_compensate: empty input");
  Arrayd i = w.samples.real();
  Arrayd q = w.samples.imag();
  const double p_in = w.samples.abs2().mean();
  i -= i.mean();
  q -= q.mean();
  const double pii = i.square().mean();
  if (pii <= 0) throw std::invalid_argument("qi_compensate: degenerate input");
  const double rho = (i * q).mean() / pii;
  q -= rho * i;
  const double pqq = q.square().mean();
  if (pqq <= 0) throw std::invalid_argument("qi_compensate: degenerate input");
  i /= std::sqrt(pii);
  q /= std::sqrt(pqq);
  ComplexWaveform out = w;
  const double scale = std::sqrt(p_in / 2.0);
  out.samples = scale * (i.cast<cd>() + cd(0, 1) * q.cast<cd>());
  return out;
}

namespace {

Arraycd cdc_response(Index n, double rate, const FiberParams& f, double l_m) {
  const Arrayd w = angular_freqs(n, rate);
  const Arrayd phase =
      0.5 * f.beta2_s2_m() * l_m * w.square() - f.beta3_s3_m() / 6.0 * l_m * w.cube();
  return phase.cos().cast<cd>() + cd(0, 1) * phase.sin().cast<cd>();
}

}  // namespace

ComplexWaveform cd_compensate(const ComplexWaveform& w, const FiberParams& f,
                              double distance_km, CdcMode mode, int n_taps) {
  if (distance_km < 0)
    throw std::invalid_argument("cd_compensate: negative distance");
  if (distance_km == 0) return w;
  const double l_m = distance_km * 1e3;
  ComplexWaveform out = w;
  if (mode == CdcMode::Freq) {
    out.samples = apply_freq_response(w.samples, cdc_response(w.size(), w.sample_rate, f, l_m));
    return out;
  }
  // Time mode: windowed impulse response of the same all-pass, applied by
  // FFT convolution. Minimum tap count ~ 2*pi*|beta2|*L*B^2.
  if (n_taps <= 0) {
    const double b = w.sample_rate;
    n_taps = static_cast<Index>(std::ceil(
                 2.0 * kPi * std::abs(f.beta2_s2_m()) * l_m * b * b * 1.2)) |
             1;
  }
  Index grid = 1;
  while (grid < 4 * static_cast<Index>(n_taps)) grid <<= 1;
  Arraycd hgrid = ifft(cdc_response(grid, w.sample_rate, f, l_m));
  const Index half = n_taps / 2;
  const Index n = w.size();
  Arraycd taps_circ = Arraycd::Zero(n);
  for (Index k = -half; k <= half; ++k)
    taps_circ[(n + k) % n] = hgrid[(grid + k) % grid];
  out.samples = ifft(Arraycd(fft(w.samples) * fft(taps_circ)));
  return out;
}

std::pair<ComplexWaveform, ComplexWaveform> dbp(const ComplexWaveform& wx,
                                                const ComplexWaveform& wy,
                                                const DbpPlan& plan) {
  if (wx.size() != wy.size() || wx.sample_rate != wy.sample_rate)
    throw std::invalid_argument("dbp: polarization pair mismatch");
  const Index n = wx.size();
  const double rate = wx.sample_rate;
  const FiberParams& f = plan.fiber;
  const double alpha = f.alpha_np_m();
  const double gamma_eff = kManakov * f.gamma_w_m() * plan.xi_nl;
  const double span_m = plan.span_km * 1e3;
  const double dz = span_m / plan.steps_per_span;

  const Arrayd w = angular_freqs(n, rate);
  // Backward linear operator per meter: conjugate phase of the forward
  // fiber plus gain that retraces the loss profile.
  const Arrayd phase_per_m =
      0.5 * f.beta2_s2_m() * w.square() - f.beta3_s3_m() / 6.0 * w.cube();
  const double half_amp = std::exp(0.5 * alpha * dz / 2.0);
  const Arrayd half_phase = phase_per_m * (dz / 2.0);
  const Arraycd half_lin =
      half_amp * (half_phase.cos().cast<cd>() + cd(0, 1) * half_phase.sin().cast<cd>());
  const double span_gain_amp = std::exp(0.5 * alpha * span_m);  // undone per span

  Arraycd x = wx.samples, y = wy.samples;
  for (int s = 0; s < plan.n_spans; ++s) {
    x /= span_gain_amp;  // undo the post-span amplifier
    y /= span_gain_amp;
    Arraycd X = fft(x), Y = fft(y);
    for (int k = 0; k < plan.steps_per_span; ++k) {
      X *= half_lin;
      Y *= half_lin;
      if (gamma_eff != 0) {
        x = ifft(X);
        y = ifft(Y);
        const Arrayd phi = -gamma_eff * dz * (x.abs2() + y.abs2());
        const Arraycd rot = phi.cos().cast<cd>() + cd(0, 1) * phi.sin().cast<cd>();
        x *= rot;
        y *= rot;
        X = fft(x);
        Y = fft(y);
      }
      X *= half_lin;
      Y *= half_lin;
    }
    x = ifft(X);
    y = ifft(Y);
  }
  ComplexWaveform ox = wx, oy = wy;
  ox.samples = std::move(x);
  oy.samples = std::move(y);
  return {std::move(ox), std::move(oy)};
}

namespace {

cd cubic_at(const Arraycd& v, double pos) {
  const Index n = v.size();
  const Index k = static_cast<Index>(std::floor(pos));
  const double t = pos - static_cast<double>(k);
  auto at = [&](Index i) { return v[std::clamp<Index>(i, 0, n - 1)]; };
  const cd p0 = at(k - 1), p1 = at(k), p2 = at(k + 1), p3 = at(k + 2);
  const double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (p2 - p0) * t +
                (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3);
}

}  // namespace

TimingResult timing_recover(const std::vector<ComplexWaveform>& chans,
                            double loop_bw) {
  if (chans.empty()) throw std::invalid_argument("timing_recover: no channels");
  const Index n = chans[0].size();
  for (const auto& c : chans)
    if (c.size() != n)
      throw std::invalid_argument("timing_recover: channel length mismatch");

  double power = 0.0;
  for (const auto& c : chans) power += c.samples.abs2().mean();
  if (power <= 0) throw std::invalid_argument("timing_recover: zero power");

  const double kp = loop_bw;
  const double ki = 0.25 * loop_bw * loop_bw;

  struct LoopState {
    double frac = 0.0;   // fractional timing offset, input samples
    double integ = 0.0;  // clock-rate correction
  };

  // One pass of the Gardner loop; emits symbol-aligned strobes when out
  // is non-null. Error is pooled across channels.
  auto run = [&](LoopState st, Index nsym, std::vector<Arraycd>* out,
                 Arrayd* err_trace) {
    double pos = st.frac;
    Index emitted = 0;
    for (Index k = 0; k < nsym; ++k) {
      if (pos < 1.0) pos += 2.0;
      if (pos + 4.0 >= static_cast<double>(n)) break;
      double e = 0.0;
      for (std::size_t c = 0; c < chans.size(); ++c) {
        const cd strobe = cubic_at(chans[c].samples, pos);
        const cd mid = cubic_at(chans[c].samples, pos + 1.0);
        const cd next = cubic_at(chans[c].samples, pos + 2.0);
        e += (std::conj(mid) * (next - strobe)).real();
        if (out) {
          (*out)[c][2 * emitted] = strobe;
          (*out)[c][2 * emitted + 1] = mid;
        }
      }
      e /= power;
      if (err_trace && k < err_trace->size()) (*err_trace)[k] = e;
      st.integ += ki * e;
      pos += 2.0 - (kp * e + st.integ);
      ++emitted;
    }
    st.frac = pos - std::floor(pos / 2.0) * 2.0;
    return std::make_pair(st, emitted);
  };

  // Warmup to converge the loop, then a full tracking pass.
  const Index nsym = n / 2;
  const Index warm = std::min<Index>(nsym, 8192);
  LoopState st = run(LoopState{}, warm, nullptr, nullptr).first;

  std::vector<Arraycd> aligned(chans.size(), Arraycd::Zero(n));
  Arrayd err(nsym);
  err.setZero();
  auto [final_st, emitted] = run(st, nsym, &aligned, &err);

  TimingResult r;
  r.residual_ui = final_st.frac > 1.0 ? final_st.frac - 2.0 : final_st.frac;
  // Divergence check: late-half error variance should not exceed the
  // early half once converged.
  if (emitted > 512) {
    const Index h = emitted / 2;
    const double v0 = err.segment(0, h).square().mean();
    const double v1 = err.segment(h, emitted - h).square().mean();
    r.converged = v1 <= 4.0 * v0 + 1e-12;
  }
  for (std::size_t c = 0; c < chans.size(); ++c) {
    ComplexWaveform w = chans[c];
    w.samples = aligned[c].head(2 * emitted);
    r.aligned.push_back(std::move(w));
  }
  return r;
}

FoeResult foe(const ComplexWaveform& symbols, const Constellation8Qam& c,
              double search_range_hz) {
  const Index n = symbols.size();
  if (n == 0) throw std::invalid_argument("foe: empty input");
  const double rate = symbols.sample_rate;  // 1 sps => symbol rate
  const double rms = std::sqrt(symbols.samples.abs2().mean());
  const double ring_gate = 0.5 * (c.inner_radius() + c.outer_radius()) * rms;

  Index nfft = 1;
  while (nfft < 4 * n) nfft <<= 1;
  Arraycd s4 = Arraycd::Zero(nfft);
  for (Index i = 0; i < n; ++i) {
    const cd v = symbols.samples[i];
    if (std::abs(v) > ring_gate) {
      const cd u = v / rms;
      s4[i] = u * u * u * u;
    }
  }
  fft_inplace(s4);
  const Arrayd mag = s4.abs();
  const Arrayd freqs = bin_freqs(nfft, rate);
  Index best = -1;
  double best_mag = 0.0;
  for (Index k = 0; k < nfft; ++k) {
    if (std::abs(freqs[k]) > 4.0 * search_range_hz) continue;
    if (mag[k] > best_mag) {
      best_mag = mag[k];
      best = k;
    }
  }
  FoeResult r;
  r.corrected = symbols;
  if (best < 0 || best_mag < 6.0 * mag.mean()) {
    r.peak_found = false;
    r.offset_hz = 0.0;
    return r;
  }
  // Parabolic refinement around the peak bin.
  const double ym = mag[(best + nfft - 1) % nfft];
  const double y0 = mag[best];
  const double yp = mag[(best + 1) % nfft];
  const double denom = ym - 2.0 * y0 + yp;
  const double delta = (std::abs(denom) > 1e-30) ? 0.5 * (ym - yp) / denom : 0.0;
  r.offset_hz = (freqs[best] + delta * rate / static_cast<double>(nfft)) / 4.0;
  for (Index i = 0; i < n; ++i)
    r.corrected.samples[i] =
        symbols.samples[i] *
        std::polar(1.0, -2.0 * kPi * r.offset_hz * static_cast<double>(i) / rate);
  return r;
}

CpeResult cpe_bps(const ComplexWaveform& symbols, const Constellation8Qam& c,
                  int b_test_phases, int window) {
  const Index n = symbols.size();
  if (n == 0) throw std::invalid_argument("cpe_bps: empty input");
  if (b_test_phases < 8)
    throw std::invalid_argument("cpe_bps: need at least 8 test phases");
  const int B = b_test_phases;
  const double rms = std::sqrt(symbols.samples.abs2().mean());

  // Quadrant-folded reference set: the constellation under all four
  // pi/2 rotations. Makes the estimate invariant to quadrant rotations.
  std::vector<cd> ref;
  for (int q = 0; q < 4; ++q) {
    const cd rot = std::polar(1.0, q * kPi / 2.0);
    for (const cd& p : c.points) ref.push_back(p * rot);
  }

  // Per-symbol, per-phase minimum distance, then sliding-window sums.
  Eigen::MatrixXd d(n, B);
  for (int b = 0; b < B; ++b) {
    const cd derot = std::polar(1.0, -b * kPi / (2.0 * B));
    for (Index i = 0; i < n; ++i) {
      const cd y = symbols.samples[i] / rms * derot;
      double m = std::norm(y - ref[0]);
      for (std::size_t k = 1; k < ref.size(); ++k)
        m = std::min(m, std::norm(y - ref[k]));
      d(i, b) = m;
    }
  }
  Eigen::MatrixXd prefix(n + 1, B);
  prefix.row(0).setZero();
  for (Index i = 0; i < n; ++i) prefix.row(i + 1) = prefix.row(i) + d.row(i);

  const Index hw = std::max<Index>(1, window / 2);
  CpeResult r;
  r.corrected = symbols;
  r.phase_track.resize(n);
  double prev = 0.0;
  bool have_prev = false;
  const double quarter = kPi / 2.0;
  for (Index i = 0; i < n; ++i) {
    const Index lo = std::max<Index>(0, i - hw);
    const Index hi = std::min<Index>(n, i + hw + 1);
    int best_b = 0;
    double best = prefix(hi, 0) - prefix(lo, 0);
    for (int b = 1; b < B; ++b) {
      const double s = prefix(hi, b) - prefix(lo, b);
      if (s < best) {
        best = s;
        best_b = b;
      }
    }
    double phi = best_b * quarter / B;
    if (have_prev) {
      // Unwrap across the pi/2 ambiguity to the branch nearest prev.
      const double k = std::round((prev - phi) / quarter);
      const double cand = phi + k * quarter;
      if (std::abs(cand - prev) > quarter / 2.0 + 1e-12) ++r.cycle_slips;
      phi = cand;
    }
    prev = phi;
    have_prev = true;
    r.phase_track[i] = phi;
    r.corrected.samples[i] = symbols.samples[i] * std::polar(1.0, -phi);
  }
  return r;
}

}  // namespace cpdm
