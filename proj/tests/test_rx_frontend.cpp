#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>

#include "cpdm/bits.hpp"
#include "cpdm/constellation.hpp"
#include "cpdm/fft.hpp"
#include "cpdm/rx_frontend.hpp"
#include "cpdm/transmitter.hpp"

using namespace cpdm;

namespace {

CpdmField test_field(Index n_sym, int sps, uint64_t seed) {
  const double symbol_rate = 28e9 / 3.0;
  TributarySet t;
  uint64_t s = seed;
  for (auto* w : t.all()) {
    ComplexWaveform sym = map_8qam(
        generate_bits(3 * std::size_t(n_sym), s++, BitGen::Prbs23), rect8qam(),
        symbol_rate);
    LaserParams lp;
    lp.linewidth_hz = 0.0;
    lp.power_dbm = 0.0;
    ComplexWaveform carrier = laser(lp, n_sym * sps, symbol_rate * sps, 1);
    *w = iq_modulate(carrier, sym, sps, Pulse::Rrc, 0.2, IqModulatorParams{});
  }
  return cpdm_mux(t, CpdmMuxModel{});
}

PhotodiodeParams quiet_pd() {
  PhotodiodeParams pd;
  pd.noiseless = true;
  return pd;
}

double norm_xcorr(const Arraycd& a, const Arraycd& b) {
  return std::abs((a * b.conjugate()).sum()) /
         (std::sqrt(a.abs2().sum()) * std::sqrt(b.abs2().sum()));
}

}  // namespace

TEST_CASE("noise-free detection recovers each tributary up to one scalar") {
  CpdmField f = test_field(512, 8, 3);
  LaserParams lo;
  lo.linewidth_hz = 0.0;
  FrontendOutput out =
      coherent_detect(f, lo, 0.0, quiet_pd(), 0.0, CpdmMuxModel{}, 1);
  REQUIRE(out.branches.size() == 4);
  // Rebuild the reference tributaries.
  CpdmField ref = test_field(512, 8, 3);
  const Arraycd* refs[4] = {&ref.signals[0].x.samples, &ref.signals[0].y.samples,
                            &ref.signals[1].x.samples,
                            &ref.signals[1].y.samples};
  for (int k = 0; k < 4; ++k)
    CHECK(norm_xcorr(out.branches[k].samples, *refs[k]) >
          1.0 - 1e-9);
}

TEST_CASE("dark-signal output variance matches the noise formulas") {
  // Zero optical signal: photocurrent variance is thermal + dark shot
  // noise only, checked against 4kT B / R + 2 q I_d B per quadrature pair.
  CpdmField f = test_field(256, 8, 5);
  for (auto& s : f.signals) {
    s.x.samples *= 0.0;
    s.y.samples *= 0.0;
  }
  LaserParams lo;
  lo.linewidth_hz = 0.0;
  PhotodiodeParams pd;  // noisy
  FrontendOutput out = coherent_detect(f, lo, 0.0, pd, 0.0, CpdmMuxModel{}, 7);
  const double expect =
      2.0 * (4.0 * kBoltzmann * pd.temperature_k * pd.thermal_bandwidth_hz /
                 pd.load_resistance_ohm +
             2.0 * kElementaryCharge * pd.dark_current_a *
                 pd.thermal_bandwidth_hz);
  double var = 0.0;
  for (const auto& b : out.branches) var += b.samples.abs2().mean();
  var /= double(out.branches.size());
  CHECK(var == doctest::Approx(expect).epsilon(0.05));
}

TEST_CASE("shot noise scales linearly with LO power") {
  CpdmField f = test_field(256, 8, 6);
  for (auto& s : f.signals) {
    s.x.samples *= 0.0;
    s.y.samples *= 0.0;
  }
  PhotodiodeParams pd;
  pd.dark_current_a = 0.0;
  pd.temperature_k = 1e-6;  // freeze thermal noise, keep shot noise
  auto variance_at = [&](double lo_dbm, uint64_t seed) {
    LaserParams lo;
    lo.linewidth_hz = 0.0;
    lo.power_dbm = lo_dbm;
    FrontendOutput out = coherent_detect(f, lo, 0.0, pd, 0.0, CpdmMuxModel{}, seed);
    double v = 0.0, n = 0.0;
    for (const auto& b : out.branches) {
      v += b.samples.abs2().sum();
      n += double(b.samples.size());
    }
    // Normalize away the sqrt(P_LO) conversion gain of the hybrid output.
    return v / n / dbm_to_watt(lo_dbm);
  };
  // Shot variance grows with P_LO while the conversion gain scales the
  // signal by sqrt(P_LO): the normalized quotient stays put only if the
  // underlying variance is linear in P_LO.
  const double r = variance_at(23.0, 8) / variance_at(20.0, 8);
  CHECK(r == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("LO frequency offset rotates the output at the set rate") {
  CpdmField f = test_field(1 << 12, 8, 9);
  LaserParams lo;
  lo.linewidth_hz = 0.0;
  const double df = 500e6;
  FrontendOutput with =
      coherent_detect(f, lo, df, quiet_pd(), 0.0, CpdmMuxModel{}, 1);
  FrontendOutput without =
      coherent_detect(f, lo, 0.0, quiet_pd(), 0.0, CpdmMuxModel{}, 1);
  Arraycd prod = with.branches[0].samples *
                 without.branches[0].samples.conjugate();
  Arraycd spec = fft(prod);
  Index peak;
  spec.abs().maxCoeff(&peak);
  Arrayd freqs = bin_freqs(prod.size(), with.branches[0].sample_rate);
  const double df_bin = freqs[1] - freqs[0];
  // Mixing against an LO that sits +df above the carrier shifts the
  // baseband output down by df.
  CHECK(std::abs(freqs[peak] + df) <= df_bin);
}

TEST_CASE("detection rejects a powerless LO") {
  CpdmField f = test_field(64, 4, 10);
  LaserParams lo;
  lo.power_dbm = -std::numeric_limits<double>::infinity();  // zero watts
  CHECK_THROWS(coherent_detect(f, lo, 0.0, quiet_pd(), 0.0, CpdmMuxModel{}, 1));
}

TEST_CASE("physical mode projects the combined field back to four branches") {
  CpdmField f = test_field(512, 8, 11);
  CpdmMuxModel model;
  model.mode = MuxMode::PhysicalJones;
  // Rebuild the tributaries, mux physically, and detect in physical mode.
  TributarySet t;
  uint64_t s = 11;
  const double symbol_rate = 28e9 / 3.0;
  for (auto* w : t.all()) {
    ComplexWaveform sym = map_8qam(generate_bits(3 * 512, s++, BitGen::Prbs23),
                                   rect8qam(), symbol_rate);
    LaserParams lp;
    lp.linewidth_hz = 0.0;
    ComplexWaveform carrier = laser(lp, 512 * 8, symbol_rate * 8, 1);
    *w = iq_modulate(carrier, sym, 8, Pulse::Rrc, 0.2, IqModulatorParams{});
  }
  CpdmField phys = cpdm_mux(t, model);
  REQUIRE(phys.signals.size() == 1);
  LaserParams lo;
  lo.linewidth_hz = 0.0;
  FrontendOutput out =
      coherent_detect(phys, lo, 0.0, quiet_pd(), 0.0, model, 1);
  CHECK(out.branches.size() == 4);
  // The rank-2 network mixes tributaries; each output should still be
  // dominated by its own channel (correlation clearly above crosstalk).
  CHECK(norm_xcorr(out.branches[0].samples, t.rcp_h.samples) > 0.7);
}

TEST_CASE("adc at the input rate with infinite bits is the identity") {
  ComplexWaveform w;
  w.sample_rate = 112e9;
  w.samples = Arraycd::Random(4096);
  AdcParams p;
  p.sample_rate = 112e9;
  ComplexWaveform out = adc(w, p, 1);
  CHECK((out.samples - w.samples).abs().maxCoeff() == 0.0);
}

TEST_CASE("adc samples-per-bit sets the per-tributary rate") {
  AdcParams p;
  p.samples_per_bit = 2;
  CHECK(p.rate_per_tributary() == doctest::Approx(56e9));
  ComplexWaveform w;
  w.sample_rate = 112e9;
  w.samples = Arraycd::Random(1 << 12);
  ComplexWaveform out = adc(w, p, 1);
  CHECK(out.sample_rate == doctest::Approx(56e9));
  CHECK(out.size() == (1 << 11));
}

TEST_CASE("adc rejects upsampling requests") {
  ComplexWaveform w;
  w.sample_rate = 56e9;
  w.samples = Arraycd::Random(256);
  AdcParams p;
  p.sample_rate = 112e9;
  CHECK_THROWS(adc(w, p, 1));
}

TEST_CASE("quantization SNR gains 6 dB per bit") {
  // Gaussian samples exercise the full code range, so the white
  // quantization-noise model applies (a pure tone's error is correlated).
  const Index n = 1 << 16;
  ComplexWaveform w;
  w.sample_rate = 112e9;
  w.samples.resize(n);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Index i = 0; i < n; ++i) w.samples[i] = cd(g(rng), g(rng));
  auto snr_db = [&](int bits) {
    AdcParams p;
    p.sample_rate = 112e9;
    p.bits = bits;
    ComplexWaveform q = adc(w, p, 1);
    const double noise = (q.samples - w.samples).abs2().mean();
    return lin_to_db(w.samples.abs2().mean() / noise);
  };
  const double s7 = snr_db(7);
  const double s8 = snr_db(8);
  CHECK(std::abs(s8 - s7 - 6.02) < 0.5);
  // Gaussian loading keeps most samples well below the clipping point, so
  // the ideal full-scale-sine figure is an upper bound with headroom loss.
  CHECK(s8 > 38.0);
  CHECK(s8 < 6.02 * 8 + 1.76);
}

TEST_CASE("adc is deterministic under a fixed seed") {
  ComplexWaveform w;
  w.sample_rate = 112e9;
  w.samples = Arraycd::Random(4096);
  AdcParams p;
  p.samples_per_bit = 3;
  p.bits = 6;
  ComplexWaveform a = adc(w, p, 42);
  ComplexWaveform b = adc(w, p, 42);
  CHECK((a.samples - b.samples).abs().maxCoeff() == 0.0);
}
