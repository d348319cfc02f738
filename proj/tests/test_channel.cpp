#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cpdm/bits.hpp"
#include "cpdm/channel.hpp"
#include "cpdm/constellation.hpp"
#include "cpdm/dsp.hpp"
#include "cpdm/fft.hpp"
#include "cpdm/transmitter.hpp"

using namespace cpdm;

namespace {

JonesSignal random_signal(Index n, double rate, double power_w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  JonesSignal s;
  s.x.sample_rate = s.y.sample_rate = rate;
  s.x.samples.resize(n);
  s.y.samples.resize(n);
  for (Index i = 0; i < n; ++i) {
    s.x.samples[i] = cd(g(rng), g(rng));
    s.y.samples[i] = cd(g(rng), g(rng));
  }
  const double scale = std::sqrt(power_w / total_power(s));
  s.x.samples *= scale;
  s.y.samples *= scale;
  return s;
}

// Band-limit so propagated comparisons are free of edge/Nyquist content.
JonesSignal band_limited_signal(Index n, double rate, double power_w,
                                uint64_t seed) {
  JonesSignal s = random_signal(n, rate, power_w, seed);
  for (ComplexWaveform* w : {&s.x, &s.y}) {
    Arraycd spec = fft(w->samples);
    Arrayd f = bin_freqs(n, rate);
    for (Index i = 0; i < n; ++i)
      if (std::abs(f[i]) > rate / 8.0) spec[i] = 0.0;
    w->samples = ifft(spec);
  }
  const double scale = std::sqrt(power_w / total_power(s));
  s.x.samples *= scale;
  s.y.samples *= scale;
  return s;
}

double max_dev(const JonesSignal& a, const JonesSignal& b) {
  return std::max((a.x.samples - b.x.samples).abs().maxCoeff(),
                  (a.y.samples - b.y.samples).abs().maxCoeff());
}

}  // namespace

TEST_CASE("fiber parameter conversions match the standard formulas") {
  FiberParams f;
  // D = 16.75 ps/nm/km at 1550 nm -> beta2 = -D lambda^2 / (2 pi c).
  const double expect_b2 =
      -16.75e-6 * 1550e-9 * 1550e-9 / (2.0 * kPi * kSpeedOfLight) * 1e27;
  CHECK(f.beta2_ps2_km() == doctest::Approx(expect_b2).epsilon(1e-9));
  // gamma = 2 pi n2 / (lambda Aeff).
  const double expect_g =
      2.0 * kPi * 26e-21 / (1550e-9 * 80e-12) * 1e3;  // 1/(W km)
  CHECK(f.gamma_w_km() == doctest::Approx(expect_g).epsilon(1e-9));
  // 0.2 dB/km as a power attenuation in Np/m.
  CHECK(f.alpha_np_m() ==
        doctest::Approx(0.2 / 1e3 * std::log(10.0) / 10.0).epsilon(1e-12));
}

TEST_CASE("dispersion-only propagation is all-pass") {
  FiberParams f;
  f.alpha_db_km = 0.0;
  f.gamma_override_w_km = 0.0;
  f.length_km = 120.0;
  JonesSignal in = random_signal(1 << 12, 112e9, 1e-3, 1);
  JonesSignal out = ssfm_propagate(in, f, StepRule{});
  CHECK(total_power(out) == doctest::Approx(total_power(in)).epsilon(1e-12));
}

TEST_CASE("cd_compensate exactly inverts a dispersion-only channel") {
  FiberParams f;
  f.alpha_db_km = 0.0;
  f.gamma_override_w_km = 0.0;
  f.length_km = 400.0;
  JonesSignal in = random_signal(1 << 12, 112e9, 1e-3, 2);
  JonesSignal out = ssfm_propagate(in, f, StepRule{});
  out.x = cd_compensate(out.x, f, 400.0, CdcMode::Freq);
  out.y = cd_compensate(out.y, f, 400.0, CdcMode::Freq);
  CHECK(max_dev(out, in) < 1e-9);
}

TEST_CASE("cw nonlinear phase matches the analytic Manakov value") {
  // Lossless, dispersionless fiber and a CW field: each polarization
  // acquires phi = (8/9) gamma (|Ex|^2+|Ey|^2) L exactly.
  FiberParams f;
  f.alpha_db_km = 0.0;
  f.beta2_override_ps2_km = 0.0;
  f.beta3_override_ps3_km = 0.0;
  f.length_km = 80.0;
  const double p_w = 5e-3;
  JonesSignal in;
  in.x.sample_rate = in.y.sample_rate = 112e9;
  in.x.samples = Arraycd::Constant(256, cd(std::sqrt(p_w / 2), 0));
  in.y.samples = Arraycd::Constant(256, cd(0, std::sqrt(p_w / 2)));
  JonesSignal out = ssfm_propagate(in, f, StepRule{});
  const double expect = 8.0 / 9.0 * f.gamma_w_km() * p_w * 80.0;
  const double got = std::arg(out.x.samples[7] / in.x.samples[7]);
  CHECK(got == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("attenuation-only propagation follows alpha exactly") {
  FiberParams f;
  f.gamma_override_w_km = 0.0;
  f.beta2_override_ps2_km = 0.0;
  f.beta3_override_ps3_km = 0.0;
  f.length_km = 80.0;
  JonesSignal in = random_signal(4096, 112e9, 1e-3, 3);
  JonesSignal out = ssfm_propagate(in, f, StepRule{});
  CHECK(lin_to_db(total_power(in) / total_power(out)) ==
        doctest::Approx(16.0).epsilon(1e-9));
}

TEST_CASE("split-step error shrinks when the step is halved") {
  FiberParams f;
  f.alpha_db_km = 0.0;
  f.length_km = 80.0;
  JonesSignal in = band_limited_signal(1 << 12, 112e9, 10e-3, 4);

  auto run = [&](double dz_km) {
    StepRule r;
    r.kind = StepRule::Kind::Fixed;
    r.dz_km = dz_km;
    return ssfm_propagate(in, f, r);
  };
  JonesSignal ref = run(0.0625);
  const double e1 = max_dev(run(1.0), ref);
  const double e2 = max_dev(run(0.5), ref);
  CHECK(e2 < e1);
  // The symmetrized splitting is 2nd-order accurate: halving the step
  // should cut the error by roughly 4 (allow a generous band).
  CHECK(e1 / e2 > 2.5);
}

TEST_CASE("adaptive stepping agrees with a fine fixed grid") {
  FiberParams f;
  f.length_km = 80.0;
  JonesSignal in = band_limited_signal(1 << 12, 112e9, 10e-3, 5);
  StepRule fine;
  fine.kind = StepRule::Kind::Fixed;
  fine.dz_km = 0.05;
  JonesSignal a = ssfm_propagate(in, f, StepRule{});
  JonesSignal b = ssfm_propagate(in, f, fine);
  CHECK(max_dev(a, b) / std::sqrt(total_power(in)) < 1e-3);
}

TEST_CASE("edfa applies gain and the formula ASE level") {
  AmplifierParams p;  // 16 dB, NF 4 dB
  const double psd = ase_psd_per_pol(p, 1550e-9);
  // PSD = nsp (G-1) h nu with nsp = NF/2 * G/(G-1) -> NF/2 * G * h nu.
  const double g = db_to_lin(16.0);
  const double hnu = kPlanck * kSpeedOfLight / 1550e-9;
  CHECK(psd == doctest::Approx(0.5 * db_to_lin(4.0) * g * hnu).epsilon(1e-9));

  JonesSignal in = random_signal(1 << 16, 112e9, 1e-5, 6);
  JonesSignal out = edfa(in, p, 1550e-9, 7);
  // Total added noise power = 2 pol x PSD x simulated bandwidth.
  const double expect_noise = 2.0 * psd * 112e9;
  const double got_noise = total_power(out) - g * total_power(in);
  CHECK(got_noise == doctest::Approx(expect_noise).epsilon(0.02));
  CHECK(out.noise_psd == doctest::Approx(2.0 * psd).epsilon(1e-9));
}

TEST_CASE("noiseless edfa is pure gain") {
  AmplifierParams p;
  p.noiseless = true;
  JonesSignal in = random_signal(1024, 112e9, 1e-4, 8);
  JonesSignal out = edfa(in, p, 1550e-9, 9);
  CHECK((out.x.samples - in.x.samples * std::sqrt(db_to_lin(16.0)))
            .abs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("rect obpf keeps the in-band white-noise fraction") {
  // White noise through a 100 GHz rectangular filter on a 448 GSa/s grid
  // keeps 100/448 of its power.
  JonesSignal in = random_signal(1 << 16, 448e9, 1e-3, 10);
  JonesSignal out = obpf(in, 100e9, FilterShape::Rect);
  CHECK(total_power(out) / total_power(in) ==
        doctest::Approx(100.0 / 448.0).epsilon(0.02));
}

TEST_CASE("gaussian obpf passes a centered narrowband signal") {
  JonesSignal in = band_limited_signal(1 << 12, 448e9, 1e-3, 11);
  JonesSignal out = obpf(in, 300e9, FilterShape::Gaussian, 2);
  CHECK(total_power(out) / total_power(in) > 0.98);
}

TEST_CASE("ase_load hits the requested bookkeeping OSNR") {
  JonesSignal in = random_signal(1 << 14, 112e9, 1e-3, 12);
  JonesSignal out = ase_load(in, 18.0, kOsnrRefBandwidth, 13);
  const double sig = total_power(out) - out.noise_power;
  const double osnr = lin_to_db(sig / (out.noise_psd * kOsnrRefBandwidth));
  CHECK(osnr == doctest::Approx(18.0).epsilon(0.01));
  // Asking for an OSNR above what is already possible must throw.
  CHECK_THROWS(ase_load(out, 40.0, kOsnrRefBandwidth, 14));
}

TEST_CASE("coupled propagation of one signal equals the scalar path") {
  FiberParams f;
  f.length_km = 80.0;
  JonesSignal in = band_limited_signal(1 << 12, 112e9, 2e-3, 15);
  JonesSignal a = ssfm_propagate(in, f, StepRule{});
  std::vector<JonesSignal> b = ssfm_propagate_coupled({in}, f, StepRule{});
  REQUIRE(b.size() == 1);
  CHECK(max_dev(a, b[0]) == 0.0);
}

TEST_CASE("co-propagating signals impose cross phase on each other") {
  FiberParams f;
  f.alpha_db_km = 0.0;
  f.beta2_override_ps2_km = 0.0;
  f.beta3_override_ps3_km = 0.0;
  f.length_km = 80.0;
  JonesSignal probe;
  probe.x.sample_rate = probe.y.sample_rate = 112e9;
  probe.x.samples = Arraycd::Constant(128, cd(1e-4, 0));  // weak CW probe
  probe.y.samples = Arraycd::Constant(128, cd(0, 0));
  JonesSignal pump = probe;
  const double pump_p = 10e-3;
  pump.x.samples = Arraycd::Constant(128, cd(std::sqrt(pump_p), 0));

  JonesSignal alone = ssfm_propagate_coupled({probe}, f, StepRule{})[0];
  JonesSignal with_pump =
      ssfm_propagate_coupled({probe, pump}, f, StepRule{})[0];
  const double alone_phi = std::arg(alone.x.samples[3]);
  const double with_phi = std::arg(with_pump.x.samples[3]);
  // The pump contributes (8/9) gamma P_pump L of extra phase on the probe.
  const double expect = 8.0 / 9.0 * f.gamma_w_km() * pump_p * 80.0;
  CHECK(with_phi - alone_phi == doctest::Approx(expect).epsilon(1e-3));
}

TEST_CASE("run_link matches the coupled variant and is seed deterministic") {
  LinkPlan plan;
  plan.n_spans = 2;
  FiberParams f;
  AmplifierParams amp;
  JonesSignal in = band_limited_signal(1 << 12, 112e9, 0.5e-3, 16);
  JonesSignal a = run_link(in, plan, f, amp, 99);
  JonesSignal b = run_link_coupled({in}, plan, f, amp, 99)[0];
  CHECK(max_dev(a, b) == 0.0);
  JonesSignal c = run_link(in, plan, f, amp, 100);
  CHECK(max_dev(a, c) > 0.0);
}

TEST_CASE("each coupled signal draws independent ASE") {
  LinkPlan plan;
  plan.n_spans = 1;
  plan.pol_rotation = false;
  FiberParams f;
  f.gamma_override_w_km = 0.0;
  AmplifierParams amp;
  JonesSignal in = band_limited_signal(1 << 12, 112e9, 0.5e-3, 17);
  auto out = run_link_coupled({in, in}, plan, f, amp, 55);
  // Same input, same channel: any difference is the per-signal noise.
  CHECK(max_dev(out[0], out[1]) > 0.0);
  // And the noise must be uncorrelated between the two copies.
  Arraycd n0 = out[0].x.samples - out[1].x.samples;
  const double rho =
      std::abs((out[0].x.samples * n0.conjugate()).sum()) /
      (std::sqrt(out[0].x.samples.abs2().sum()) * std::sqrt(n0.abs2().sum()));
  CHECK(rho < 0.1);
}

TEST_CASE("per-span polarization rotation preserves power and pairs") {
  LinkPlan plan;
  plan.n_spans = 4;
  plan.obpf_bandwidth_hz = 1e15;  // all-pass: isolate the rotation itself
  FiberParams f;
  f.gamma_override_w_km = 0.0;
  AmplifierParams amp;
  amp.noiseless = true;
  JonesSignal a = band_limited_signal(1 << 12, 112e9, 1e-3, 18);
  JonesSignal b = band_limited_signal(1 << 12, 112e9, 1e-3, 19);
  auto out = run_link_coupled({a, b}, plan, f, amp, 77);
  // Loss-matched gain: power returns to launch level.
  CHECK(total_power(out[0]) == doctest::Approx(total_power(a)).epsilon(1e-6));
  // The rotation is common to both signals, so the inner product between
  // the two fields is invariant (same unitary on both).
  const cd before = (a.x.samples * b.x.samples.conjugate() +
                     a.y.samples * b.y.samples.conjugate())
                        .sum();
  const cd after = (out[0].x.samples * out[1].x.samples.conjugate() +
                    out[0].y.samples * out[1].y.samples.conjugate())
                       .sum();
  // Dispersion is identical on both, so it cancels in the inner product.
  CHECK(std::abs(after - before) / std::abs(before) < 1e-6);
}
