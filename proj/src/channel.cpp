#include "cpdm/channel.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "cpdm/fft.hpp"
#include "cpdm/seed.hpp"

namespace cpdm {

namespace {

constexpr double kManakov = 8.0 / 9.0;

void add_complex_noise(Arraycd& v, double variance, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  for (Index i = 0; i < v.size(); ++i) v[i] += cd(normal(rng), normal(rng));
}

}  // namespace

double FiberParams::beta2_ps2_km() const {
  if (beta2_override_ps2_km) return *beta2_override_ps2_km;
  const double d_si = dispersion_ps_nm_km * 1e-6;  // s/m^2
  return -d_si * wavelength_m * wavelength_m / (2.0 * kPi * kSpeedOfLight) * 1e27;
}

double FiberParams::beta3_ps3_km() const {
  if (beta3_override_ps3_km) return *beta3_override_ps3_km;
  const double d_si = dispersion_ps_nm_km * 1e-6;   // s/m^2
  const double s_si = slope_ps_nm2_km * 1e3;        // s/m^3
  const double u = wavelength_m / (2.0 * kPi * kSpeedOfLight);
  return u * u * (wavelength_m * wavelength_m * s_si + 2.0 * wavelength_m * d_si) * 1e39;
}

double FiberParams::gamma_w_km() const {
  if (gamma_override_w_km) return *gamma_override_w_km;
  return 2.0 * kPi * n2_m2_w / (wavelength_m * a_eff_m2) * 1e3;
}

double FiberParams::alpha_np_m() const {
  return alpha_db_km * std::log(10.0) / 10.0 * 1e-3;
}
double FiberParams::beta2_s2_m() const { return beta2_ps2_km() * 1e-27; }
double FiberParams::beta3_s3_m() const { return beta3_ps3_km() * 1e-39; }
double FiberParams::gamma_w_m() const { return gamma_w_km() * 1e-3; }

std::vector<JonesSignal> ssfm_propagate_coupled(
    const std::vector<JonesSignal>& sigs, const FiberParams& f,
    const StepRule& step) {
  if (sigs.empty())
    throw std::invalid_argument("ssfm_propagate: no signals");
  const Index n = sigs[0].size();
  if (n == 0) throw std::invalid_argument("ssfm_propagate: empty signal");
  const double rate = sigs[0].sample_rate();
  for (const auto& s : sigs)
    if (s.size() != n || s.sample_rate() != rate)
      throw std::invalid_argument("ssfm_propagate: signal grids differ");
  const double length_m = f.length_km * 1e3;
  const double alpha = f.alpha_np_m();
  const double gamma_eff = kManakov * f.gamma_w_m();

  // Per-meter linear operator: exp(-alpha/2 - j(beta2/2)w^2 + j(beta3/6)w^3).
  const Arrayd w = angular_freqs(n, rate);
  const Arrayd phase_per_m =
      -0.5 * f.beta2_s2_m() * w.square() + f.beta3_s3_m() / 6.0 * w.cube();

  // Flat list of field components; the Kerr phase couples all of them.
  std::vector<Arraycd> t(2 * sigs.size());
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    t[2 * i] = sigs[i].x.samples;
    t[2 * i + 1] = sigs[i].y.samples;
  }
  Arrayd intensity = Arrayd::Zero(n);
  for (const auto& v : t) intensity += v.abs2();
  const double peak0 = intensity.maxCoeff();

  std::vector<Arraycd> spec(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) spec[i] = fft(t[i]);
  double z = 0.0;
  auto apply_linear = [&](double dz) {
    const Arrayd amp = Arrayd::Constant(n, std::exp(-0.5 * alpha * dz));
    const Arraycd factor =
        (amp * (phase_per_m * dz).cos()).cast<cd>() +
        cd(0, 1) * (amp * (phase_per_m * dz).sin()).cast<cd>();
    for (auto& s : spec) s *= factor;
  };

  while (z < length_m - 1e-9) {
    double dz;
    const double peak = peak0 * std::exp(-alpha * z);
    if (step.kind == StepRule::Kind::Fixed) {
      dz = step.dz_km * 1e3;
      if (gamma_eff * peak * dz > 0.1)
        throw std::runtime_error(
            "ssfm_propagate: fixed step too coarse (nonlinear phase per step > 0.1 rad)");
    } else {
      dz = (gamma_eff * peak > 0) ? step.max_phase_rad / (gamma_eff * peak)
                                  : step.max_dz_km * 1e3;
      dz = std::min(dz, step.max_dz_km * 1e3);
    }
    dz = std::min(dz, length_m - z);

    apply_linear(0.5 * dz);
    if (gamma_eff > 0) {
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = ifft(spec[i]);
      intensity.setZero();
      for (const auto& v : t) intensity += v.abs2();
      const Arrayd phi = gamma_eff * dz * intensity;
      const Arraycd rot = phi.cos().cast<cd>() + cd(0, 1) * phi.sin().cast<cd>();
      for (std::size_t i = 0; i < t.size(); ++i) spec[i] = fft(Arraycd(t[i] * rot));
    }
    apply_linear(0.5 * dz);
    z += dz;
  }

  std::vector<JonesSignal> out(sigs.begin(), sigs.end());
  const double loss = std::exp(-alpha * length_m);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].x.samples = ifft(spec[2 * i]);
    out[i].y.samples = ifft(spec[2 * i + 1]);
    out[i].noise_psd = sigs[i].noise_psd * loss;
    out[i].noise_power = sigs[i].noise_power * loss;
  }
  return out;
}

JonesSignal ssfm_propagate(const JonesSignal& sig, const FiberParams& f,
                           const StepRule& step) {
  return ssfm_propagate_coupled({sig}, f, step)[0];
}

double ase_psd_per_pol(const AmplifierParams& p, double wavelength_m) {
  const double g = db_to_lin(p.gain_db);
  if (g <= 1.0) return 0.0;
  const double nsp =
      p.n_sp ? *p.n_sp : db_to_lin(p.noise_figure_db) * g / (2.0 * (g - 1.0));
  const double nu = kSpeedOfLight / wavelength_m;
  return nsp * kPlanck * nu * (g - 1.0);
}

JonesSignal edfa(const JonesSignal& sig, const AmplifierParams& p,
                 double wavelength_m, uint64_t seed) {
  const double g = db_to_lin(p.gain_db);
  JonesSignal out = sig;
  out.x.samples *= std::sqrt(g);
  out.y.samples *= std::sqrt(g);
  out.noise_psd *= g;
  out.noise_power *= g;
  if (!p.noiseless) {
    const double s_pol = ase_psd_per_pol(p, wavelength_m);
    const double var = s_pol * sig.sample_rate();  // noise power over full band
    std::mt19937_64 rng(seed);
    add_complex_noise(out.x.samples, var, rng);
    add_complex_noise(out.y.samples, var, rng);
    out.noise_psd += 2.0 * s_pol;
    out.noise_power += 2.0 * var;
  }
  return out;
}

JonesSignal obpf(const JonesSignal& sig, double bandwidth_hz, FilterShape shape,
                 int gaussian_order) {
  const double rate = sig.sample_rate();
  if (bandwidth_hz >= rate)
    throw std::invalid_argument("obpf: bandwidth must be below the sample rate");
  const Index n = sig.size();
  const Arrayd f = bin_freqs(n, rate);
  Arrayd h(n);
  if (shape == FilterShape::Rect) {
    h = (f.abs() <= bandwidth_hz / 2.0).cast<double>();
  } else {
    const Arrayd u = (2.0 * f / bandwidth_hz).abs();
    h = (-0.5 * std::log(2.0) * u.pow(2 * gaussian_order)).exp();
  }
  JonesSignal out = sig;
  out.x.samples = ifft(Arraycd(fft(sig.x.samples) * h.cast<cd>()));
  out.y.samples = ifft(Arraycd(fft(sig.y.samples) * h.cast<cd>()));
  const double enbw = h.square().sum() * rate / static_cast<double>(n);
  out.noise_power = std::min(sig.noise_power, sig.noise_psd * enbw);
  return out;
}

namespace {

// A filter wider than the simulated spectral window passes everything; on
// coarse simulation grids the physical 100-GHz OBPF degenerates to that.
void apply_obpf(std::vector<JonesSignal>& s, const LinkPlan& plan) {
  if (s.empty() || plan.obpf_bandwidth_hz >= s[0].sample_rate()) return;
  for (auto& sig : s)
    sig = obpf(sig, plan.obpf_bandwidth_hz, plan.obpf_shape, plan.obpf_order);
}

}  // namespace

std::vector<JonesSignal> run_link_coupled(const std::vector<JonesSignal>& sigs,
                                          const LinkPlan& plan,
                                          const FiberParams& f,
                                          const AmplifierParams& amp,
                                          uint64_t seed) {
  if (std::abs(f.length_km - plan.span_length_km) > 1e-9)
    throw std::invalid_argument("run_link: fiber length != plan span length");
  std::vector<JonesSignal> s(sigs.begin(), sigs.end());
  for (int k = 0; k < plan.n_spans; ++k) {
    s = ssfm_propagate_coupled(s, f, plan.step);
    if (plan.pol_rotation) {
      // One physical element: the same unitary acts on every signal.
      std::mt19937_64 rng(mix_seed(seed, 0x726f7400u + static_cast<uint64_t>(k)));
      std::uniform_real_distribution<double> uni(0.0, 2.0 * kPi);
      const double theta = 0.5 * uni(rng), p1 = uni(rng), p2 = uni(rng);
      const cd u00 = std::polar(std::cos(theta), p1);
      const cd u01 = std::polar(-std::sin(theta), p2);
      const cd u10 = std::polar(std::sin(theta), -p2);
      const cd u11 = std::polar(std::cos(theta), -p1);
      for (auto& sig : s) {
        Arraycd nx = u00 * sig.x.samples + u01 * sig.y.samples;
        sig.y.samples = u10 * sig.x.samples + u11 * sig.y.samples;
        sig.x.samples = std::move(nx);
      }
    }
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] = edfa(s[i], amp, f.wavelength_m,
                  mix_seed(seed, 0x61736500u + static_cast<uint64_t>(k) +
                                     (static_cast<uint64_t>(i) << 32)));
    if (plan.obpf_per_span) apply_obpf(s, plan);
  }
  if (!plan.obpf_per_span && plan.n_spans > 0) apply_obpf(s, plan);
  return s;
}

JonesSignal run_link(const JonesSignal& sig, const LinkPlan& plan,
                     const FiberParams& f, const AmplifierParams& amp,
                     uint64_t seed) {
  return run_link_coupled({sig}, plan, f, amp, seed)[0];
}

JonesSignal ase_load(const JonesSignal& sig, double target_osnr_db,
                     double ref_bw_hz, uint64_t seed) {
  if (std::isinf(target_osnr_db)) return sig;
  const double p_total = total_power(sig);
  const double p_sig = p_total - sig.noise_power;
  if (p_sig <= 0) throw std::invalid_argument("ase_load: no signal power");
  const double target = db_to_lin(target_osnr_db);
  const double psd_required = p_sig / (target * ref_bw_hz);
  const double delta = psd_required - sig.noise_psd;
  if (delta < -1e-12 * psd_required)
    throw std::invalid_argument("ase_load: target OSNR above present noise floor");
  JonesSignal out = sig;
  if (delta > 0) {
    const double var = 0.5 * delta * sig.sample_rate();  // per polarization
    std::mt19937_64 rng(seed);
    add_complex_noise(out.x.samples, var, rng);
    add_complex_noise(out.y.samples, var, rng);
    out.noise_psd = psd_required;
    out.noise_power += delta * sig.sample_rate();
  }
  return out;
}

}  // namespace cpdm
