#include "cpdm/rx_frontend.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "cpdm/resample.hpp"
#include "cpdm/seed.hpp"

namespace cpdm {

FrontendOutput coherent_detect(const CpdmField& field, const LaserParams& lo,
                               double lo_freq_offset_hz,
                               const PhotodiodeParams& pd, double tia_gain_db,
                               const CpdmMuxModel& mux, uint64_t seed) {
  if (field.signals.empty())
    throw std::invalid_argument("coherent_detect: empty field");
  const double p_lo = dbm_to_watt(lo.power_dbm);
  if (p_lo <= 0) throw std::invalid_argument("coherent_detect: LO power <= 0");
  const Index n = field.signals[0].size();
  const double rate = field.signals[0].sample_rate();

  // The CPBS + two PBS split the LO into four branches.
  const double p_lo_branch = p_lo / 4.0;
  const double k_mix = pd.responsivity_a_w * std::sqrt(p_lo_branch);
  const double g_tia = std::pow(10.0, tia_gain_db / 20.0);

  // LO phase process (unit amplitude) including the frequency offset.
  Arraycd lo_conj(n);
  {
    std::mt19937_64 rng(splitmix64(seed ^ 0x6c6f0000ULL));
    std::normal_distribution<double> normal(
        0.0, std::sqrt(2.0 * kPi * lo.linewidth_hz / rate));
    double phase = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double total =
          phase + 2.0 * kPi * lo_freq_offset_hz * static_cast<double>(i) / rate;
      lo_conj[i] = std::polar(1.0, -total);
      if (lo.linewidth_hz > 0) phase += normal(rng);
    }
  }

  // Branch optical fields.
  std::vector<Arraycd> fields;
  if (field.mode == MuxMode::Ideal4) {
    for (const JonesSignal& s : field.signals) {
      fields.push_back(s.x.samples);
      fields.push_back(s.y.samples);
    }
  } else {
    const TxMap m = mux.tx_map() * std::sqrt(2.0);  // unit-norm columns
    const JonesSignal& s = field.signals[0];
    for (int k = 0; k < 4; ++k) {
      fields.push_back(std::conj(m(0, k)) * s.x.samples +
                       std::conj(m(1, k)) * s.y.samples);
    }
  }

  FrontendOutput out;
  std::mt19937_64 rng(splitmix64(seed ^ 0x70640000ULL));
  for (std::size_t b = 0; b < fields.size(); ++b) {
    ComplexWaveform w;
    w.sample_rate = rate;
    w.samples = k_mix * fields[b] * lo_conj;
    if (!pd.noiseless) {
      const double p_branch = fields[b].abs2().mean();
      const double i_ph = pd.responsivity_a_w * (p_lo_branch + p_branch);
      const double b_shot = rate / 2.0;
      const double b_th = std::min(pd.thermal_bandwidth_hz, rate / 2.0);
      const double var_q =
          2.0 * kElementaryCharge * (i_ph + pd.dark_current_a) * b_shot +
          4.0 * kBoltzmann * pd.temperature_k * b_th / pd.load_resistance_ohm;
      std::normal_distribution<double> normal(0.0, std::sqrt(var_q));
      for (Index i = 0; i < n; ++i)
        w.samples[i] += cd(normal(rng), normal(rng));
    }
    w.samples *= g_tia;
    out.branches.push_back(std::move(w));
  }
  return out;
}

ComplexWaveform adc(const ComplexWaveform& w, const AdcParams& p, uint64_t seed) {
  (void)seed;  // quantization is deterministic
  const double target = p.rate_per_tributary();
  if (target > w.sample_rate + 1e-6)
    throw std::invalid_argument("adc: target rate above input rate");
  ComplexWaveform out = (target == w.sample_rate)
                            ? w
                            : resample(w, target, ResampleMethod::Fft);
  if (p.bits > 0) {
    const double sigma = std::sqrt(0.5 * out.samples.abs2().mean());
    const double full_scale = 4.0 * sigma;
    const double q = 2.0 * full_scale / static_cast<double>(1LL << p.bits);
    auto quant = [&](double v) {
      v = std::clamp(v, -full_scale, full_scale - q);
      return (std::floor(v / q) + 0.5) * q;
    };
    for (Index i = 0; i < out.size(); ++i)
      out.samples[i] = cd(quant(out.samples[i].real()), quant(out.samples[i].imag()));
  }
  return out;
}

}  // namespace cpdm
