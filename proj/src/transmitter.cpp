#include "cpdm/transmitter.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "cpdm/fft.hpp"

namespace cpdm {

ComplexWaveform laser(const LaserParams& p, Index n, double rate, uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("laser: n must be > 0");
  const double amp = std::sqrt(dbm_to_watt(p.power_dbm));
  ComplexWaveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  if (p.linewidth_hz <= 0) {
    w.samples.setConstant(cd(amp, 0));
    return w;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 * kPi * p.linewidth_hz / rate));
  double phase = 0.0;
  for (Index i = 0; i < n; ++i) {
    w.samples[i] = std::polar(amp, phase);
    phase += normal(rng);
  }
  return w;
}

namespace {

Arraycd rrc_shape(const Arraycd& symbols, int sps, double beta) {
  const int span = 16;  // symbols each side
  const int half = span * sps;
  Arrayd taps(2 * half + 1);
  for (int k = -half; k <= half; ++k) {
    const double t = static_cast<double>(k) / sps;  // in symbol periods
    double v;
    if (k == 0) {
      v = 1.0 - beta + 4.0 * beta / kPi;
    } else if (beta > 0 && std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-12) {
      v = beta / std::sqrt(2.0) *
          ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * beta)) +
           (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * beta)));
    } else {
      const double pt = kPi * t;
      v = (std::sin(pt * (1.0 - beta)) +
           4.0 * beta * t * std::cos(pt * (1.0 + beta))) /
          (pt * (1.0 - std::pow(4.0 * beta * t, 2)));
    }
    taps[k + half] = v;
  }
  taps /= std::sqrt(taps.square().sum() / sps);  // unit energy per symbol

  // Circular FFT convolution of the upsampled impulse train.
  const Index n = symbols.size() * sps;
  Arraycd up = Arraycd::Zero(n);
  for (Index i = 0; i < symbols.size(); ++i) up[i * sps] = symbols[i];
  Arraycd h = Arraycd::Zero(n);
  for (Index k = 0; k < taps.size() && k < n; ++k)
    h[(n + k - half) % n] = taps[k];
  Arraycd spec = fft(up) * fft(h);
  return ifft(spec);
}

}  // namespace

ComplexWaveform iq_modulate(const ComplexWaveform& carrier,
                            const ComplexWaveform& symbols, int sps, Pulse pulse,
                            double rrc_beta, const IqModulatorParams& imp) {
  if (carrier.size() != symbols.size() * sps)
    throw std::invalid_argument("iq_modulate: carrier length != symbols * sps");

  Arraycd base(carrier.size());
  if (pulse == Pulse::Nrz) {
    for (Index i = 0; i < symbols.size(); ++i)
      base.segment(i * sps, sps).setConstant(symbols.samples[i]);
  } else {
    base = rrc_shape(symbols.samples, sps, rrc_beta);
  }

  if (!imp.ideal()) {
    const double gi = std::pow(10.0, imp.gain_imbalance_db / 40.0);
    const double gq = std::pow(10.0, -imp.gain_imbalance_db / 40.0);
    const double c = std::cos(imp.phase_error_rad), s = std::sin(imp.phase_error_rad);
    const double amp = std::sqrt(base.abs2().mean());
    for (Index i = 0; i < base.size(); ++i) {
      const double I = base[i].real(), Q = base[i].imag();
      base[i] = cd(gi * I + imp.dc_offset_i * amp,
                   gq * (Q * c + I * s) + imp.dc_offset_q * amp);
    }
  }

  ComplexWaveform out;
  out.sample_rate = carrier.sample_rate;
  out.center_frequency_offset = carrier.center_frequency_offset;
  out.samples = carrier.samples * base;
  return out;
}

TxMap cpdm_tx_map(double waveplate_angle) {
  // RCP branch passes a quarter waveplate at -angle (H -> RCP), the LCP
  // branch one at +angle (H -> LCP); the CPBC adds the two branch fields.
  const Jones2 qr = quarter_waveplate(-waveplate_angle);
  const Jones2 ql = quarter_waveplate(+waveplate_angle);
  TxMap m;
  m.col(0) = qr * Eigen::Vector2cd(1, 0);
  m.col(1) = qr * Eigen::Vector2cd(0, 1);
  m.col(2) = ql * Eigen::Vector2cd(1, 0);
  m.col(3) = ql * Eigen::Vector2cd(0, 1);
  return m;
}

TxMap CpdmMuxModel::tx_map() const {
  return cpdm_tx_map(waveplate_angle) / std::sqrt(2.0);
}

CpdmField cpdm_mux(const TributarySet& tribs, const CpdmMuxModel& model) {
  const auto chans = tribs.all();
  const Index n = chans[0]->size();
  for (const auto* c : chans)
    if (c->size() != n || c->sample_rate != chans[0]->sample_rate)
      throw std::invalid_argument("cpdm_mux: tributary length/rate mismatch");

  CpdmField field;
  field.mode = model.mode;
  if (model.mode == MuxMode::Ideal4) {
    field.signals.resize(2);
    field.signals[0].x = tribs.rcp_h;
    field.signals[0].y = tribs.rcp_v;
    field.signals[1].x = tribs.lcp_h;
    field.signals[1].y = tribs.lcp_v;
    return field;
  }

  const TxMap m = model.tx_map();
  JonesSignal s;
  s.x.sample_rate = s.y.sample_rate = chans[0]->sample_rate;
  s.x.samples = Arraycd::Zero(n);
  s.y.samples = Arraycd::Zero(n);
  for (int k = 0; k < 4; ++k) {
    s.x.samples += m(0, k) * chans[static_cast<std::size_t>(k)]->samples;
    s.y.samples += m(1, k) * chans[static_cast<std::size_t>(k)]->samples;
  }
  field.signals.push_back(std::move(s));
  return field;
}

JonesSignal set_launch_power(const JonesSignal& sig, double p_dbm) {
  const double p = total_power(sig);
  if (p <= 0) throw std::invalid_argument("set_launch_power: zero-power input");
  const double scale = std::sqrt(dbm_to_watt(p_dbm) / p);
  JonesSignal out = sig;
  out.x.samples *= scale;
  out.y.samples *= scale;
  out.noise_psd *= scale * scale;
  out.noise_power *= scale * scale;
  return out;
}

}  // namespace cpdm
