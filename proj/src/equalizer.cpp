#include "cpdm/equalizer.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cpdm {

EqualizerResult adaptive_equalize(const std::vector<ComplexWaveform>& chans,
                                  const EqualizerConfig& cfg,
                                  const Constellation8Qam& c) {
  const std::size_t nc = chans.size();
  if (nc == 0) throw std::invalid_argument("adaptive_equalize: no channels");
  if (cfg.n_taps % 2 == 0)
    throw std::invalid_argument("adaptive_equalize: tap count must be odd");
  const Index n = chans[0].size();
  for (const auto& ch : chans)
    if (ch.size() != n)
      throw std::invalid_argument("adaptive_equalize: length mismatch");
  const int taps = cfg.n_taps;
  const Index nsym = (n - taps) / 2;
  if (nsym < 64) throw std::invalid_argument("adaptive_equalize: input too short");

  // Normalize input power so modulus targets match the unit-energy
  // constellation regardless of input scale.
  std::vector<Arraycd> x(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    const double p = chans[i].samples.abs2().mean();
    if (p <= 0) throw std::invalid_argument("adaptive_equalize: zero power");
    // 2 sps: unit symbol energy corresponds to mean sample power 1 for
    // NRZ-like shaping; normalize to 1 and let RDE radii rescale.
    x[i] = chans[i].samples / std::sqrt(p);
  }

  double r_mean = 0.0;
  for (const cd& p : c.points) r_mean += std::abs(p);
  r_mean /= 8.0;
  const double r_cma2 = r_mean * r_mean;
  const double r1 = c.inner_radius(), r2 = c.outer_radius();

  // w[out][in] is a tap vector; y_out = sum_in w.dot(conj-free window).
  // Initial spike at an even tap offset so the equalizer output starts on
  // the symbol strobes (timing recovery aligns them to even samples).
  const int spike = (taps / 2) % 2 == 0 ? taps / 2 : taps / 2 + 1;
  using TapBank = std::vector<std::vector<Arraycd>>;
  std::vector<cd> y(nc);
  std::vector<cd> err(nc);

  // adapt=true runs CMA for the first cma_len symbols then RDE; returns
  // mean |e|^2 over the final quarter of the block.
  auto process = [&](TapBank& w, bool adapt, Index cma_len,
                     std::vector<Arraycd>* out) {
    double tail_err = 0.0;
    Index tail_cnt = 0;
    const Index tail_from = nsym - nsym / 4;
    for (Index k = 0; k < nsym; ++k) {
      const Index base = 2 * k;
      for (std::size_t o = 0; o < nc; ++o) {
        cd acc = 0.0;
        for (std::size_t i = 0; i < nc; ++i) {
          const auto& wi = w[o][i];
          const auto seg = x[i].segment(base, taps);
          acc += (wi * seg).sum();
        }
        y[o] = acc;
      }
      if (out)
        for (std::size_t o = 0; o < nc; ++o) (*out)[o][k] = y[o];
      if (!adapt) continue;

      const bool cma_phase = k < cma_len;
      const double mu = cma_phase ? cfg.mu_cma : cfg.mu_rde;
      for (std::size_t o = 0; o < nc; ++o) {
        const double mod2 = std::norm(y[o]);
        double target2;
        if (cma_phase) {
          target2 = r_cma2;
        } else {
          const double m = std::sqrt(mod2);
          target2 = (std::abs(m - r1) < std::abs(m - r2)) ? r1 * r1 : r2 * r2;
        }
        err[o] = y[o] * (target2 - mod2);
        if (k >= tail_from) {
          tail_err += std::norm(err[o]);
          ++tail_cnt;
        }
      }
      for (std::size_t o = 0; o < nc; ++o)
        for (std::size_t i = 0; i < nc; ++i) {
          auto seg = x[i].segment(base, taps);
          w[o][i] += mu * err[o] * seg.conjugate();
        }
    }
    return tail_cnt > 0 ? tail_err / static_cast<double>(tail_cnt) : 0.0;
  };

  // CMA with multiple radii has stable mixing minima when the channel
  // rotation is near 45 degrees, so acquisition is multi-start: each
  // candidate seeds the spike taps with a different inverse rotation, and
  // the converged radius error selects the winner. For the 2x2 butterfly
  // the channel is unitary, so between the two adaptation passes the
  // second output is re-seeded orthogonal to the first, which keeps both
  // outputs from locking onto the same polarization.
  const cd j1(0.0, 1.0);
  const double h = 1.0 / std::sqrt(2.0);
  std::vector<std::array<cd, 4>> seeds;  // row-major 2x2 spike values
  seeds.push_back({1.0, 0.0, 0.0, 1.0});
  if (nc == 2) {
    seeds.push_back({h, h, -h, h});
    seeds.push_back({h, j1 * h, j1 * h, h});
  }

  TapBank best;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& seed : seeds) {
    TapBank w(nc, std::vector<Arraycd>(nc));
    for (std::size_t o = 0; o < nc; ++o)
      for (std::size_t i = 0; i < nc; ++i) {
        w[o][i] = Arraycd::Zero(taps);
        w[o][i][spike] = nc == 2 ? seed[2 * o + i] : (o == i ? cd(1.0) : cd(0.0));
      }
    process(w, true, cfg.stage1_len, nullptr);
    if (nc == 2) {
      for (int k = 0; k < taps; ++k) {
        w[1][0][k] = -std::conj(w[0][1][taps - 1 - k]);
        w[1][1][k] = std::conj(w[0][0][taps - 1 - k]);
      }
    }
    const double score = process(w, true, 0, nullptr);
    if (score < best_score) {
      best_score = score;
      best = std::move(w);
    }
    if (nc < 2) break;
  }

  std::vector<Arraycd> out(nc, Arraycd::Zero(nsym));
  const double tail = process(best, true, 0, &out);
  auto& w = best;

  EqualizerResult r;
  // Singularity check: normalized correlation between output tap banks.
  for (std::size_t a = 0; a + 1 < nc; ++a)
    for (std::size_t b = a + 1; b < nc; ++b) {
      cd dot = 0.0;
      double na = 0.0, nb = 0.0;
      for (std::size_t i = 0; i < nc; ++i) {
        dot += (w[a][i].conjugate() * w[b][i]).sum();
        na += w[a][i].abs2().sum();
        nb += w[b][i].abs2().sum();
      }
      if (std::abs(dot) / std::sqrt(na * nb) > 0.9) r.singular = true;
    }
  r.converged_error = tail;
  for (std::size_t o = 0; o < nc; ++o) {
    ComplexWaveform s;
    s.sample_rate = chans[o].sample_rate / 2.0;
    s.samples = std::move(out[o]);
    r.outputs.push_back(std::move(s));
  }
  return r;
}

}  // namespace cpdm
