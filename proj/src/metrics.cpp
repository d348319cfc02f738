#include "cpdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cpdm/fft.hpp"
#include "cpdm/jones.hpp"

namespace cpdm {

namespace {

// Best circular delay of rx against tx, by FFT cross-correlation.
std::pair<Index, cd> best_delay(const Arraycd& rx, const Arraycd& tx) {
  const Index n = rx.size();
  Arraycd xr = fft(rx);
  Arraycd xt = fft(tx);
  Arraycd corr = ifft(Arraycd(xr * xt.conjugate()));
  Index best = 0;
  double bm = 0.0;
  for (Index d = 0; d < n; ++d) {
    const double m = std::abs(corr[d]);
    if (m > bm) {
      bm = m;
      best = d;
    }
  }
  return {best, corr[best]};
}

}  // namespace

SyncResult synchronize(const Arraycd& rx, const Arraycd& tx, double threshold) {
  if (rx.size() < 1 || tx.size() < 1 || rx.size() != tx.size())
    throw std::invalid_argument("synchronize: length mismatch");
  const double norm = std::sqrt(rx.abs2().sum() * tx.abs2().sum());
  SyncResult best;
  for (int conj_flag = 0; conj_flag < 2; ++conj_flag) {
    const Arraycd cand = conj_flag ? rx.conjugate().eval() : rx;
    auto [delay, peak] = best_delay(cand, tx);
    const double corr = std::abs(peak) / norm;
    if (corr > best.correlation) {
      best.correlation = corr;
      best.delay = delay;
      best.conjugated = conj_flag != 0;
      // Quantize the residual phase to the nearest quadrant.
      const double ang = std::arg(peak);
      int q = static_cast<int>(std::lround(ang / (kPi / 2.0)));
      best.rotation_quadrant = ((q % 4) + 4) % 4;
    }
  }
  best.ok = best.correlation >= threshold;
  return best;
}

Arraycd apply_sync(const Arraycd& rx, const SyncResult& s) {
  const Index n = rx.size();
  Arraycd v = s.conjugated ? rx.conjugate().eval() : rx;
  // Undo the circular delay: aligned[i] = v[(i + delay) % n].
  Arraycd out(n);
  for (Index i = 0; i < n; ++i) out[i] = v[(i + s.delay) % n];
  out *= std::polar(1.0, -s.rotation_quadrant * kPi / 2.0);
  return out;
}

BerResult count_ber(const std::vector<uint8_t>& rx_bits,
                    const std::vector<uint8_t>& tx_bits) {
  const std::size_t n = std::min(rx_bits.size(), tx_bits.size());
  if (n == 0) throw std::invalid_argument("count_ber: empty input");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < n; ++i) errors += rx_bits[i] != tx_bits[i];
  BerResult r;
  r.errors = errors;
  r.compared = n;
  if (errors == 0) {
    r.zero_errors = true;
    r.ber = 1.0 / static_cast<double>(n);  // upper bound
    r.ci95_lo = 0.0;
    r.ci95_hi = 3.0 / static_cast<double>(n);
  } else {
    r.ber = static_cast<double>(errors) / static_cast<double>(n);
    const double se = std::sqrt(r.ber * (1.0 - r.ber) / static_cast<double>(n));
    r.ci95_lo = std::max(0.0, r.ber - 1.96 * se);
    r.ci95_hi = std::min(1.0, r.ber + 1.96 * se);
  }
  return r;
}

double evm_db(const Arraycd& symbols, const Constellation8Qam& c) {
  if (symbols.size() == 0) throw std::invalid_argument("evm_db: empty input");
  const double rms = std::sqrt(symbols.abs2().mean());
  double err = 0.0;
  for (Index i = 0; i < symbols.size(); ++i) {
    const cd y = symbols[i] / rms;
    err += std::norm(y - c.points[static_cast<std::size_t>(decide_8qam(y, c))]);
  }
  return lin_to_db(err / static_cast<double>(symbols.size()) + 1e-300);
}

double evm_vs_reference_db(const Arraycd& rx, const Arraycd& ref) {
  if (rx.size() != ref.size() || rx.size() == 0)
    throw std::invalid_argument("evm_vs_reference_db: length mismatch");
  // Scale/phase-align rx to ref with the least-squares complex gain.
  const cd g = (ref * rx.conjugate()).sum() / rx.abs2().sum();
  const double err = (g * rx - ref).abs2().mean();
  return lin_to_db(err / ref.abs2().mean() + 1e-300);
}

double measure_osnr(const JonesSignal& sig, OsnrMethod method, double ref_bw_hz) {
  const double p_total = total_power(sig);
  if (p_total <= 0) throw std::invalid_argument("measure_osnr: no signal");
  if (method == OsnrMethod::Bookkeeping) {
    if (sig.noise_psd <= 0)
      throw std::invalid_argument("measure_osnr: no tracked noise");
    const double p_sig = p_total - sig.noise_power;
    return lin_to_db(p_sig / (sig.noise_psd * ref_bw_hz));
  }
  // Spectral method: estimate the flat noise floor from the outer 20% of
  // the sampled band (both pols), interpolate it under the signal.
  const Index n = sig.size();
  const double fs = sig.sample_rate();
  // Two-sided density in W/Hz per bin: |X[k]|^2 / (N * fs) (unnormalized FFT).
  const Arrayd psd = (fft(sig.x.samples).abs2() + fft(sig.y.samples).abs2()) /
                     (static_cast<double>(n) * fs);
  std::vector<double> floor_bins;
  for (Index k = 0; k < n; ++k) {
    const double frac = static_cast<double>(std::min(k, n - k)) / (n / 2.0);
    if (frac > 0.8) floor_bins.push_back(psd[k]);
  }
  if (floor_bins.size() < 4)
    throw std::invalid_argument("measure_osnr: band too small");
  std::nth_element(floor_bins.begin(), floor_bins.begin() + floor_bins.size() / 2,
                   floor_bins.end());
  const double floor_density = floor_bins[floor_bins.size() / 2];
  const double p_sig = std::max(p_total - floor_density * fs, 1e-300);
  return lin_to_db(p_sig / (floor_density * ref_bw_hz));
}

double osnr_max_achievable(double p_launch_dbm, double nf_db, double span_loss_db,
                           int n_spans) {
  if (n_spans < 1) throw std::invalid_argument("osnr_max_achievable: n_spans < 1");
  return 58.0 + p_launch_dbm - nf_db - span_loss_db -
         10.0 * std::log10(static_cast<double>(n_spans));
}

std::optional<double> osnr_required(const std::function<double(double)>& ber_at,
                                    double target_ber, double lo_db, double hi_db,
                                    double tol_db) {
  double b_lo = ber_at(lo_db);
  double b_hi = ber_at(hi_db);
  if (!(b_lo >= target_ber && b_hi <= target_ber)) return std::nullopt;
  double lo = lo_db, hi = hi_db;
  while (hi - lo > tol_db) {
    const double mid = 0.5 * (lo + hi);
    const double b = ber_at(mid);
    if (b > target_ber) {
      lo = mid;
      b_lo = b;
    } else {
      hi = mid;
      b_hi = b;
    }
  }
  // Log-linear interpolation inside the final bracket.
  if (b_lo <= 0 || b_hi <= 0 || b_lo == b_hi) return 0.5 * (lo + hi);
  const double t = (std::log(target_ber) - std::log(b_lo)) /
                   (std::log(b_hi) - std::log(b_lo));
  return lo + t * (hi - lo);
}

void export_constellation(const Arraycd& symbols, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("export_constellation: cannot open " + path);
  f << "re,im\n";
  for (Index i = 0; i < symbols.size(); ++i)
    f << symbols[i].real() << "," << symbols[i].imag() << "\n";
  if (!f) throw std::runtime_error("export_constellation: write failed");
}

void export_stokes(const JonesSignal& sig, const std::string& path, Index stride) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("export_stokes: cannot open " + path);
  f << "s0,s1,s2,s3\n";
  for (Index i = 0; i < sig.size(); i += std::max<Index>(1, stride)) {
    const auto s = stokes(sig.x.samples[i], sig.y.samples[i]);
    f << s[0] << "," << s[1] << "," << s[2] << "," << s[3] << "\n";
  }
}

std::string LinkReport::csv_header() {
  return "distance_km,span_km,launch_power_dbm,sps_bit,ber,evm_db,q_factor_db,"
         "osnr_measured_db,osnr_required_db,osnr_max_achievable_db,"
         "osnr_margin_db,seed,status";
}

std::string LinkReport::csv_row() const {
  std::ostringstream os;
  os.precision(10);
  os << distance_km << "," << span_km << "," << launch_power_dbm << "," << sps_bit
     << "," << ber << "," << evm_db << "," << q_factor_db << "," << osnr_measured_db
     << "," << osnr_required_db << "," << osnr_max_achievable_db << ","
     << osnr_margin_db << "," << seed << "," << status;
  return os.str();
}

std::string LinkReport::to_json() const {
  nlohmann::json j;
  j["distance_km"] = distance_km;
  j["span_km"] = span_km;
  j["launch_power_dbm"] = launch_power_dbm;
  j["sps_bit"] = sps_bit;
  j["ber"] = ber;
  j["evm_db"] = evm_db;
  j["q_factor_db"] = q_factor_db;
  j["osnr_measured_db"] = osnr_measured_db;
  j["osnr_required_db"] = osnr_required_db;
  j["osnr_max_achievable_db"] = osnr_max_achievable_db;
  j["osnr_margin_db"] = osnr_margin_db;
  j["seed"] = seed;
  j["status"] = status;
  return j.dump(2);
}

}  // namespace cpdm
