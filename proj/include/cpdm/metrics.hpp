#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cpdm/constellation.hpp"
#include "cpdm/waveform.hpp"

namespace cpdm {

enum class OsnrMethod { Bookkeeping, SpectralInterp };

struct SyncResult {
  Index delay = 0;          // rx lags tx by this many symbols (circular)
  int rotation_quadrant = 0;  // rx ~= tx * i^q after derotation by q
  bool conjugated = false;
  double correlation = 0.0;
  bool ok = false;
};

/// Exhaustive alignment search: circular delay (FFT cross-correlation),
/// four quadrant rotations, optional conjugation. ok requires normalized
/// correlation above threshold.
SyncResult synchronize(const Arraycd& rx, const Arraycd& tx,
                       double threshold = 0.9);

/// Applies a SyncResult so the returned stream is comparable to tx.
Arraycd apply_sync(const Arraycd& rx, const SyncResult& s);

struct BerResult {
  double ber = 0.0;
  std::size_t errors = 0;
  std::size_t compared = 0;
  double ci95_lo = 0.0, ci95_hi = 0.0;
  bool zero_errors = false;  // true => ber reported as upper bound 1/n
};

BerResult count_ber(const std::vector<uint8_t>& rx_bits,
                    const std::vector<uint8_t>& tx_bits);

/// Error vector magnitude (dB) against the nearest constellation point
/// after RMS normalization.
double evm_db(const Arraycd& symbols, const Constellation8Qam& c);

/// EVM (dB) against a known reference sequence (no decisions involved).
double evm_vs_reference_db(const Arraycd& rx, const Arraycd& ref);

double measure_osnr(const JonesSignal& sig, OsnrMethod method,
                    double ref_bw_hz = kOsnrRefBandwidth);

/// Analytic 0.1-nm budget: 58 + P_launch - NF - span_loss - 10 log10(N).
double osnr_max_achievable(double p_launch_dbm, double nf_db, double span_loss_db,
                           int n_spans);

inline double osnr_margin(double max_achievable_db, double required_db) {
  return max_achievable_db - required_db;
}

/// Bisection for the OSNR achieving target_ber. ber_at must be monotone
/// nonincreasing in OSNR (enforced by a fixed per-evaluation seed ladder
/// upstream). Returns nullopt on bracket failure.
std::optional<double> osnr_required(const std::function<double(double)>& ber_at,
                                    double target_ber, double lo_db, double hi_db,
                                    double tol_db = 0.1);

void export_constellation(const Arraycd& symbols, const std::string& path);
void export_stokes(const JonesSignal& sig, const std::string& path,
                   Index stride = 1);

struct LinkReport {
  double ber = 0.0;
  double evm_db = 0.0;
  double q_factor_db = 0.0;
  double osnr_measured_db = 0.0;
  double osnr_required_db = 0.0;
  double osnr_max_achievable_db = 0.0;
  double osnr_margin_db = 0.0;
  double launch_power_dbm = 0.0;
  double distance_km = 0.0;
  double span_km = 0.0;
  int sps_bit = 0;
  uint64_t seed = 0;
  std::string status = "ok";

  static std::string csv_header();
  std::string csv_row() const;
  std::string to_json() const;
};

}  // namespace cpdm
