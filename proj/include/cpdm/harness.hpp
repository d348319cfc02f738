#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "cpdm/chain.hpp"
#include "cpdm/channel.hpp"
#include "cpdm/metrics.hpp"
#include "cpdm/transmitter.hpp"

namespace cpdm {

/// Transmit multiplexing mode. Ideal4 treats the two circular branches as
/// independent polarization pairs; PhysicalJones routes all four
/// tributaries through the waveplate combiner (rank-2, with crosstalk);
/// Pdm2 is a plain two-tributary polarization-multiplexed reference.
enum class TxMode { Ideal4, PhysicalJones, Pdm2 };

enum class Scenario {
  Constellation560,
  BerVsDistance,
  BerVsOsnr,
  ReqOsnrVsDistance,
  OsnrVsPower80,
  OsnrVsPower100,
  ReqOsnrVsSampleRate,
  Custom,
};

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);  // throws on unknown

std::string tx_mode_name(TxMode m);
TxMode parse_tx_mode(const std::string& name);

/// Everything needed to simulate one link operating point.
struct SystemConfig {
  TxMode mode = TxMode::Ideal4;
  LaserParams tx_laser{};
  LaserParams lo{};
  double lo_freq_offset_hz = 0.0;
  // Root-raised-cosine keeps the modulated spectrum inside the 2
  // samples/symbol receiver Nyquist band; NRZ sidelobes fold there and the
  // folded content picks up uncompensated dispersion phase, so the
  // implementation floor of an NRZ link grows with distance.
  Pulse pulse = Pulse::Rrc;
  double rrc_beta = 0.2;
  IqModulatorParams iq{};
  double waveplate_angle_rad = kPi / 4.0;
  FiberParams fiber{};
  AmplifierParams amp{};
  bool gain_auto = true;  // resolve gain to exactly offset the span loss
  LinkPlan link{};
  PhotodiodeParams pd{};
  double tia_gain_db = 0.0;
  AdcParams adc{};
  DspConfig dsp{};
  int tx_sps = 16;              // transmit samples per symbol (power of two)
  Index n_symbols = 1 << 14;    // per tributary (power of two)
  double launch_power_dbm = -3.0;
  bool nonlinear = true;        // Kerr term on/off (gamma forced to 0 when off)
  bool noiseless = false;       // disables ASE and photodiode noise
  std::optional<double> osnr_load_db;  // receiver-side noise loading target

  /// Amplifier with gain resolved (loss-matched when gain_auto).
  AmplifierParams resolved_amp() const;
  /// Fiber with length pinned to the span and gamma zeroed when linear.
  FiberParams resolved_fiber() const;
};

struct PointOutcome {
  LinkReport report;
  StageReport stages;
  // Per tributary, synchronized to the transmit sequence (zeros mark
  // positions lost to receiver transients).
  std::vector<ComplexWaveform> rx_symbols;
  std::vector<ComplexWaveform> tx_symbols;
};

/// Full transmitter -> link -> receiver -> DSP -> metrics run.
PointOutcome simulate_point(const SystemConfig& cfg, uint64_t seed,
                            const std::string& tap_dir = "");

/// Required OSNR at target_ber by receiver-side noise loading: the link is
/// propagated once with its in-line ASE (so noise-nonlinearity interaction
/// is kept), then additional receiver noise is bisected with a fixed noise
/// seed so BER is monotone in the loading target. The bracket is capped at
/// the link's intrinsic OSNR. nullopt when the bracket fails (error floor
/// above target, or target below the intrinsic noise level).
std::optional<double> required_osnr(const SystemConfig& cfg, uint64_t seed,
                                    double target_ber, double lo_db = 8.0,
                                    double hi_db = 34.0, double tol_db = 0.1);

struct ExperimentSpec {
  Scenario scenario = Scenario::BerVsDistance;
  SystemConfig sys{};
  std::vector<double> powers_dbm;
  std::vector<double> distances_km;
  std::vector<double> osnrs_db;
  std::vector<int> sps_bits;
  double target_ber = 1e-4;
  uint64_t master_seed = 1;
  std::string output_dir = ".";
  int threads = 1;
};

/// Parses and normalizes a JSON configuration (empty text = all defaults),
/// applying the scenario's default sweep axes and checking contradictions
/// (span length x count vs total distance, axis emptiness).
ExperimentSpec validate_config_text(const std::string& json_text,
                                    const std::string& scenario_override = "");
ExperimentSpec validate_config(const std::string& path,
                               const std::string& scenario_override = "");

/// Scheduling-independent per-point seed.
uint64_t point_seed(uint64_t master, std::initializer_list<double> axes);

struct ExperimentResult {
  std::string csv;         // also written to <output_dir>/<scenario>.csv
  std::string manifest;    // also written to <output_dir>/manifest.json
  int failed_points = 0;   // rows with status != ok
};

/// Runs the sweep (worker pool of spec.threads), merges rows in axis
/// order, writes CSV and manifest under spec.output_dir.
ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const std::string& tap_dir = "");

std::string list_presets();
/// Documentation for one receiver stage or channel block; throws
/// std::invalid_argument listing valid names on an unknown name.
std::string describe_stage(const std::string& name);

}  // namespace cpdm
