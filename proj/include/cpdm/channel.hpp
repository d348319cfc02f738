#pragma once

#include <optional>

#include "cpdm/waveform.hpp"

namespace cpdm {

/// SSMF parameters in their customary units; beta2/beta3/gamma are derived
/// from the primaries unless explicitly overridden (used by property grids).
struct FiberParams {
  double alpha_db_km = 0.2;
  double dispersion_ps_nm_km = 16.75;
  double slope_ps_nm2_km = 0.075;
  double n2_m2_w = 26e-21;
  double a_eff_m2 = 80e-12;
  double length_km = 80.0;
  double wavelength_m = 1550e-9;

  std::optional<double> beta2_override_ps2_km;
  std::optional<double> beta3_override_ps3_km;
  std::optional<double> gamma_override_w_km;

  double beta2_ps2_km() const;  // -D * lambda^2 / (2 pi c)
  double beta3_ps3_km() const;  // (lambda/(2 pi c))^2 (lambda^2 S + 2 lambda D)
  double gamma_w_km() const;    // 2 pi n2 / (lambda A_eff)

  // SI accessors used by the propagation kernels.
  double alpha_np_m() const;   // field-power attenuation, Np/m
  double beta2_s2_m() const;
  double beta3_s3_m() const;
  double gamma_w_m() const;
};

struct AmplifierParams {
  double gain_db = 16.0;
  double noise_figure_db = 4.0;
  std::optional<double> n_sp;  // overrides the NF-derived value when set
  bool noiseless = false;
};

/// ASE PSD per polarization added by one amplifier (W/Hz).
double ase_psd_per_pol(const AmplifierParams& p, double wavelength_m);

struct StepRule {
  enum class Kind { Fixed, Adaptive } kind = Kind::Adaptive;
  double dz_km = 0.1;           // Fixed
  double max_phase_rad = 3e-3;  // Adaptive: nonlinear phase cap per step
  double max_dz_km = 100.0;
};

enum class FilterShape { Gaussian, Rect };

struct LinkPlan {
  double span_length_km = 80.0;
  int n_spans = 10;
  double obpf_bandwidth_hz = 100e9;
  int obpf_order = 2;  // gaussian order; shape below
  FilterShape obpf_shape = FilterShape::Gaussian;
  bool obpf_per_span = false;
  bool pol_rotation = true;
  StepRule step;

  double total_km() const { return span_length_km * n_spans; }
};

/// Forward Manakov split-step propagation over f.length_km. The dual
/// polarization Kerr term uses total intensity with the 8/9 factor.
JonesSignal ssfm_propagate(const JonesSignal& sig, const FiberParams& f,
                           const StepRule& step);

/// Coupled propagation of logical channel pairs sharing one fiber: the
/// Kerr phase on every component is driven by the total instantaneous
/// intensity summed over all signals. One signal reduces exactly to
/// ssfm_propagate.
std::vector<JonesSignal> ssfm_propagate_coupled(
    const std::vector<JonesSignal>& sigs, const FiberParams& f,
    const StepRule& step);

JonesSignal edfa(const JonesSignal& sig, const AmplifierParams& p,
                 double wavelength_m, uint64_t seed);

JonesSignal obpf(const JonesSignal& sig, double bandwidth_hz, FilterShape shape,
                 int gaussian_order = 2);

/// Full recirculating loop: n_spans x (fiber -> rotation -> EDFA), OBPF after
/// the final span (or per span when configured).
JonesSignal run_link(const JonesSignal& sig, const LinkPlan& plan,
                     const FiberParams& f, const AmplifierParams& amp,
                     uint64_t seed);

/// run_link over co-propagating signals: the nonlinear step couples all
/// of them (total intensity), the per-span polarization rotation is the
/// same physical element for all, and each signal draws independent ASE.
std::vector<JonesSignal> run_link_coupled(const std::vector<JonesSignal>& sigs,
                                          const LinkPlan& plan,
                                          const FiberParams& f,
                                          const AmplifierParams& amp,
                                          uint64_t seed);

/// Adds white circular-Gaussian noise so the bookkeeping OSNR in ref_bw
/// equals target_osnr_db. Throws if the target is above what is possible
/// given noise already present.
JonesSignal ase_load(const JonesSignal& sig, double target_osnr_db,
                     double ref_bw_hz, uint64_t seed);

}  // namespace cpdm
