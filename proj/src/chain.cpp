#include "cpdm/chain.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cpdm/wavedump.hpp"

namespace cpdm {

std::string StageReport::to_json() const {
  nlohmann::json j;
  for (const auto& s : stages) j["stages"].push_back({{"name", s.name}, {"evm_or_metric", s.value}});
  j["foe_estimate_hz"] = foe_estimate_hz;
  j["eq_converged_error"] = eq_converged_error;
  j["mean_bps_phase_step"] = mean_bps_phase_step;
  j["cycle_slips"] = cycle_slips;
  j["eq_singular"] = eq_singular;
  j["timing_converged"] = timing_converged;
  return j.dump(2);
}

namespace {

double stage_power_db(const std::vector<ComplexWaveform>& chans) {
  double p = 0.0;
  for (const auto& c : chans) p += c.samples.abs2().mean();
  return lin_to_db(p / static_cast<double>(chans.size()) + 1e-300);
}

void dump_taps(const std::string& tap_dir, const std::string& stage,
               const std::vector<ComplexWaveform>& chans) {
  if (tap_dir.empty()) return;
  for (std::size_t i = 0; i < chans.size(); ++i)
    write_waveform(tap_dir + "/" + stage + "_ch" + std::to_string(i) + ".cpdmwave",
                   chans[i]);
}

}  // namespace

ChainOutput run_chain(const FrontendOutput& front, const DspConfig& cfg,
                      const LinkPlan& link, const FiberParams& fiber,
                      const Constellation8Qam& c, double expected_power_w,
                      const std::string& tap_dir) {
  const std::size_t nb = front.branches.size();
  if (nb != 2 && nb != 4)
    throw std::invalid_argument("run_chain: expected 2 or 4 branches");
  const double symbol_rate = 28e9 / 3.0;

  ChainOutput out;
  auto note = [&](const std::string& name, double v) {
    out.report.stages.push_back({name, v});
  };

  // (i) Bessel filter. On grids too coarse to represent the 3-dB point the
  // filter is effectively all-pass, so skip it rather than reject the run.
  std::vector<ComplexWaveform> chans;
  const bool bessel_fits =
      !front.branches.empty() &&
      cfg.bessel.bw_3db_hz < front.branches[0].sample_rate / 2.0;
  for (const auto& b : front.branches)
    chans.push_back(bessel_fits
                        ? bessel_filter(b, cfg.bessel.order, cfg.bessel.bw_3db_hz)
                        : b);
  note("bessel", stage_power_db(chans));
  dump_taps(tap_dir, "1_bessel", chans);

  // (ii) Resample to 2 samples/symbol
  const double rate2 = cfg.resamp.sps * symbol_rate;
  for (auto& ch : chans) ch = resample(ch, rate2, cfg.resamp.method);
  note("resample", stage_power_db(chans));
  dump_taps(tap_dir, "2_resample", chans);

  // (iii) QI compensation
  if (cfg.qi.enable)
    for (auto& ch : chans) ch = qi_compensate(ch);
  note("qi", stage_power_db(chans));
  dump_taps(tap_dir, "3_qi", chans);

  // (iv)+(v) CD compensation or DBP (DBP subsumes the CD stage)
  const double distance = link.total_km();
  if (cfg.dbp.enable && distance > 0) {
    DbpPlan plan;
    plan.fiber = fiber;
    plan.span_km = link.span_length_km;
    plan.n_spans = link.n_spans;
    plan.steps_per_span = cfg.dbp.steps_per_span;
    plan.xi_nl = cfg.dbp.xi_nl;
    for (std::size_t p = 0; p + 1 < nb; p += 2) {
      // Restore the physical power scale the virtual fiber expects.
      const double pm =
          chans[p].samples.abs2().mean() + chans[p + 1].samples.abs2().mean();
      const double scale = std::sqrt(expected_power_w / pm);
      chans[p].samples *= scale;
      chans[p + 1].samples *= scale;
      auto [bx, by] = dbp(chans[p], chans[p + 1], plan);
      chans[p] = std::move(bx);
      chans[p + 1] = std::move(by);
    }
    note("dbp", stage_power_db(chans));
  } else {
    if (distance > 0)
      for (auto& ch : chans)
        ch = cd_compensate(ch, fiber, distance, cfg.cdc.mode, cfg.cdc.n_taps);
    note("cdc", stage_power_db(chans));
  }
  dump_taps(tap_dir, "4_cd_nl", chans);

  // (vi) Timing recovery (shared clock per polarization pair)
  if (cfg.timing.enable) {
    Index min_len = chans[0].size();
    std::vector<ComplexWaveform> timed;
    for (std::size_t p = 0; p + 1 < nb; p += 2) {
      TimingResult tr = timing_recover({chans[p], chans[p + 1]}, cfg.timing.loop_bw);
      out.report.timing_converged = out.report.timing_converged && tr.converged;
      timed.push_back(std::move(tr.aligned[0]));
      timed.push_back(std::move(tr.aligned[1]));
    }
    for (const auto& t : timed) min_len = std::min(min_len, t.size());
    for (auto& t : timed) t.samples = t.samples.head(min_len).eval();
    chans = std::move(timed);
  }
  note("timing", stage_power_db(chans));
  dump_taps(tap_dir, "5_timing", chans);

  // (vii) Adaptive butterfly equalizer per polarization pair
  EqualizerConfig ecfg;
  ecfg.n_taps = cfg.eq.n_taps;
  ecfg.mu_cma = cfg.eq.mu_cma;
  ecfg.mu_rde = cfg.eq.mu_rde;
  const Index nsym_in = chans[0].size() / 2;
  ecfg.stage1_len = std::min<int>(cfg.eq.stage1_len, static_cast<int>(nsym_in / 2));
  std::vector<ComplexWaveform> eq_out;
  double eq_err = 0.0;
  for (std::size_t p = 0; p + 1 < nb; p += 2) {
    EqualizerResult er = adaptive_equalize({chans[p], chans[p + 1]}, ecfg, c);
    out.report.eq_singular = out.report.eq_singular || er.singular;
    eq_err += er.converged_error;
    eq_out.push_back(std::move(er.outputs[0]));
    eq_out.push_back(std::move(er.outputs[1]));
  }
  out.report.eq_converged_error = eq_err / static_cast<double>(nb / 2);
  note("equalizer", out.report.eq_converged_error);
  dump_taps(tap_dir, "6_equalizer", eq_out);

  // (viii-a) Frequency offset estimation
  double foe_sum = 0.0;
  if (cfg.foe.enable) {
    for (auto& ch : eq_out) {
      FoeResult fr = foe(ch, c, cfg.foe.search_range_hz);
      foe_sum += fr.offset_hz;
      ch = std::move(fr.corrected);
    }
    out.report.foe_estimate_hz = foe_sum / static_cast<double>(nb);
  }
  note("foe", out.report.foe_estimate_hz);
  dump_taps(tap_dir, "7_foe", eq_out);

  // (viii-b) Blind phase search
  double phase_step = 0.0;
  for (auto& ch : eq_out) {
    CpeResult cr = cpe_bps(ch, c, cfg.cpe.b_test_phases, cfg.cpe.window);
    out.report.cycle_slips += cr.cycle_slips;
    if (cr.phase_track.size() > 1)
      phase_step +=
          (cr.phase_track.tail(cr.phase_track.size() - 1) -
           cr.phase_track.head(cr.phase_track.size() - 1))
              .abs()
              .mean();
    ch = std::move(cr.corrected);
  }
  out.report.mean_bps_phase_step = phase_step / static_cast<double>(nb);
  note("cpe_bps", out.report.mean_bps_phase_step);
  dump_taps(tap_dir, "8_cpe", eq_out);

  out.symbols = std::move(eq_out);
  return out;
}

}  // namespace cpdm
