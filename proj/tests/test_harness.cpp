#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cpdm/harness.hpp"

using namespace cpdm;
namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}
}  // namespace

TEST_CASE("empty config yields the full default spec") {
  ExperimentSpec s = validate_config_text("");
  CHECK(s.scenario == Scenario::BerVsDistance);
  CHECK(s.sys.mode == TxMode::Ideal4);
  CHECK(s.sys.fiber.alpha_db_km == doctest::Approx(0.2));
  CHECK(s.sys.fiber.dispersion_ps_nm_km == doctest::Approx(16.75));
  CHECK(s.sys.amp.noise_figure_db == doctest::Approx(4.0));
  CHECK(s.sys.link.span_length_km == doctest::Approx(80.0));
  CHECK(s.sys.n_symbols == (1 << 16));
  CHECK_FALSE(s.powers_dbm.empty());
  CHECK_FALSE(s.distances_km.empty());
}

TEST_CASE("config contradictions and bad values are rejected with paths") {
  // 80 km x 10 spans cannot cover 900 km.
  const char* bad =
      R"({"scenario":"custom","link":{"span_km":80,"n_spans":10,"distance_km":900}})";
  CHECK_THROWS_AS(validate_config_text(bad), std::invalid_argument);

  CHECK_THROWS_AS(validate_config_text("[1,2]"), std::invalid_argument);
  CHECK_THROWS_AS(validate_config_text("{not json"), std::invalid_argument);
  CHECK_THROWS_AS(validate_config_text(R"({"scenario":"nope"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config_text(R"({"n_symbols":1000})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config_text(R"({"pulse":"sinc"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config_text(R"({"rrc_beta":1.5})"),
                  std::invalid_argument);
}

TEST_CASE("automatic gain resolves to the span loss") {
  ExperimentSpec s = validate_config_text(R"({"link":{"span_km":80}})");
  CHECK(s.sys.resolved_amp().gain_db == doctest::Approx(16.0));
  ExperimentSpec s2 = validate_config_text(R"({"link":{"span_km":100}})");
  CHECK(s2.sys.resolved_amp().gain_db == doctest::Approx(20.0));
}

TEST_CASE("scenario override and target-BER defaults") {
  ExperimentSpec a = validate_config_text("", "osnr_vs_power_80");
  CHECK(a.scenario == Scenario::OsnrVsPower80);
  CHECK(a.sys.link.span_length_km == doctest::Approx(80.0));
  CHECK(a.target_ber == doctest::Approx(1e-5));

  ExperimentSpec b = validate_config_text("", "reqosnr_vs_samplerate");
  CHECK(b.target_ber == doctest::Approx(1e-4));
  CHECK_FALSE(b.sps_bits.empty());

  // Explicit value wins over the scenario default.
  ExperimentSpec c =
      validate_config_text(R"({"target_ber":1e-3})", "osnr_vs_power_80");
  CHECK(c.target_ber == doctest::Approx(1e-3));
}

TEST_CASE("presets list covers every scenario") {
  const std::string text = list_presets();
  for (const char* name :
       {"constellation_560km", "ber_vs_distance", "ber_vs_osnr",
        "reqosnr_vs_distance", "osnr_vs_power_80", "osnr_vs_power_100",
        "reqosnr_vs_samplerate"})
    CHECK(text.find(name) != std::string::npos);
}

TEST_CASE("stage documentation") {
  CHECK(describe_stage("dbp").find("dA/d(-z) = (D + N) A") !=
        std::string::npos);
  CHECK(describe_stage("bps") == describe_stage("cpe"));
  CHECK_THROWS_WITH_AS(describe_stage("warp"),
                       doctest::Contains("valid"), std::invalid_argument);
}

TEST_CASE("point seeds are scheduling independent and axis sensitive") {
  CHECK(point_seed(1, {2.0, 3.0}) == point_seed(1, {2.0, 3.0}));
  CHECK(point_seed(1, {2.0, 3.0}) != point_seed(1, {3.0, 2.0}));
  CHECK(point_seed(1, {2.0, 3.0}) != point_seed(2, {2.0, 3.0}));
}

TEST_CASE("simulate_point is deterministic and runs the back-to-back chain") {
  SystemConfig cfg;
  cfg.n_symbols = 1 << 14;
  cfg.link.n_spans = 0;  // back to back
  cfg.osnr_load_db = 20.0;
  cfg.noiseless = true;  // loading is the only noise
  PointOutcome a = simulate_point(cfg, 42);
  PointOutcome b = simulate_point(cfg, 42);
  CHECK(a.report.ber == b.report.ber);
  CHECK(a.report.evm_db == b.report.evm_db);
  CHECK(a.rx_symbols.size() == 4);
  // 20 dB OSNR is comfortable for 8-QAM: essentially error free.
  CHECK(a.report.ber < 1e-3);
  // A different seed draws different noise: EVM moves even when both runs
  // are error free.
  PointOutcome c = simulate_point(cfg, 43);
  CHECK(a.report.evm_db != doctest::Approx(c.report.evm_db).epsilon(1e-12));
}

TEST_CASE("experiment CSVs are bit-reproducible and thread independent") {
  // Smallest meaningful sweep: 2 OSNR points back-to-back.
  const char* cfg_text = R"({
    "scenario": "ber_vs_osnr",
    "n_symbols": 16384,
    "master_seed": 9,
    "distances_km": [0],
    "osnrs_db": [14, 16]
  })";
  auto run = [&](const std::string& dir, int threads) {
    ExperimentSpec s = validate_config_text(cfg_text);
    s.output_dir = dir;
    s.threads = threads;
    ExperimentResult r = run_experiment(s);
    CHECK(r.failed_points == 0);
    return r.csv;
  };
  fs::create_directories("harness_test_out/a");
  fs::create_directories("harness_test_out/b");
  const std::string serial1 = run("harness_test_out/a", 1);
  const std::string serial2 = run("harness_test_out/a", 1);
  const std::string parallel = run("harness_test_out/b", 2);
  CHECK(serial1 == serial2);   // rerun reproduces bytes
  CHECK(serial1 == parallel);  // scheduling independent
  // Artifacts land on disk: CSV plus manifest.
  CHECK(slurp("harness_test_out/a/ber_vs_osnr.csv") == serial1);
  const std::string manifest = slurp("harness_test_out/a/manifest.json");
  CHECK(manifest.find("point_seeds") != std::string::npos);
  const std::string csv = serial1;
  // Every row carries seed and status columns.
  CHECK(csv.find("seed") != std::string::npos);
  CHECK(csv.find("status") != std::string::npos);
  CHECK(csv.find("ok") != std::string::npos);
  fs::remove_all("harness_test_out");
}
