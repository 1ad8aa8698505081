#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include <json.hpp>

#include "ifmsim/config.hpp"
#include "ifmsim/io.hpp"
#include "ifmsim/procedures.hpp"
#include "ifmsim/run.hpp"

#ifdef __unix__
#include <sys/wait.h>
#endif

using namespace ifmsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ifmsim_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_binary(const std::string& args) {
#ifdef IFMSIM_BIN
  const int status = std::system((std::string(IFMSIM_BIN) + " " + args).c_str());
#ifdef __unix__
  if (WIFEXITED(status)) return WEXITSTATUS(status);
#endif
  return status;
#else
  (void)args;
  return -1;
#endif
}

}  // namespace

TEST_CASE("empty config file yields the documented defaults") {
  const auto config = cli::parse_config_text("");
  CHECK(config.beam.wavelength == doctest::Approx(1.92e-10).epsilon(1e-12));
  CHECK(config.beam.prism_beam_separation == doctest::Approx(2.3e-5).epsilon(1e-12));
  CHECK(config.noise.contrast == 0.91);
  CHECK(config.noise.polarization == 0.993);
  CHECK(config.noise.flipper1_efficiency == 0.98);
  CHECK(config.noise.flipper2_efficiency == 0.98);
  CHECK(config.thermal.phase_drift_rate == 1.92);
  CHECK(config.counting.base_rate == 50.0);
  CHECK(config.seed.value == 12345);
  // The default coil is calibrated so 0.7 A gives a pi/2 rotation.
  auto coil = config.coil;
  coil.current = 0.7;
  CHECK(apparatus::larmor_angle(coil, config.beam, config.constants) ==
        doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
}

TEST_CASE("config parsing accepts comments and overrides") {
  const auto config = cli::parse_config_text(
      "# comment line\n"
      "noise.contrast = 0.82   # trailing comment\n"
      "\n"
      "counting.poisson = false\n"
      "rocking.coil = al_wire\n"
      "thermal.contrast_anchors = 25.0:0.9, 26.0:0.5\n"
      "seed = 99\n");
  CHECK(config.noise.contrast == 0.82);
  CHECK(config.counting.poisson == false);
  CHECK(config.rocking.coil == apparatus::CoilKind::al_wire);
  CHECK(config.thermal.contrast_vs_temperature.size() == 2);
  CHECK(config.seed.value == 99);
}

TEST_CASE("config errors carry the key path") {
  SUBCASE("range violation") {
    try {
      cli::parse_config_text("noise.contrast = 1.3\n");
      FAIL("expected ConfigError");
    } catch (const cli::ConfigError& e) {
      CHECK(std::string(e.what()).find("noise.contrast") != std::string::npos);
    }
  }
  SUBCASE("duplicate key") {
    try {
      cli::parse_config_text("seed = 1\nseed = 2\n");
      FAIL("expected ConfigError");
    } catch (const cli::ConfigError& e) {
      CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
      CHECK(std::string(e.what()).find("seed") != std::string::npos);
    }
  }
  SUBCASE("unknown key") {
    try {
      cli::parse_config_text("noise.contrsat = 0.9\n");
      FAIL("expected ConfigError");
    } catch (const cli::ConfigError& e) {
      CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
      CHECK(std::string(e.what()).find("noise.contrsat") != std::string::npos);
    }
  }
  SUBCASE("malformed line") {
    CHECK_THROWS_AS(cli::parse_config_text("noise.contrast 0.9\n"), cli::ConfigError);
  }
  SUBCASE("malformed number") {
    CHECK_THROWS_AS(cli::parse_config_text("noise.contrast = zero\n"), cli::ConfigError);
  }
  SUBCASE("negative rate") {
    CHECK_THROWS_AS(cli::parse_config_text("counting.base_rate = -5\n"), cli::ConfigError);
  }
}

TEST_CASE("load_config reads files and rejects missing ones") {
  const auto dir = temp_dir("config");
  const auto path = dir / "run.conf";
  {
    std::ofstream file(path);
    file << "noise.contrast = 0.5\n";
  }
  const auto config = cli::load_config(path.string());
  CHECK(config.noise.contrast == 0.5);
  CHECK_THROWS_AS(cli::load_config((dir / "missing.conf").string()), cli::ConfigError);
}

TEST_CASE("joint counts table round trip") {
  const auto dir = temp_dir("counts");
  auto config = cli::default_config();
  config.counting.fit_time_per_point = 80.0;
  config.counting.time_per_point = 40.0;
  const auto run = procedures::run_bell_experiment(config, {2718});

  const auto path = dir / "counts.csv";
  cli::write_joint_counts(path, run.fringe_records);
  const auto parsed = cli::read_joint_counts(path);
  REQUIRE(parsed.size() == run.fringe_records.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].counts == run.fringe_records[i].counts);  // exact
    CHECK(parsed[i].integration_time == run.fringe_records[i].integration_time);
    CHECK(parsed[i].detector == run.fringe_records[i].detector);
    // Full-precision printing makes the angle round trip exact.
    CHECK(parsed[i].setting.alpha == run.fringe_records[i].setting.alpha);
    CHECK(parsed[i].setting.chi == run.fringe_records[i].setting.chi);
  }

  SUBCASE("reanalysis of the round-tripped table matches the in-run fits") {
    const auto groups = cli::fit_counts_file(path);
    REQUIRE(groups.size() == 4);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& direct = run.fringe_fits[g];
      const auto& refit = groups[g].fit;
      CHECK(refit.offset == direct.offset);
      CHECK(refit.amplitude == direct.amplitude);
      CHECK(refit.phase == direct.phase);
      CHECK(refit.contrast == direct.contrast);
    }
  }

  SUBCASE("malformed tables are rejected") {
    const auto bad = dir / "bad.csv";
    cli::write_text_file(bad, "wrong,header\n1,2\n");
    CHECK_THROWS(cli::read_joint_counts(bad));
  }
}

TEST_CASE("bell run writes its artifacts and a faithful summary") {
  const auto dir = temp_dir("bell_artifacts");
  auto config = cli::default_config();
  cli::RunOptions options;
  options.output_dir_override = dir.string();
  options.seed_override = 777;
  options.quiet = true;
  cli::run(cli::Subcommand::bell, config, options);

  for (const char* name :
       {"bell_fringe_counts.csv", "bell_cardinal_counts.csv", "bell_summary.txt",
        "bell_summary.json", "bell_manifest.json"}) {
    CHECK(fs::exists(dir / name));
  }

  const auto summary = cli::read_text_file(dir / "bell_summary.txt");
  CHECK(summary.find("s_value = ") != std::string::npos);
  CHECK(summary.find("s_sigma = ") != std::string::npos);
  CHECK(summary.find("n_sigma_violation = ") != std::string::npos);

  // The summary S matches a direct rerun of the procedure.
  const auto rerun = procedures::run_bell_experiment(config, {777});
  CHECK(summary.find("s_value = " + cli::format_full(rerun.result.s_value)) !=
        std::string::npos);

  const auto manifest = cli::read_text_file(dir / "bell_manifest.json");
  CHECK(manifest.find("\"seed\": 777") != std::string::npos);
  CHECK(manifest.find("\"subcommand\": \"bell\"") != std::string::npos);
  CHECK(manifest.find("noise.contrast") != std::string::npos);
}

TEST_CASE("seeded reruns are byte identical") {
  const auto dir_a = temp_dir("det_a");
  const auto dir_b = temp_dir("det_b");
  auto config = cli::default_config();
  // Keep this quick: modest integration times.
  config.counting.time_per_point = 20.0;
  config.counting.fit_time_per_point = 30.0;

  for (const auto& dir : {dir_a, dir_b}) {
    cli::RunOptions options;
    options.output_dir_override = dir.string();
    options.seed_override = 42;
    options.quiet = true;
    cli::run(cli::Subcommand::bell, config, options);
  }
  for (const char* name :
       {"bell_fringe_counts.csv", "bell_cardinal_counts.csv", "bell_summary.txt",
        "bell_summary.json", "bell_manifest.json"}) {
    CHECK(cli::read_text_file(dir_a / name) == cli::read_text_file(dir_b / name));
  }
}

TEST_CASE("the manifest alone reproduces a run") {
  const auto dir = temp_dir("manifest_repro");
  auto config = cli::parse_config_text(
      "noise.contrast = 0.87\n"
      "counting.time_per_point = 18\n"
      "counting.fit_time_per_point = 27\n"
      "seed = 31415\n");
  cli::RunOptions options;
  options.output_dir_override = dir.string();
  options.quiet = true;
  cli::run(cli::Subcommand::bell, config, options);

  // Rebuild a config file from the manifest's config echo and rerun.
  const auto manifest = nlohmann::json::parse(cli::read_text_file(dir / "bell_manifest.json"));
  std::string rebuilt_text;
  for (const auto& [key, value] : manifest["config"].items()) {
    if (key == "output_dir") continue;
    rebuilt_text += key + " = " + value.get<std::string>() + "\n";
  }
  const auto rebuilt = cli::parse_config_text(rebuilt_text);
  const auto rerun_dir = temp_dir("manifest_repro_rerun");
  cli::RunOptions rerun_options;
  rerun_options.output_dir_override = rerun_dir.string();
  rerun_options.seed_override = manifest["seed"].get<std::uint64_t>();
  rerun_options.quiet = true;
  cli::run(cli::Subcommand::bell, rebuilt, rerun_options);

  for (const char* name : {"bell_fringe_counts.csv", "bell_cardinal_counts.csv",
                           "bell_summary.txt", "bell_summary.json"}) {
    CHECK(cli::read_text_file(dir / name) == cli::read_text_file(rerun_dir / name));
  }
}

TEST_CASE("fit subcommand reproduces the in-run fits through persistence") {
  const auto dir = temp_dir("fit_roundtrip");
  auto config = cli::default_config();
  config.counting.time_per_point = 50.0;
  config.counting.fit_time_per_point = 120.0;
  cli::RunOptions options;
  options.output_dir_override = dir.string();
  options.seed_override = 4242;
  options.quiet = true;
  cli::run(cli::Subcommand::bell, config, options);

  cli::RunOptions fit_options;
  fit_options.output_dir_override = (dir / "fit").string();
  fit_options.quiet = true;
  fit_options.fit_input = (dir / "bell_fringe_counts.csv").string();
  cli::run(cli::Subcommand::fit, config, fit_options);

  const auto bell_summary = cli::read_text_file(dir / "bell_summary.txt");
  const auto fit_summary = cli::read_text_file(dir / "fit" / "fit_summary.txt");

  // Compare the four fitted contrasts key by key.
  auto value_of = [](const std::string& text, const std::string& key) {
    const auto pos = text.find(key + " = ");
    REQUIRE(pos != std::string::npos);
    const auto start = pos + key.size() + 3;
    return std::stod(text.substr(start, text.find('\n', start) - start));
  };
  for (int g = 0; g < 4; ++g) {
    const double direct = value_of(bell_summary, "fringe" + std::to_string(g) + ".contrast");
    const double refit = value_of(fit_summary, "group" + std::to_string(g) + ".contrast");
    CHECK(std::abs(direct - refit) <= 1e-12);
  }
}

TEST_CASE("other subcommands produce their artifacts") {
  auto config = cli::default_config();
  config.counting.fit_time_per_point = 40.0;

  const struct {
    cli::Subcommand sub;
    const char* counts;
    const char* summary_key;
  } cases[] = {
      {cli::Subcommand::raster, "raster_counts.csv", "max_contrast = "},
      {cli::Subcommand::temperature, "temperature_counts.csv", "phase_slope_rad_per_c = "},
      {cli::Subcommand::rocking, "rocking_counts.csv", "peak0.fwhm_rad = "},
      {cli::Subcommand::two_flipper, "twoflipper_counts.csv", "polarization = "},
      {cli::Subcommand::larmor_cal, "larmor_counts.csv", "amps_per_half_pi = "},
  };
  for (const auto& c : cases) {
    const auto dir = temp_dir(std::string("sub_") + cli::subcommand_name(c.sub));
    cli::RunOptions options;
    options.output_dir_override = dir.string();
    options.quiet = true;
    // Smallish raster grid keeps this test snappy.
    auto cfg = config;
    cfg.raster.x_max = 4.0;
    cfg.raster.z_max = 2.0;
    cli::run(c.sub, cfg, options);
    CHECK(fs::exists(dir / c.counts));
    const std::string stem = std::string(cli::subcommand_name(c.sub)) + "_summary";
    const auto summary = cli::read_text_file(dir / (stem + ".txt"));
    CHECK(summary.find(c.summary_key) != std::string::npos);
    CHECK(fs::exists(dir / (std::string(cli::subcommand_name(c.sub)) + "_manifest.json")));
  }
}

#ifdef IFMSIM_BIN
TEST_CASE("binary exit codes") {
  const auto dir = temp_dir("binary");

  SUBCASE("success is 0") {
    CHECK(run_binary("rocking --quiet --seed 3 --out " + (dir / "ok").string()) == 0);
  }
  SUBCASE("usage errors are 1") {
    CHECK(run_binary("bogus-subcommand 2>/dev/null") == 1);
    CHECK(run_binary("2>/dev/null") == 1);  // missing subcommand
  }
  SUBCASE("runtime errors are 2") {
    const auto bad_config = dir / "bad.conf";
    cli::write_text_file(bad_config, "noise.contrast = 1.5\n");
    CHECK(run_binary("bell --config " + bad_config.string() + " 2>/dev/null") == 2);
    CHECK(run_binary("fit " + (dir / "missing.csv").string() + " 2>/dev/null") == 2);
  }
  SUBCASE("IFMSIM_OUT environment override is honored") {
    const auto out = dir / "env_out";
    CHECK(std::system(("IFMSIM_OUT=" + out.string() + " " + IFMSIM_BIN +
                       " rocking --quiet --seed 5 >/dev/null")
                          .c_str()) == 0);
    CHECK(fs::exists(out / "rocking_summary.json"));
  }
}
#endif
