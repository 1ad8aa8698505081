#include "ifmsim/run.hpp"

#include <cmath>
#include <iostream>
#include <map>

#include "ifmsim/io.hpp"
#include "ifmsim/procedures.hpp"

namespace ifmsim::cli {

namespace {

namespace fs = std::filesystem;

void add_fringe_fit(Summary& summary, const std::string& prefix, const analysis::FringeFit& fit) {
  summary.add(prefix + ".offset", fit.offset);
  summary.add(prefix + ".offset_sigma", fit.offset_sigma());
  summary.add(prefix + ".amplitude", fit.amplitude);
  summary.add(prefix + ".amplitude_sigma", fit.amplitude_sigma());
  summary.add(prefix + ".phase_rad", fit.phase);
  summary.add(prefix + ".phase_sigma", fit.phase_sigma());
  summary.add(prefix + ".contrast", fit.contrast);
  summary.add(prefix + ".contrast_sigma", fit.contrast_sigma());
  summary.add(prefix + ".chi_square", fit.chi_square);
  summary.add_integer(prefix + ".dof", fit.dof);
}

struct RunContext {
  fs::path dir;
  std::string subcommand;
  std::uint64_t seed;
  const ExperimentConfig* config;
  std::vector<std::string> outputs;

  void finish(const Summary& summary) const {
    summary.write(dir, subcommand + "_summary");
    auto files = outputs;
    files.push_back(subcommand + "_summary.txt");
    files.push_back(subcommand + "_summary.json");
    write_manifest(dir / (subcommand + "_manifest.json"), subcommand, seed,
                   config_key_values(*config), files);
  }
};

void run_bell(RunContext& ctx, const ExperimentConfig& config, bool quiet) {
  const auto run = procedures::run_bell_experiment(config, {ctx.seed});

  write_joint_counts(ctx.dir / "bell_fringe_counts.csv", run.fringe_records);
  write_joint_counts(ctx.dir / "bell_cardinal_counts.csv", run.cardinal_records);
  ctx.outputs = {"bell_fringe_counts.csv", "bell_cardinal_counts.csv"};

  Summary summary;
  summary.add("s_value", run.result.s_value);
  summary.add("s_sigma", run.result.s_sigma);
  summary.add("n_sigma_violation", run.result.n_sigma_violation);
  summary.add("predicted_visibility", run.predicted_visibility);
  summary.add("predicted_s", run.predicted_s);
  for (std::size_t i = 0; i < run.result.e.size(); ++i) {
    const auto& e = run.result.e[i];
    const std::string prefix = "e" + std::to_string(i + 1);
    summary.add(prefix + ".alpha_rad", e.setting.alpha);
    summary.add(prefix + ".chi_rad", e.setting.chi);
    summary.add(prefix + ".value", e.value);
    summary.add(prefix + ".sigma", e.sigma);
    summary.add(prefix + ".fringe_route_value", run.fringe_route_e[i].value);
    summary.add(prefix + ".fringe_route_sigma", run.fringe_route_e[i].sigma);
  }
  double total_counts = 0;
  for (const auto& rec : run.fringe_records) total_counts += rec.counts;
  for (const auto& rec : run.cardinal_records) total_counts += rec.counts;
  summary.add("total_counts", total_counts);
  for (std::size_t i = 0; i < run.fringe_fits.size(); ++i) {
    const std::string prefix = "fringe" + std::to_string(i);
    summary.add(prefix + ".alpha_rad", run.fringe_alphas[i]);
    add_fringe_fit(summary, prefix, run.fringe_fits[i]);
  }
  ctx.finish(summary);

  if (!quiet) {
    std::cout << "S = " << format_full(run.result.s_value) << " +- "
              << format_full(run.result.s_sigma) << "  (" << format_full(run.result.n_sigma_violation)
              << " sigma above 2)\n";
  }
}

void run_raster(RunContext& ctx, const ExperimentConfig& config, bool quiet) {
  auto plan = procedures::default_raster_plan(config);
  plan.seed = {ctx.seed};
  const auto map = procedures::run_raster_scan(config, plan);

  std::vector<std::vector<std::string>> rows;
  for (const auto& cell : map.cells)
    for (const auto& rec : cell.records)
      rows.push_back({format_full(cell.x), format_full(cell.z), format_angle(rec.setting.chi),
                      format_full(rec.integration_time), format_full(rec.counts)});
  write_table(ctx.dir / "raster_counts.csv", {"x_mm", "z_mm", "chi_rad", "time_s", "counts"},
              rows);

  std::vector<std::vector<std::string>> cells;
  double best = -1, best_x = 0, best_z = 0, best_sigma = 0;
  for (Eigen::Index zi = 0; zi < map.contrast.rows(); ++zi) {
    for (Eigen::Index xi = 0; xi < map.contrast.cols(); ++xi) {
      const double c = map.contrast(zi, xi);
      cells.push_back({format_full(map.x_positions[static_cast<std::size_t>(xi)]),
                       format_full(map.z_positions[static_cast<std::size_t>(zi)]), format_full(c),
                       format_full(map.contrast_sigma(zi, xi))});
      if (c > best) {
        best = c;
        best_x = map.x_positions[static_cast<std::size_t>(xi)];
        best_z = map.z_positions[static_cast<std::size_t>(zi)];
        best_sigma = map.contrast_sigma(zi, xi);
      }
    }
  }
  write_table(ctx.dir / "raster_contrast.csv", {"x_mm", "z_mm", "contrast", "contrast_sigma"},
              cells);
  ctx.outputs = {"raster_counts.csv", "raster_contrast.csv"};

  Summary summary;
  summary.add_integer("x_cells", static_cast<std::int64_t>(map.x_positions.size()));
  summary.add_integer("z_cells", static_cast<std::int64_t>(map.z_positions.size()));
  summary.add("max_contrast", best);
  summary.add("max_contrast_sigma", best_sigma);
  summary.add("max_x_mm", best_x);
  summary.add("max_z_mm", best_z);
  summary.add("mean_contrast", map.contrast.mean());
  ctx.finish(summary);

  if (!quiet)
    std::cout << "raster max contrast " << format_full(best) << " at (" << best_x << ", " << best_z
              << ") mm\n";
}

void run_temperature(RunContext& ctx, const ExperimentConfig& config, bool quiet) {
  std::vector<double> temperatures;
  for (double t = config.temperature.t_min; t <= config.temperature.t_max + 1e-9;
       t += config.temperature.step)
    temperatures.push_back(t);
  const auto scan = procedures::run_temperature_scan(config, temperatures, {ctx.seed});

  std::vector<std::vector<std::string>> rows;
  for (const auto& point : scan.points)
    for (const auto& rec : point.records)
      rows.push_back({format_full(point.temperature), format_angle(rec.setting.chi),
                      format_full(rec.integration_time), format_full(rec.counts)});
  write_table(ctx.dir / "temperature_counts.csv", {"temperature_c", "chi_rad", "time_s", "counts"},
              rows);
  ctx.outputs = {"temperature_counts.csv"};

  Summary summary;
  summary.add("phase_slope_rad_per_c", scan.phase_slope);
  summary.add("phase_slope_sigma", scan.phase_slope_sigma);
  summary.add_integer("points", static_cast<std::int64_t>(scan.points.size()));
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const auto& p = scan.points[i];
    const std::string prefix = "point" + std::to_string(i);
    summary.add(prefix + ".temperature_c", p.temperature);
    summary.add(prefix + ".contrast", p.fit.contrast);
    summary.add(prefix + ".contrast_sigma", p.fit.contrast_sigma());
    summary.add(prefix + ".fringe_position_rad", p.fringe_position);
    summary.add(prefix + ".phase_sigma", p.fit.phase_sigma());
  }
  ctx.finish(summary);

  if (!quiet)
    std::cout << "phase drift " << format_full(scan.phase_slope) << " rad/C over "
              << scan.points.size() << " temperatures\n";
}

void run_rocking(RunContext& ctx, const ExperimentConfig& config, bool quiet) {
  const auto grid = procedures::default_rocking_grid(config);
  const auto scan = procedures::run_rocking_scan(config, grid, {ctx.seed});

  std::vector<std::vector<std::string>> rows;
  for (const auto& rec : scan.records)
    rows.push_back({format_angle(rec.setting.chi), format_full(rec.integration_time),
                    format_full(rec.counts)});
  write_table(ctx.dir / "rocking_counts.csv", {"angle_rad", "time_s", "counts"}, rows);
  ctx.outputs = {"rocking_counts.csv"};

  Summary summary;
  summary.add_integer("peaks", static_cast<std::int64_t>(scan.fit.peaks.size()));
  summary.add("chi_square", scan.fit.chi_square);
  summary.add_integer("dof", scan.fit.dof);
  for (std::size_t i = 0; i < scan.fit.peaks.size(); ++i) {
    const auto& p = scan.fit.peaks[i];
    const std::string prefix = "peak" + std::to_string(i);
    summary.add(prefix + ".center_rad", p.peak.center);
    summary.add(prefix + ".center_sigma", p.center_sigma);
    summary.add(prefix + ".fwhm_rad", p.peak.fwhm);
    summary.add(prefix + ".fwhm_sigma", p.fwhm_sigma);
    summary.add(prefix + ".height", p.peak.height);
    summary.add(prefix + ".height_sigma", p.height_sigma);
  }
  for (std::size_t i = 0; i < scan.configured_peaks.size(); ++i) {
    const auto& p = scan.configured_peaks[i];
    const std::string prefix = "configured_peak" + std::to_string(i);
    summary.add(prefix + ".center_rad", p.center);
    summary.add(prefix + ".fwhm_rad", p.fwhm);
    summary.add(prefix + ".height", p.height);
  }
  ctx.finish(summary);

  if (!quiet && !scan.fit.peaks.empty())
    std::cout << "fitted FWHM " << format_full(scan.fit.peaks.front().peak.fwhm) << " rad\n";
}

void run_two_flipper(RunContext& ctx, const ExperimentConfig& config, bool quiet) {
  const auto result = procedures::run_two_flipper_analysis(config, {ctx.seed});

  const std::array<std::pair<int, int>, 4> combos = {{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < result.records.size(); ++i)
    rows.push_back({std::to_string(combos[i].first), std::to_string(combos[i].second),
                    format_full(result.records[i].integration_time),
                    format_full(result.records[i].counts)});
  write_table(ctx.dir / "twoflipper_counts.csv", {"flipper1", "flipper2", "time_s", "counts"},
              rows);
  ctx.outputs = {"twoflipper_counts.csv"};

  Summary summary;
  summary.add("polarization", result.polarization);
  summary.add("polarization_sigma", result.polarization_sigma);
  summary.add("flipper1_efficiency", result.efficiency1);
  summary.add("flipper1_efficiency_sigma", result.efficiency1_sigma);
  summary.add("flipper2_efficiency", result.efficiency2);
  summary.add("flipper2_efficiency_sigma", result.efficiency2_sigma);
  ctx.finish(summary);

  if (!quiet)
    std::cout << "polarization " << format_full(result.polarization) << " +- "
              << format_full(result.polarization_sigma) << "\n";
}

void run_larmor_cal(RunContext& ctx, const ExperimentConfig& config, bool quiet) {
  const auto currents = procedures::default_larmor_currents(config);
  const auto cal =
      procedures::run_larmor_calibration(config, qcore::Path::I, currents, {ctx.seed});

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < cal.records.size(); ++i)
    rows.push_back({format_full(cal.currents[i]), format_full(cal.records[i].integration_time),
                    format_full(cal.records[i].counts)});
  write_table(ctx.dir / "larmor_counts.csv", {"current_a", "time_s", "counts"}, rows);
  ctx.outputs = {"larmor_counts.csv"};

  Summary summary;
  summary.add("amps_per_half_pi", cal.amps_per_half_pi);
  summary.add("amps_per_half_pi_sigma", cal.amps_sigma);
  summary.add("frequency_rad_per_a", cal.fit.frequency);
  summary.add("frequency_sigma", cal.fit.frequency_sigma());
  summary.add("calibrated_path", "I");
  ctx.finish(summary);

  if (!quiet)
    std::cout << "pi/2 current " << format_full(cal.amps_per_half_pi) << " A +- "
              << format_full(cal.amps_sigma) << "\n";
}

void run_fit(RunContext& ctx, bool quiet, const std::string& input) {
  if (input.empty()) throw std::invalid_argument("fit requires an input counts file");
  const auto records = read_joint_counts(input);
  const auto groups = fit_counts_file(input);

  write_joint_counts(ctx.dir / "fit_counts.csv", records);
  ctx.outputs = {"fit_counts.csv"};

  Summary summary;
  summary.add("input", input);
  summary.add_integer("groups", static_cast<std::int64_t>(groups.size()));
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const std::string prefix = "group" + std::to_string(i);
    summary.add(prefix + ".detector", detector_name(groups[i].detector));
    summary.add(prefix + ".alpha_rad", groups[i].alpha);
    add_fringe_fit(summary, prefix, groups[i].fit);
  }
  ctx.finish(summary);

  if (!quiet) std::cout << "fitted " << groups.size() << " fringe groups\n";
}

}  // namespace

Subcommand parse_subcommand(const std::string& name) {
  if (name == "bell") return Subcommand::bell;
  if (name == "raster") return Subcommand::raster;
  if (name == "temperature") return Subcommand::temperature;
  if (name == "rocking") return Subcommand::rocking;
  if (name == "two-flipper") return Subcommand::two_flipper;
  if (name == "larmor-cal") return Subcommand::larmor_cal;
  if (name == "fit") return Subcommand::fit;
  throw std::invalid_argument("unknown subcommand '" + name + "'");
}

std::string subcommand_name(Subcommand sub) {
  switch (sub) {
    case Subcommand::bell: return "bell";
    case Subcommand::raster: return "raster";
    case Subcommand::temperature: return "temperature";
    case Subcommand::rocking: return "rocking";
    case Subcommand::two_flipper: return "two-flipper";
    case Subcommand::larmor_cal: return "larmor-cal";
    case Subcommand::fit: return "fit";
  }
  return "unknown";
}

std::vector<GroupFit> fit_counts_file(const std::filesystem::path& path) {
  const auto records = read_joint_counts(path);
  // Group by (detector, alpha) in order of first appearance.
  std::vector<std::pair<counting::Detector, double>> keys;
  std::vector<std::vector<counting::CountRecord>> grouped;
  for (const auto& rec : records) {
    const std::pair<counting::Detector, double> key{rec.detector, rec.setting.alpha};
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      grouped.emplace_back();
      it = std::prev(keys.end());
    }
    grouped[static_cast<std::size_t>(it - keys.begin())].push_back(rec);
  }
  std::vector<GroupFit> fits;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    GroupFit group;
    group.detector = keys[i].first;
    group.alpha = keys[i].second;
    group.fit = analysis::fit_fringe(grouped[i]);
    fits.push_back(group);
  }
  return fits;
}

void run(Subcommand sub, const ExperimentConfig& config, const RunOptions& options) {
  RunContext ctx;
  ctx.subcommand = subcommand_name(sub);
  ctx.seed = options.seed_override.value_or(config.seed.value);
  ctx.config = &config;
  ctx.dir = options.output_dir_override.value_or(config.output_dir);
  std::filesystem::create_directories(ctx.dir);

  // The manifest echoes the effective seed so a run can be reproduced from
  // it alone.
  ExperimentConfig effective = config;
  effective.seed.value = ctx.seed;
  ctx.config = &effective;

  switch (sub) {
    case Subcommand::bell: run_bell(ctx, effective, options.quiet); break;
    case Subcommand::raster: run_raster(ctx, effective, options.quiet); break;
    case Subcommand::temperature: run_temperature(ctx, effective, options.quiet); break;
    case Subcommand::rocking: run_rocking(ctx, effective, options.quiet); break;
    case Subcommand::two_flipper: run_two_flipper(ctx, effective, options.quiet); break;
    case Subcommand::larmor_cal: run_larmor_cal(ctx, effective, options.quiet); break;
    case Subcommand::fit: run_fit(ctx, options.quiet, options.fit_input); break;
  }
}

}  // namespace ifmsim::cli
