#include "ifmsim/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ifmsim::procedures {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

counting::RngSeed procedure_stream(counting::RngSeed master, ScanKind kind) {
  return counting::derive_stream(master, static_cast<std::uint64_t>(kind));
}

counting::CountRecord measure(double rate, double time, counting::RngSeed seed, bool poisson) {
  return poisson ? counting::draw_counts(rate, time, seed) : counting::expected_counts(rate, time);
}

// Path-interference rate without spin analysis (contrast scans).
double path_rate(const qcore::SpinPathStated& state, double chi,
                 const cli::ExperimentConfig& config) {
  const double p = std::max(
      (state.rho * qcore::path_projector(chi, +1)).trace().real(), 0.0);
  return config.counting.base_rate * config.beam.detector_efficiency * p;
}

// Spin-analyzed rate at analyzer azimuth `alpha` (polarimetry scans);
// `intensity` accounts for beam attenuation such as a path blocker.
double spin_rate(const qcore::SpinPathStated& state, double alpha, double intensity,
                 const cli::ExperimentConfig& config) {
  const double p = std::max(
      (state.rho * qcore::spin_projector(alpha, +1)).trace().real(), 0.0);
  return config.counting.base_rate * config.beam.detector_efficiency * intensity * p;
}

// Spin-up transmission probability (two-flipper polarimetry analyzer).
double spin_up_probability(const qcore::SpinPathStated& state) {
  qcore::Matrix2<double> up = qcore::Matrix2<double>::Zero();
  up(0, 0) = 1.0;
  const auto proj = qcore::kron<double>(up, qcore::Matrix2<double>::Identity());
  return std::max((state.rho * proj).trace().real(), 0.0);
}

// Spin-up beam split over both paths: |up> (x) (|I> + |II>)/sqrt(2).
qcore::SpinPathStated split_beam_state() {
  qcore::SpinPathStated state;
  state.rho(0, 0) = 0.5;
  state.rho(0, 1) = 0.5;
  state.rho(1, 0) = 0.5;
  state.rho(1, 1) = 0.5;
  return state;
}

// Path-interference state for contrast scans at the given contrast and
// extra fringe phase.
qcore::SpinPathStated contrast_scan_state(double contrast, double phase) {
  auto state = split_beam_state();
  state = qcore::apply_channel(state, apparatus::make_phase_shifter(phase));
  state = qcore::apply_channel(state, apparatus::make_path_dephasing(contrast));
  return state;
}

std::vector<double> chi_grid(int points) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j) grid[static_cast<std::size_t>(j)] = kTwoPi * j / points;
  return grid;
}

double effective_contrast(const cli::ExperimentConfig& config) {
  return config.noise.thermal_enabled
             ? apparatus::contrast_at_temperature(config.thermal, config.noise.temperature)
             : config.noise.contrast;
}

// Weighted linear regression y = a + b t; returns (b, sigma_b).
std::pair<double, double> weighted_slope(std::span<const double> t, std::span<const double> y,
                                         std::span<const double> sigma) {
  double sw = 0, swt = 0, swy = 0, swtt = 0, swty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double s = std::max(sigma[i], 1e-12);
    const double w = 1.0 / (s * s);
    sw += w;
    swt += w * t[i];
    swy += w * y[i];
    swtt += w * t[i] * t[i];
    swty += w * t[i] * y[i];
  }
  const double det = sw * swtt - swt * swt;
  if (!(det > 0)) throw std::invalid_argument("degenerate abscissa for slope regression");
  return {(sw * swty - swt * swy) / det, std::sqrt(sw / det)};
}

}  // namespace

void ScanPlan::validate() const {
  if (grid.empty()) throw std::invalid_argument("scan plan has an empty grid");
  if (!(time_per_point > 0)) throw std::invalid_argument("scan plan time_per_point must be positive");
}

qcore::SpinPathStated bell_state_with_noise(const cli::ExperimentConfig& config) {
  auto state = qcore::prepare_bell_state();
  state = qcore::apply_channel(state, apparatus::make_path_dephasing(effective_contrast(config)));
  state = qcore::apply_channel(state, apparatus::make_spin_depolarizer(config.noise.polarization));
  // Spin-turner inefficiency enters the joint fringes as a visibility
  // factor; apply each efficiency as an isotropic spin-visibility loss.
  state = qcore::apply_channel(state,
                               apparatus::make_spin_depolarizer(config.noise.flipper1_efficiency));
  state = qcore::apply_channel(state,
                               apparatus::make_spin_depolarizer(config.noise.flipper2_efficiency));
  if (config.noise.thermal_enabled) {
    const double drift = apparatus::thermal_phase_shift(config.thermal, config.noise.temperature);
    state = qcore::apply_channel(state, apparatus::make_phase_shifter(drift));
  }
  return state;
}

BellRun run_bell_experiment(const cli::ExperimentConfig& config, counting::RngSeed seed) {
  const auto state = bell_state_with_noise(config);
  const bool poisson = config.counting.poisson;
  const double base = config.counting.base_rate;
  const double eff = config.beam.detector_efficiency;

  const counting::RngSeed proc = procedure_stream(seed, ScanKind::bell);
  const counting::RngSeed fringe_stream = counting::derive_stream(proc, 0);
  const counting::RngSeed cardinal_stream = counting::derive_stream(proc, 1);

  BellRun run;
  run.fringe_alphas = {0.0, kPi / 2.0, kPi, 3.0 * kPi / 2.0};

  // Fine fringe scans for the per-angle sinusoid fits.
  constexpr int kFringePoints = 16;
  const std::vector<double> fringe_chis = chi_grid(kFringePoints);
  for (std::size_t a = 0; a < run.fringe_alphas.size(); ++a) {
    std::vector<counting::CountRecord> records;
    for (std::size_t j = 0; j < fringe_chis.size(); ++j) {
      const qcore::JointSettingd setting{run.fringe_alphas[a], fringe_chis[j]};
      const double rate = counting::expected_rate(state, setting, base, eff);
      auto rec = measure(rate, config.counting.fit_time_per_point,
                         counting::derive_stream(fringe_stream, a * fringe_chis.size() + j),
                         poisson);
      rec.setting = setting;
      rec.detector = counting::Detector::O;
      records.push_back(rec);
    }
    run.fringe_fits[a] = analysis::fit_fringe(records);
    run.fringe_records.insert(run.fringe_records.end(), records.begin(), records.end());
  }

  // Cardinal four-point measurements defining the expectation values.
  const std::array<double, 4> cardinal_chis = {kPi / 4.0, 3.0 * kPi / 4.0, 5.0 * kPi / 4.0,
                                               7.0 * kPi / 4.0};
  std::array<std::array<counting::CountRecord, 4>, 4> cardinal{};  // [alpha][chi]
  for (std::size_t a = 0; a < run.fringe_alphas.size(); ++a) {
    for (std::size_t j = 0; j < cardinal_chis.size(); ++j) {
      const qcore::JointSettingd setting{run.fringe_alphas[a], cardinal_chis[j]};
      const double rate = counting::expected_rate(state, setting, base, eff);
      auto rec = measure(rate, config.counting.time_per_point,
                         counting::derive_stream(cardinal_stream, a * cardinal_chis.size() + j),
                         poisson);
      rec.setting = setting;
      rec.detector = counting::Detector::O;
      cardinal[a][j] = rec;
      run.cardinal_records.push_back(rec);
    }
  }

  // E(alpha, chi) from counts at (a,x), (a+pi,x+pi), (a,x+pi), (a+pi,x).
  // Alpha indices: 0 -> 0, pi/2 -> 1, pi -> 2, 3pi/2 -> 3.
  // Chi indices: pi/4 -> 0, 3pi/4 -> 1, 5pi/4 -> 2, 7pi/4 -> 3.
  auto estimate = [&](std::size_t a, std::size_t x) {
    const std::size_t a_pi = (a + 2) % 4;
    const std::size_t x_pi = (x + 2) % 4;
    return analysis::expectation_from_counts(cardinal[a][x], cardinal[a_pi][x_pi],
                                             cardinal[a][x_pi], cardinal[a_pi][x]);
  };
  const auto e1 = estimate(0, 0);  // (0, pi/4)
  const auto e2 = estimate(0, 3);  // (0, 7pi/4)
  const auto e3 = estimate(1, 0);  // (pi/2, pi/4)
  const auto e4 = estimate(1, 3);  // (pi/2, 7pi/4)
  run.result = analysis::chsh_s(e1, e2, e3, e4);

  // Secondary estimator from the fitted fringes at alpha and alpha + pi.
  run.fringe_route_e = {
      analysis::expectation_from_fringes(run.fringe_fits[0], run.fringe_fits[2], e1.setting),
      analysis::expectation_from_fringes(run.fringe_fits[0], run.fringe_fits[2], e2.setting),
      analysis::expectation_from_fringes(run.fringe_fits[1], run.fringe_fits[3], e3.setting),
      analysis::expectation_from_fringes(run.fringe_fits[1], run.fringe_fits[3], e4.setting),
  };

  const std::array<double, 2> flipper_effs = {config.noise.flipper1_efficiency,
                                              config.noise.flipper2_efficiency};
  run.predicted_visibility = analysis::visibility_budget(
      effective_contrast(config), config.noise.polarization, flipper_effs);
  run.predicted_s = 2.0 * std::numbers::sqrt2 * run.predicted_visibility;
  return run;
}

ScanPlan default_raster_plan(const cli::ExperimentConfig& config) {
  ScanPlan plan;
  plan.kind = ScanKind::raster;
  plan.time_per_point = config.raster.time_per_point;
  plan.seed = config.seed;
  const auto& r = config.raster;
  for (double z = r.z_min; z <= r.z_max + 1e-9; z += r.step)
    for (double x = r.x_min; x <= r.x_max + 1e-9; x += r.step) plan.grid.push_back({x, z});
  return plan;
}

RasterMap run_raster_scan(const cli::ExperimentConfig& config, const ScanPlan& plan) {
  plan.validate();
  if (plan.kind != ScanKind::raster) throw std::invalid_argument("plan kind must be raster");

  const counting::RngSeed proc = procedure_stream(plan.seed, ScanKind::raster);
  const auto& r = config.raster;

  RasterMap map;
  for (const auto& tuple : plan.grid) {
    if (tuple.size() != 2) throw std::invalid_argument("raster grid tuples must be (x, z)");
    map.x_positions.push_back(tuple[0]);
    map.z_positions.push_back(tuple[1]);
  }
  auto unique_sorted = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  unique_sorted(map.x_positions);
  unique_sorted(map.z_positions);
  const auto nx = static_cast<Eigen::Index>(map.x_positions.size());
  const auto nz = static_cast<Eigen::Index>(map.z_positions.size());
  map.contrast = Eigen::MatrixXd::Constant(nz, nx, -1.0);
  map.contrast_sigma = Eigen::MatrixXd::Zero(nz, nx);

  const std::vector<double> chis = chi_grid(r.chi_points);
  for (std::size_t cell = 0; cell < plan.grid.size(); ++cell) {
    const double x = plan.grid[cell][0];
    const double z = plan.grid[cell][1];
    // Synthetic sweet-spot field: Gaussian in position, or uniform when
    // sigma is zero.
    double contrast = r.peak_contrast;
    if (r.sigma > 0) {
      const double dx = (x - r.center_x) / r.sigma;
      const double dz = (z - r.center_z) / r.sigma;
      contrast *= std::exp(-0.5 * (dx * dx + dz * dz));
    }
    const auto state = contrast_scan_state(contrast, 0.0);
    const counting::RngSeed cell_stream = counting::derive_stream(proc, cell);

    RasterMap::CellRecords records;
    records.x = x;
    records.z = z;
    for (std::size_t j = 0; j < chis.size(); ++j) {
      const double rate = path_rate(state, chis[j], config);
      auto rec = measure(rate, plan.time_per_point, counting::derive_stream(cell_stream, j),
                         config.counting.poisson);
      rec.setting = {0.0, chis[j]};
      records.records.push_back(rec);
    }
    const auto fit = analysis::fit_fringe(records.records);

    const auto xi = static_cast<Eigen::Index>(
        std::find(map.x_positions.begin(), map.x_positions.end(), x) - map.x_positions.begin());
    const auto zi = static_cast<Eigen::Index>(
        std::find(map.z_positions.begin(), map.z_positions.end(), z) - map.z_positions.begin());
    map.contrast(zi, xi) = fit.contrast;
    map.contrast_sigma(zi, xi) = fit.contrast_sigma();
    map.cells.push_back(std::move(records));
  }
  if ((map.contrast.array() < 0).any())
    throw std::invalid_argument("raster plan does not cover a complete rectangular grid");
  return map;
}

TemperatureScan run_temperature_scan(const cli::ExperimentConfig& config,
                                     std::span<const double> temperatures,
                                     counting::RngSeed seed) {
  if (temperatures.empty()) throw std::invalid_argument("temperature scan needs at least one point");
  const counting::RngSeed proc = procedure_stream(seed, ScanKind::temperature);
  const std::vector<double> chis = chi_grid(config.temperature.chi_points);

  TemperatureScan scan;
  for (std::size_t i = 0; i < temperatures.size(); ++i) {
    const double t = temperatures[i];
    const double contrast = apparatus::contrast_at_temperature(config.thermal, t);
    const double drift = apparatus::thermal_phase_shift(config.thermal, t);
    const auto state = contrast_scan_state(contrast, drift);
    const counting::RngSeed point_stream = counting::derive_stream(proc, i);

    TemperaturePoint point;
    point.temperature = t;
    for (std::size_t j = 0; j < chis.size(); ++j) {
      const double rate = path_rate(state, chis[j], config);
      auto rec = measure(rate, config.counting.fit_time_per_point,
                         counting::derive_stream(point_stream, j), config.counting.poisson);
      rec.setting = {0.0, chis[j]};
      point.records.push_back(rec);
    }
    point.fit = analysis::fit_fringe(point.records);
    // The fringe maximum sits at chi = -phase; report that position so the
    // drift rate carries the sign of the phase-shift model.
    point.fringe_position = -point.fit.phase;
    scan.points.push_back(std::move(point));
  }

  // Unwrap the fringe positions before regressing for the drift rate.
  for (std::size_t i = 1; i < scan.points.size(); ++i) {
    double& cur = scan.points[i].fringe_position;
    const double prev = scan.points[i - 1].fringe_position;
    cur += kTwoPi * std::round((prev - cur) / kTwoPi);
  }

  std::vector<double> distinct(temperatures.begin(), temperatures.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() >= 2) {
    std::vector<double> t, y, s;
    for (const auto& p : scan.points) {
      t.push_back(p.temperature);
      y.push_back(p.fringe_position);
      s.push_back(p.fit.phase_sigma());
    }
    std::tie(scan.phase_slope, scan.phase_slope_sigma) = weighted_slope(t, y, s);
  } else {
    // A single-temperature repeat cannot constrain the drift rate.
    scan.phase_slope = 0.0;
    scan.phase_slope_sigma = std::numeric_limits<double>::infinity();
  }
  return scan;
}

// Two-flipper polarimetry. With beam polarization P and flipper
// efficiencies f1, f2, a flipper in the "on" state maps the longitudinal
// polarization P -> (1 - 2f) P, so the four spin-up rates are
//   n00 = I (1 + P),        n10 = I (1 + u P),
//   n01 = I (1 + v P),      n11 = I (1 + u v P),
// with u = 1 - 2 f1, v = 1 - 2 f2 and I the unpolarized rate. Inverting:
//   u = (n10 - n11) / (n00 - n01),   v = (n01 - n11) / (n00 - n10),
//   I P = (n00 - n10) / (1 - u),     I = n00 - I P,   P = (I P) / I.
namespace {

struct TwoFlipperEstimate {
  double polarization = 0, f1 = 0, f2 = 0;
};

TwoFlipperEstimate invert_two_flipper(const std::array<double, 4>& n) {
  const double d_u = n[0] - n[2];
  const double d_v = n[0] - n[1];
  if (d_u == 0 || d_v == 0)
    throw std::domain_error("two-flipper inversion is degenerate (zero flipping contrast)");
  const double u = (n[1] - n[3]) / d_u;
  const double v = (n[2] - n[3]) / d_v;
  if (u == 1.0) throw std::domain_error("two-flipper inversion is degenerate (f1 = 0)");
  const double ip = (n[0] - n[1]) / (1.0 - u);
  const double i0 = n[0] - ip;
  if (i0 == 0) throw std::domain_error("two-flipper inversion is degenerate (zero intensity)");
  TwoFlipperEstimate est;
  est.polarization = ip / i0;
  est.f1 = (1.0 - u) / 2.0;
  est.f2 = (1.0 - v) / 2.0;
  return est;
}

}  // namespace

TwoFlipperResult run_two_flipper_analysis(const cli::ExperimentConfig& config,
                                          counting::RngSeed seed) {
  const counting::RngSeed proc = procedure_stream(seed, ScanKind::two_flipper);

  // Polarized beam in path I; Bloch z-component equals the configured
  // polarization.
  qcore::SpinPathStated beam;
  beam.rho(0, 0) = (1.0 + config.noise.polarization) / 2.0;
  beam.rho(2, 2) = (1.0 - config.noise.polarization) / 2.0;

  const auto flipper1 = apparatus::make_spin_turner(kPi, config.noise.flipper1_efficiency);
  const auto flipper2 = apparatus::make_spin_turner(kPi, config.noise.flipper2_efficiency);

  TwoFlipperResult result;
  std::array<double, 4> means{};
  for (std::size_t combo = 0; combo < 4; ++combo) {
    const bool on1 = combo == 1 || combo == 3;
    const bool on2 = combo == 2 || combo == 3;
    auto state = beam;
    if (on1) state = qcore::apply_channel(state, flipper1);
    if (on2) state = qcore::apply_channel(state, flipper2);
    const double rate = config.counting.base_rate * config.beam.detector_efficiency *
                        spin_up_probability(state);
    auto rec = measure(rate, config.two_flipper.time_per_point,
                       counting::derive_stream(proc, combo), config.counting.poisson);
    result.records[combo] = rec;
    means[combo] = rec.counts;
  }

  const TwoFlipperEstimate est = invert_two_flipper(means);
  result.polarization = est.polarization;
  result.efficiency1 = est.f1;
  result.efficiency2 = est.f2;

  // First-order Poisson propagation through the inversion, with a central
  // finite-difference Jacobian.
  std::array<double, 3> var{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double h = std::max(std::sqrt(std::max(means[i], 1.0)) * 1e-3, 1e-6);
    auto plus = means, minus = means;
    plus[i] += h;
    minus[i] -= h;
    const auto ep = invert_two_flipper(plus);
    const auto em = invert_two_flipper(minus);
    const std::array<double, 3> grad = {(ep.polarization - em.polarization) / (2 * h),
                                        (ep.f1 - em.f1) / (2 * h), (ep.f2 - em.f2) / (2 * h)};
    for (std::size_t k = 0; k < 3; ++k) var[k] += grad[k] * grad[k] * means[i];
  }
  result.polarization_sigma = std::sqrt(var[0]);
  result.efficiency1_sigma = std::sqrt(var[1]);
  result.efficiency2_sigma = std::sqrt(var[2]);
  return result;
}

std::vector<double> default_larmor_currents(const cli::ExperimentConfig& config) {
  std::vector<double> currents(static_cast<std::size_t>(config.larmor.points));
  const double span = config.larmor.current_max - config.larmor.current_min;
  for (int i = 0; i < config.larmor.points; ++i)
    currents[static_cast<std::size_t>(i)] =
        config.larmor.current_min + span * i / (config.larmor.points - 1);
  return currents;
}

LarmorCalibration run_larmor_calibration(const cli::ExperimentConfig& config, qcore::Path path,
                                         std::span<const double> current_grid,
                                         counting::RngSeed seed) {
  if (current_grid.size() < 6)
    throw std::invalid_argument("larmor calibration needs at least six current points");
  const counting::RngSeed proc = procedure_stream(seed, ScanKind::larmor_calibration);

  // Spin turned into the xy-plane, beam split, then the other path blocked.
  auto state = split_beam_state();
  state = qcore::apply_channel(
      state, apparatus::make_spin_turner(kPi / 2.0, config.noise.flipper1_efficiency));
  const auto [blocked, intensity] = qcore::project_onto_path(state, path);

  // After the pi/2 x-rotation the spin azimuth is -pi/2; analyze there so
  // zero current gives the maximal count rate.
  const double analyzer_azimuth = -kPi / 2.0;

  LarmorCalibration cal;
  std::vector<double> counts;
  for (std::size_t i = 0; i < current_grid.size(); ++i) {
    apparatus::LarmorCoild coil = config.coil;
    coil.current = current_grid[i];
    const double angle = apparatus::larmor_angle(coil, config.beam, config.constants);
    const auto rotated =
        qcore::apply_channel(blocked, apparatus::make_larmor_accelerator(angle, path));
    const double rate = spin_rate(rotated, analyzer_azimuth, intensity, config);
    auto rec = measure(rate, config.larmor.time_per_point, counting::derive_stream(proc, i),
                       config.counting.poisson);
    rec.setting = {analyzer_azimuth, 0.0};
    cal.currents.push_back(current_grid[i]);
    cal.records.push_back(rec);
    counts.push_back(rec.counts);
  }

  // Rotation angle is linear in current; seed the frequency with the
  // nominal coil calibration.
  apparatus::LarmorCoild unit = config.coil;
  unit.current = 1.0;
  const double nominal = apparatus::larmor_angle(unit, config.beam, config.constants);
  cal.fit = analysis::fit_sinusoid_frequency(cal.currents, counts, nominal);
  cal.amps_per_half_pi = (kPi / 2.0) / cal.fit.frequency;
  cal.amps_sigma = (kPi / 2.0) / (cal.fit.frequency * cal.fit.frequency) * cal.fit.frequency_sigma();
  return cal;
}

std::vector<apparatus::RockingPeakd> configured_rocking_peaks(const cli::ExperimentConfig& config) {
  const double fwhm = config.rocking.folds == 1 ? 6.11e-6 : 4.26e-6;
  std::vector<apparatus::RockingPeakd> peaks;
  if (config.rocking.double_peak) {
    const double half_sep = config.beam.prism_beam_separation / 2.0;
    peaks.push_back({+half_sep, fwhm, 1.0});  // spin-up peak
    peaks.push_back({-half_sep, fwhm, 1.0});  // spin-down peak
  } else {
    peaks.push_back({0.0, fwhm, 1.0});
  }
  for (auto& p : peaks) p = apparatus::broadened_peak(p, config.rocking.coil);
  return peaks;
}

std::vector<double> default_rocking_grid(const cli::ExperimentConfig& config) {
  const auto peaks = configured_rocking_peaks(config);
  double lo = peaks.front().center, hi = peaks.front().center, max_w = 0;
  for (const auto& p : peaks) {
    lo = std::min(lo, p.center);
    hi = std::max(hi, p.center);
    max_w = std::max(max_w, p.fwhm);
  }
  lo -= 3.0 * max_w;
  hi += 3.0 * max_w;
  const int points =
      config.rocking.points > 0 ? config.rocking.points : (peaks.size() > 1 ? 121 : 61);
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  return grid;
}

RockingScan run_rocking_scan(const cli::ExperimentConfig& config,
                             std::span<const double> angle_grid, counting::RngSeed seed) {
  if (angle_grid.size() < 7)
    throw std::invalid_argument("rocking scan needs at least seven angle points");
  const counting::RngSeed proc = procedure_stream(seed, ScanKind::rocking);

  RockingScan scan;
  scan.configured_peaks = configured_rocking_peaks(config);
  scan.angles.assign(angle_grid.begin(), angle_grid.end());

  Eigen::VectorXd grid = Eigen::Map<const Eigen::VectorXd>(angle_grid.data(),
                                                           static_cast<Eigen::Index>(angle_grid.size()));
  const Eigen::VectorXd profile = apparatus::rocking_curve(scan.configured_peaks, grid);

  std::vector<double> counts;
  for (std::size_t i = 0; i < angle_grid.size(); ++i) {
    const double rate = config.rocking.peak_rate * profile[static_cast<Eigen::Index>(i)];
    auto rec = measure(rate, config.rocking.time_per_point, counting::derive_stream(proc, i),
                       config.counting.poisson);
    rec.setting = {0.0, angle_grid[i]};
    scan.records.push_back(rec);
    counts.push_back(rec.counts);
  }
  scan.fit = analysis::fit_gaussian_peaks(scan.angles, counts,
                                          static_cast<int>(scan.configured_peaks.size()));
  return scan;
}

}  // namespace ifmsim::procedures
