#pragma once

// Scripted experimental procedures: the Bell measurement run, raster
// contrast mapping, temperature scans, rocking-curve scans, two-flipper
// polarimetry and Larmor-coil calibration. Every procedure is a pure
// function of (config, seed); per-point generators are derived through the
// stream tree documented in rng.hpp, with the procedure's ScanKind as the
// top-level stream index.

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

#include "ifmsim/analysis.hpp"
#include "ifmsim/config.hpp"
#include "ifmsim/counting.hpp"
#include "ifmsim/qcore.hpp"

namespace ifmsim::procedures {

enum class ScanKind { bell, raster, temperature, rocking, two_flipper, larmor_calibration };

struct ScanPlan {
  ScanKind kind = ScanKind::bell;
  std::vector<std::vector<double>> grid;  // one setting tuple per point
  double time_per_point = 0;              // s
  counting::RngSeed seed{};

  void validate() const;
};

struct BellRun {
  std::array<double, 4> fringe_alphas{};             // 0, pi/2, pi, 3pi/2
  std::array<analysis::FringeFit, 4> fringe_fits{};
  std::vector<counting::CountRecord> fringe_records;    // fine chi grids
  std::vector<counting::CountRecord> cardinal_records;  // four-point expectation measurements
  analysis::BellResult result{};                        // four-point estimator
  std::array<analysis::ExpectationEstimate, 4> fringe_route_e{};  // secondary route
  double predicted_visibility = 1;
  double predicted_s = 0;
};

/// Full Bell measurement: 16-point fringe scans at the four analysis
/// angles plus the 16 cardinal four-point measurements, expectation values
/// from the cardinal counts, and the resulting S-value.
BellRun run_bell_experiment(const cli::ExperimentConfig& config, counting::RngSeed seed);

struct RasterMap {
  std::vector<double> x_positions;  // mm
  std::vector<double> z_positions;  // mm
  Eigen::MatrixXd contrast;         // indexed (z, x)
  Eigen::MatrixXd contrast_sigma;

  struct CellRecords {
    double x = 0, z = 0;  // mm
    std::vector<counting::CountRecord> records;
  };
  std::vector<CellRecords> cells;  // plan order
};

/// Grid, per-point time and seed for the default raster scan; the plan's
/// seed starts from config.seed and may be overridden by the caller.
ScanPlan default_raster_plan(const cli::ExperimentConfig& config);

/// Contrast map of the interferometer face: one path-interference fringe
/// per aperture position, fitted for contrast. Randomness comes from
/// plan.seed.
RasterMap run_raster_scan(const cli::ExperimentConfig& config, const ScanPlan& plan);

struct TemperaturePoint {
  double temperature = 0;  // deg C
  analysis::FringeFit fit{};
  double fringe_position = 0;  // unwrapped chi position of the fringe maximum
  std::vector<counting::CountRecord> records;
};

struct TemperatureScan {
  std::vector<TemperaturePoint> points;
  double phase_slope = 0;  // rad per deg C
  double phase_slope_sigma = 0;
};

/// Fringe contrast and position against the coil water temperature; the
/// fitted fringe positions are unwrapped and regressed for the drift rate.
TemperatureScan run_temperature_scan(const cli::ExperimentConfig& config,
                                     std::span<const double> temperatures,
                                     counting::RngSeed seed);

struct TwoFlipperResult {
  double polarization = 0, polarization_sigma = 0;
  double efficiency1 = 0, efficiency1_sigma = 0;
  double efficiency2 = 0, efficiency2_sigma = 0;
  // Flipper combinations in the order off/off, on/off, off/on, on/on.
  std::array<counting::CountRecord, 4> records{};
};

/// Two-flipper polarimetry: measures the four flipper on/off combinations
/// and inverts the flipping-ratio relations (see procedures.cpp) for the
/// beam polarization and both flipper efficiencies.
TwoFlipperResult run_two_flipper_analysis(const cli::ExperimentConfig& config,
                                          counting::RngSeed seed);

struct LarmorCalibration {
  double amps_per_half_pi = 0;
  double amps_sigma = 0;
  analysis::SinusoidFrequencyFit fit{};
  std::vector<double> currents;  // A
  std::vector<counting::CountRecord> records;
};

/// Calibrates one Larmor accelerator with the other path blocked: scans the
/// coil current, fits the spin-analyzed sinusoid and returns the current
/// needed for a pi/2 rotation.
LarmorCalibration run_larmor_calibration(const cli::ExperimentConfig& config, qcore::Path path,
                                         std::span<const double> current_grid,
                                         counting::RngSeed seed);

std::vector<double> default_larmor_currents(const cli::ExperimentConfig& config);

struct RockingScan {
  std::vector<double> angles;  // rad
  std::vector<counting::CountRecord> records;
  analysis::GaussianPeaksFit fit{};
  std::vector<apparatus::RockingPeakd> configured_peaks;
};

std::vector<double> default_rocking_grid(const cli::ExperimentConfig& config);

/// Rocking-curve scan over the configured peak layout with Poisson noise,
/// fitted for peak centers, FWHMs and heights.
RockingScan run_rocking_scan(const cli::ExperimentConfig& config,
                             std::span<const double> angle_grid, counting::RngSeed seed);

/// Composite noise state used by the Bell run: the ideal Bell state
/// degraded by path dephasing (configured or thermal contrast), spin
/// depolarization and the two spin-turner visibility factors.
qcore::SpinPathStated bell_state_with_noise(const cli::ExperimentConfig& config);

/// The peak layout the rocking scan simulates for a given config.
std::vector<apparatus::RockingPeakd> configured_rocking_peaks(const cli::ExperimentConfig& config);

}  // namespace ifmsim::procedures
