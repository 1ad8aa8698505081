#pragma once

// Experiment configuration: a flat file of dotted keys ("noise.contrast =
// 0.91") with defaults matching the reference instrument. Unknown keys,
// duplicate keys and out-of-range values are rejected with the offending
// key path in the message.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ifmsim/apparatus.hpp"
#include "ifmsim/rng.hpp"

namespace ifmsim::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoiseConfig {
  double contrast = 0.91;             // interferometer contrast after stabilization
  double polarization = 0.993;        // beam polarization
  double flipper1_efficiency = 0.98;  // spin turner before the interferometer
  double flipper2_efficiency = 0.98;  // spin turner behind the interferometer
  bool thermal_enabled = false;       // contrast/phase follow the thermal model
  double temperature = 25.2;          // deg C, operating point when thermal is on
};

struct CountingConfig {
  double base_rate = 50.0;           // counts/s entering the beamline model
  double time_per_point = 155.0;     // s, four-point expectation measurements
  double fit_time_per_point = 2600.0;  // s, fringe-scan points
  bool poisson = true;               // false: records carry expected counts
};

struct RasterConfig {
  double x_min = 0.0, x_max = 12.0;  // mm
  double z_min = 0.0, z_max = 8.0;   // mm
  double step = 1.0;                 // mm
  double aperture = 3.0;             // mm, beam cross-section (metadata)
  double peak_contrast = 0.82;       // sweet-spot contrast
  double center_x = 6.0, center_z = 4.0;  // mm, sweet-spot position
  double sigma = 2.5;                // mm, Gaussian field width; 0 = uniform field
  double time_per_point = 40.0;      // s per fringe point in one cell
  int chi_points = 16;
};

struct TemperatureScanConfig {
  double t_min = 25.2, t_max = 26.8;  // deg C
  double step = 0.2;
  int chi_points = 16;
};

struct RockingConfig {
  int folds = 3;             // 1-fold or 3-fold monochromator
  bool double_peak = false;  // resolve the prism-split up/down peaks
  apparatus::CoilKind coil = apparatus::CoilKind::none;
  int points = 0;            // 0 = choose automatically from the peak layout
  double peak_rate = 200.0;  // counts/s at unit normalized intensity
  double time_per_point = 50.0;  // s
};

struct LarmorScanConfig {
  double current_min = 0.0, current_max = 2.8;  // A
  int points = 29;
  double time_per_point = 1200.0;  // s, sized so the pi/2 current resolves well below 1%
};

struct TwoFlipperConfig {
  double time_per_point = 400.0;  // s per flipper on/off combination
};

struct ExperimentConfig {
  apparatus::PhysicalConstantsd constants{};
  apparatus::BeamParametersd beam{};
  apparatus::LarmorCoild coil{};  // defaulted from the 0.33 mT / 0.7 A calibration
  apparatus::ThermalModeld thermal{};
  NoiseConfig noise{};
  CountingConfig counting{};
  RasterConfig raster{};
  TemperatureScanConfig temperature{};
  RockingConfig rocking{};
  LarmorScanConfig larmor{};
  TwoFlipperConfig two_flipper{};
  counting::RngSeed seed{12345};
  std::string output_dir = "ifmsim_out";
};

/// All defaults resolved (including the derived Larmor coil calibration).
ExperimentConfig default_config();

/// Parses and fully validates a config file; missing keys take defaults.
ExperimentConfig load_config(const std::string& path);

/// Same, from in-memory text (used by tests).
ExperimentConfig parse_config_text(const std::string& text);

/// Resolved configuration as sorted (key, printed value) pairs; this is
/// what run manifests echo.
std::vector<std::pair<std::string, std::string>> config_key_values(const ExperimentConfig&);

}  // namespace ifmsim::cli
