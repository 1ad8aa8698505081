#pragma once

// Detector statistics: joint-outcome probabilities turned into expected
// count rates and Poisson-distributed counts.

#include <cstdint>

#include "ifmsim/qcore.hpp"
#include "ifmsim/rng.hpp"

namespace ifmsim::counting {

enum class Detector { O, H };

/// One detector measurement. `counts` is integer-valued whenever Poisson
/// sampling is on; noise-free pipelines carry the expected (real) counts so
/// the ideal limit stays exact.
struct CountRecord {
  qcore::JointSettingd setting{};
  double integration_time = 0;  // s
  double mean_rate = 0;         // counts/s
  double counts = 0;
  Detector detector = Detector::O;
};

/// Count rate of the monitored (+,+) joint outcome,
///   rate = 2 * base_rate * efficiency * p_{++}(setting),
/// normalized so the setting-averaged rate is base_rate * efficiency / 2.
/// For the ideal Bell state this is base_rate*efficiency*(1+cos(a+chi))/2.
double expected_rate(const qcore::SpinPathStated& state, const qcore::JointSettingd& setting,
                     double base_rate, double efficiency);

/// Poisson draw with mean rate*time, deterministic for a given seed.
CountRecord draw_counts(double rate, double time, RngSeed seed);

/// Noise-free counterpart: counts = rate * time exactly.
CountRecord expected_counts(double rate, double time);

}  // namespace ifmsim::counting
