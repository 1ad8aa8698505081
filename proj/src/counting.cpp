#include "ifmsim/counting.hpp"

#include <algorithm>
#include <stdexcept>

namespace ifmsim::counting {

double expected_rate(const qcore::SpinPathStated& state, const qcore::JointSettingd& setting,
                     double base_rate, double efficiency) {
  if (!(base_rate >= 0)) throw std::invalid_argument("base_rate must be non-negative");
  if (!(efficiency >= 0 && efficiency <= 1))
    throw std::invalid_argument("detector efficiency must lie in [0, 1]");
  // Clamp the tiny negative values floating-point traces can produce at
  // probability zero.
  const double p = std::max(qcore::ideal_joint_probability(state, setting, +1, +1), 0.0);
  return 2.0 * base_rate * efficiency * p;
}

CountRecord draw_counts(double rate, double time, RngSeed seed) {
  if (!(rate >= 0)) throw std::invalid_argument("count rate must be non-negative");
  if (!(time >= 0)) throw std::invalid_argument("integration time must be non-negative");
  CountingRng rng(seed);
  CountRecord rec;
  rec.integration_time = time;
  rec.mean_rate = rate;
  rec.counts = static_cast<double>(rng.poisson(rate * time));
  return rec;
}

CountRecord expected_counts(double rate, double time) {
  if (!(rate >= 0)) throw std::invalid_argument("count rate must be non-negative");
  if (!(time >= 0)) throw std::invalid_argument("integration time must be non-negative");
  CountRecord rec;
  rec.integration_time = time;
  rec.mean_rate = rate;
  rec.counts = rate * time;
  return rec;
}

}  // namespace ifmsim::counting
