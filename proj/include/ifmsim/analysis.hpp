#pragma once

// Recovery of physics from counts: weighted least-squares sinusoid and
// Gaussian-peak fits, four-point expectation values with Poisson error
// propagation, and the CHSH S-value.

#include <Eigen/Core>

#include <array>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ifmsim/apparatus.hpp"
#include "ifmsim/counting.hpp"
#include "ifmsim/qcore.hpp"

namespace ifmsim::analysis {

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sinusoid fit N(chi) = offset + amplitude * cos(chi + phase). The
/// amplitude is kept non-negative by phase unwrapping and the phase is
/// normalized to (-pi, pi]. Covariance is the inverse Gauss-Newton normal
/// matrix at the optimum, ordered (offset, amplitude, phase).
struct FringeFit {
  double offset = 0;
  double amplitude = 0;
  double phase = 0;
  double contrast = 0;  // amplitude / offset
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  double chi_square = 0;
  int dof = 0;
  int iterations = 0;

  double offset_sigma() const;
  double amplitude_sigma() const;
  double phase_sigma() const;
  double contrast_sigma() const;
};

/// E(alpha, chi) with its propagated Poisson uncertainty.
struct ExpectationEstimate {
  double value = 0;
  double sigma = 0;
  qcore::JointSettingd setting{};
};

/// The four expectation values, the S-value and its significance.
struct BellResult {
  std::array<ExpectationEstimate, 4> e{};
  double s_value = 0;
  double s_sigma = 0;
  double n_sigma_violation = 0;
};

// --- generic weighted Levenberg-Marquardt -----------------------------

struct CurveFitOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-10;
};

struct CurveFitResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double chi_square = 0;
  int dof = 0;
  int iterations = 0;
};

/// Minimizes sum_i w_i (y_i - f(p, x_i))^2 over p with an analytic model
/// gradient. Throws FitError on non-convergence.
CurveFitResult fit_weighted_curve(
    std::span<const double> x, std::span<const double> y, std::span<const double> w,
    const std::function<double(const Eigen::VectorXd&, double)>& model,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>& gradient,
    Eigen::VectorXd initial, const CurveFitOptions& options = {});

// --- fringe fitting ----------------------------------------------------

/// Fringe model and its parameter gradient, p = (offset, amplitude, phase).
double fringe_model(const Eigen::Vector3d& p, double chi);
Eigen::Vector3d fringe_model_gradient(const Eigen::Vector3d& p, double chi);

/// Weighted least-squares sinusoid fit of counts against chi with Poisson
/// weights 1/max(counts, 1). Requires at least five distinct chi values.
FringeFit fit_fringe(std::span<const counting::CountRecord> records);

/// Convenience overload on bare (chi, counts) samples.
FringeFit fit_fringe(std::span<const double> chi, std::span<const double> counts);

/// Sinusoid with unknown angular frequency, y = O + A cos(k x + phase);
/// used by scans whose abscissa is a coil current rather than a phase.
struct SinusoidFrequencyFit {
  double offset = 0;
  double amplitude = 0;
  double phase = 0;
  double frequency = 0;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
  double chi_square = 0;
  int dof = 0;

  double frequency_sigma() const;
};

SinusoidFrequencyFit fit_sinusoid_frequency(std::span<const double> x,
                                            std::span<const double> counts,
                                            double frequency_guess);

// --- Gaussian peak fitting ----------------------------------------------

struct FittedPeak {
  apparatus::RockingPeakd peak;
  double center_sigma = 0;
  double fwhm_sigma = 0;
  double height_sigma = 0;
};

struct GaussianPeaksFit {
  std::vector<FittedPeak> peaks;  // sorted by center
  double chi_square = 0;
  int dof = 0;
};

/// Fits `n_peaks` Gaussian profiles (center, FWHM, height each) to a
/// counts-vs-angle curve with Poisson weights.
GaussianPeaksFit fit_gaussian_peaks(std::span<const double> angles,
                                    std::span<const double> counts, int n_peaks);

// --- expectation values and the Bell inequality --------------------------

/// Four-point expectation value
///   E = (n_pp + n_mm - n_pm - n_mp) / (n_pp + n_mm + n_pm + n_mp)
/// from counts at (a,chi), (a+pi,chi+pi), (a,chi+pi), (a+pi,chi), with
/// first-order Poisson error propagation. This is the primary estimator.
ExpectationEstimate expectation_from_counts(const counting::CountRecord& n_pp,
                                            const counting::CountRecord& n_mm,
                                            const counting::CountRecord& n_pm,
                                            const counting::CountRecord& n_mp);

/// Secondary route to the same quantity: the fitted fringes at alpha and
/// alpha + pi evaluated at the four count-rate arguments and combined as
/// above, which reduces to
///   E = [A1 cos(chi + phase1) - A2 cos(chi + phase2)] / (O1 + O2).
/// The uncertainty propagates from both (independent) fit covariances.
ExpectationEstimate expectation_from_fringes(const FringeFit& at_alpha,
                                             const FringeFit& at_alpha_plus_pi,
                                             const qcore::JointSettingd& setting);

/// S = E(a1,chi1) + E(a1,chi2) - E(a2,chi1) + E(a2,chi2) with independent
/// error propagation and the violation significance (S - 2) / sigma_S.
BellResult chsh_s(const ExpectationEstimate& e1, const ExpectationEstimate& e2,
                  const ExpectationEstimate& e3, const ExpectationEstimate& e4);

/// Product of the supplied visibility factors; the predicted S-value is
/// 2*sqrt(2) times the result.
double visibility_budget(double contrast, double polarization,
                         std::span<const double> flipper_efficiencies);

}  // namespace ifmsim::analysis
