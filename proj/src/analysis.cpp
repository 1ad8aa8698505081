#include "ifmsim/analysis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace ifmsim::analysis {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wraps into (-pi, pi].
double wrap_phase(double phi) {
  double p = std::remainder(phi, kTwoPi);
  if (p <= -std::numbers::pi) p += kTwoPi;
  return p;
}

bool same_angle(double a, double b, double tol = 1e-9) {
  return std::abs(std::remainder(a - b, kTwoPi)) <= tol;
}

double sigma_from(const Eigen::MatrixXd& cov, int i) {
  return std::sqrt(std::max(cov(i, i), 0.0));
}

// Moore-Penrose-style inverse of the normal matrix; near-null directions
// (unconstrained parameters such as the phase of a zero-amplitude fringe)
// get a large finite variance instead of a division blowup.
Eigen::MatrixXd invert_normal_matrix(const Eigen::MatrixXd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const Eigen::VectorXd vals = es.eigenvalues();
  const double max_val = vals.maxCoeff();
  if (!(max_val > 0)) return Eigen::MatrixXd::Constant(h.rows(), h.cols(), 1e30);
  const double floor = max_val * 1e-14;
  Eigen::VectorXd inv(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i)
    inv[i] = 1.0 / std::max(vals[i], floor);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

struct FourierStart {
  double mean = 0;
  double amplitude = 0;
  double phase = 0;
};

// Deterministic starting point: mean, sqrt(2)*RMS deviation, and the phase
// of the discrete Fourier component at the known frequency.
FourierStart fourier_start(std::span<const double> x, std::span<const double> y,
                           double frequency) {
  const auto n = static_cast<double>(y.size());
  double mean = 0;
  for (double v : y) mean += v;
  mean /= n;
  double rms = 0, c = 0, s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - mean;
    rms += d * d;
    c += d * std::cos(frequency * x[i]);
    s += d * std::sin(frequency * x[i]);
  }
  FourierStart start;
  start.mean = mean;
  start.amplitude = std::sqrt(2.0 * rms / n);
  start.phase = (c == 0 && s == 0) ? 0.0 : std::atan2(-s, c);
  return start;
}

std::vector<double> poisson_weights(std::span<const double> counts) {
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) w[i] = 1.0 / std::max(counts[i], 1.0);
  return w;
}

}  // namespace

CurveFitResult fit_weighted_curve(
    std::span<const double> x, std::span<const double> y, std::span<const double> w,
    const std::function<double(const Eigen::VectorXd&, double)>& model,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>& gradient,
    Eigen::VectorXd initial, const CurveFitOptions& options) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto np = initial.size();
  if (y.size() != x.size() || w.size() != x.size())
    throw std::invalid_argument("fit inputs must have equal lengths");
  if (n < np) throw std::invalid_argument("fewer data points than fit parameters");

  Eigen::VectorXd p = std::move(initial);
  Eigen::VectorXd r(n);
  Eigen::MatrixXd jac(n, np);

  auto evaluate = [&](const Eigen::VectorXd& params, Eigen::VectorXd& res,
                      Eigen::MatrixXd* jptr) {
    double chi2 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sw = std::sqrt(w[static_cast<std::size_t>(i)]);
      const double f = model(params, x[static_cast<std::size_t>(i)]);
      res[i] = sw * (y[static_cast<std::size_t>(i)] - f);
      chi2 += res[i] * res[i];
      if (jptr) jptr->row(i) = sw * gradient(params, x[static_cast<std::size_t>(i)]).transpose();
    }
    return chi2;
  };

  double chi2 = evaluate(p, r, &jac);
  if (!std::isfinite(chi2)) throw FitError("fit objective is not finite at the initial guess");

  double lambda = 1e-3;
  int iterations = 0;
  bool converged = false;
  for (; iterations < options.max_iterations; ++iterations) {
    const Eigen::VectorXd g = jac.transpose() * r;
    if (g.cwiseAbs().maxCoeff() <= options.gradient_tol * std::max(1.0, chi2)) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd h = jac.transpose() * jac;
    const double diag_floor = 1e-12 * std::max(h.diagonal().maxCoeff(), 0.0) +
                              std::numeric_limits<double>::min();
    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = h;
      damped.diagonal() += lambda * h.diagonal().cwiseMax(diag_floor);
      const Eigen::VectorXd step = damped.ldlt().solve(g);
      const Eigen::VectorXd trial = p + step;
      Eigen::VectorXd trial_r(n);
      const double trial_chi2 = evaluate(trial, trial_r, nullptr);
      if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
        const bool tiny_step = step.norm() <= 1e-15 * (p.norm() + 1.0);
        p = trial;
        chi2 = evaluate(p, r, &jac);
        lambda = std::max(lambda / 3.0, 1e-14);
        accepted = true;
        if (tiny_step) converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e15) throw FitError("fit failed to converge (damping exhausted)");
      }
    }
    if (converged) {
      ++iterations;
      break;
    }
  }
  if (!converged) throw FitError("fit did not converge within the iteration limit");

  CurveFitResult result;
  result.params = p;
  result.covariance = invert_normal_matrix(jac.transpose() * jac);
  result.chi_square = chi2;
  result.dof = static_cast<int>(n - np);
  result.iterations = iterations;
  return result;
}

// --- fringe fitting ----------------------------------------------------

double fringe_model(const Eigen::Vector3d& p, double chi) {
  return p[0] + p[1] * std::cos(chi + p[2]);
}

Eigen::Vector3d fringe_model_gradient(const Eigen::Vector3d& p, double chi) {
  return {1.0, std::cos(chi + p[2]), -p[1] * std::sin(chi + p[2])};
}

double FringeFit::offset_sigma() const { return sigma_from(covariance, 0); }
double FringeFit::amplitude_sigma() const { return sigma_from(covariance, 1); }
double FringeFit::phase_sigma() const { return sigma_from(covariance, 2); }

double FringeFit::contrast_sigma() const {
  // First-order propagation of contrast = amplitude / offset.
  const double o = offset, a = amplitude;
  const double var = covariance(1, 1) / (o * o) + covariance(0, 0) * a * a / (o * o * o * o) -
                     2.0 * covariance(0, 1) * a / (o * o * o);
  return std::sqrt(std::max(var, 0.0));
}

FringeFit fit_fringe(std::span<const double> chi, std::span<const double> counts) {
  if (chi.size() != counts.size()) throw std::invalid_argument("fringe inputs differ in length");
  std::set<double> distinct(chi.begin(), chi.end());
  if (distinct.size() < 5)
    throw std::invalid_argument("fringe fit needs at least five distinct chi values");
  for (double c : counts)
    if (!(c >= 0)) throw std::invalid_argument("fringe counts must be non-negative");

  const std::vector<double> w = poisson_weights(counts);
  const FourierStart start = fourier_start(chi, counts, 1.0);
  Eigen::VectorXd p0(3);
  p0 << start.mean, start.amplitude, start.phase;

  auto model = [](const Eigen::VectorXd& p, double x) {
    return fringe_model(Eigen::Vector3d(p), x);
  };
  auto gradient = [](const Eigen::VectorXd& p, double x) -> Eigen::VectorXd {
    return fringe_model_gradient(Eigen::Vector3d(p), x);
  };
  CurveFitResult fit = fit_weighted_curve(chi, counts, w, model, gradient, p0);

  FringeFit out;
  out.offset = fit.params[0];
  out.amplitude = fit.params[1];
  out.phase = fit.params[2];
  out.covariance = fit.covariance;
  if (out.amplitude < 0) {
    // (A, phase) -> (-A, phase + pi) leaves the model invariant.
    out.amplitude = -out.amplitude;
    out.phase += std::numbers::pi;
    const Eigen::Vector3d flip(1.0, -1.0, 1.0);
    out.covariance = flip.asDiagonal() * out.covariance * flip.asDiagonal();
  }
  out.phase = wrap_phase(out.phase);
  if (!(out.offset > 0)) throw FitError("fitted fringe offset is not positive");
  out.contrast = out.amplitude / out.offset;
  out.chi_square = fit.chi_square;
  out.dof = fit.dof;
  out.iterations = fit.iterations;
  return out;
}

FringeFit fit_fringe(std::span<const counting::CountRecord> records) {
  std::vector<double> chi(records.size()), counts(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    chi[i] = records[i].setting.chi;
    counts[i] = records[i].counts;
  }
  return fit_fringe(chi, counts);
}

double SinusoidFrequencyFit::frequency_sigma() const { return sigma_from(covariance, 3); }

SinusoidFrequencyFit fit_sinusoid_frequency(std::span<const double> x,
                                            std::span<const double> counts,
                                            double frequency_guess) {
  if (x.size() != counts.size()) throw std::invalid_argument("fit inputs differ in length");
  if (x.size() < 6) throw std::invalid_argument("frequency fit needs at least six points");
  if (!(frequency_guess != 0)) throw std::invalid_argument("frequency guess must be non-zero");

  const std::vector<double> w = poisson_weights(counts);
  const FourierStart start = fourier_start(x, counts, frequency_guess);
  Eigen::VectorXd p0(4);
  p0 << start.mean, start.amplitude, start.phase, frequency_guess;

  auto model = [](const Eigen::VectorXd& p, double xi) {
    return p[0] + p[1] * std::cos(p[3] * xi + p[2]);
  };
  auto gradient = [](const Eigen::VectorXd& p, double xi) -> Eigen::VectorXd {
    const double arg = p[3] * xi + p[2];
    Eigen::VectorXd g(4);
    g << 1.0, std::cos(arg), -p[1] * std::sin(arg), -p[1] * xi * std::sin(arg);
    return g;
  };
  CurveFitResult fit = fit_weighted_curve(x, counts, w, model, gradient, p0);

  SinusoidFrequencyFit out;
  out.offset = fit.params[0];
  out.amplitude = fit.params[1];
  out.phase = fit.params[2];
  out.frequency = fit.params[3];
  out.covariance = fit.covariance;
  if (out.amplitude < 0) {
    out.amplitude = -out.amplitude;
    out.phase += std::numbers::pi;
    const Eigen::Vector4d flip(1.0, -1.0, 1.0, 1.0);
    out.covariance = flip.asDiagonal() * out.covariance * flip.asDiagonal();
  }
  if (out.frequency < 0) {
    // cos(-k x + phase) = cos(k x - phase).
    out.frequency = -out.frequency;
    out.phase = -out.phase;
    const Eigen::Vector4d flip(1.0, 1.0, -1.0, -1.0);
    out.covariance = flip.asDiagonal() * out.covariance * flip.asDiagonal();
  }
  out.phase = wrap_phase(out.phase);
  out.chi_square = fit.chi_square;
  out.dof = fit.dof;
  return out;
}

// --- Gaussian peak fitting ----------------------------------------------

namespace {

// Greedy local-maxima scan used to seed the peak fit.
std::vector<std::size_t> find_peak_indices(std::span<const double> counts, int n_peaks,
                                           std::size_t min_separation) {
  std::vector<std::size_t> order(counts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  std::vector<std::size_t> picks;
  for (std::size_t idx : order) {
    bool clear = true;
    for (std::size_t p : picks)
      if ((idx > p ? idx - p : p - idx) < min_separation) clear = false;
    if (clear) picks.push_back(idx);
    if (picks.size() == static_cast<std::size_t>(n_peaks)) break;
  }
  return picks;
}

double half_max_width(std::span<const double> angles, std::span<const double> counts,
                      std::size_t peak_index) {
  const double half = counts[peak_index] / 2.0;
  std::size_t left = peak_index, right = peak_index;
  while (left > 0 && counts[left] > half) --left;
  while (right + 1 < counts.size() && counts[right] > half) ++right;
  const double width = std::abs(angles[right] - angles[left]);
  if (width > 0) return width;
  return std::abs(angles.back() - angles.front()) / 10.0;
}

}  // namespace

GaussianPeaksFit fit_gaussian_peaks(std::span<const double> angles,
                                    std::span<const double> counts, int n_peaks) {
  if (angles.size() != counts.size()) throw std::invalid_argument("fit inputs differ in length");
  if (n_peaks < 1) throw std::invalid_argument("need at least one peak");
  if (angles.size() < static_cast<std::size_t>(3 * n_peaks + 1))
    throw std::invalid_argument("too few points for the requested number of peaks");

  const std::size_t min_sep = std::max<std::size_t>(2, angles.size() / (4 * n_peaks));
  const std::vector<std::size_t> seeds = find_peak_indices(counts, n_peaks, min_sep);
  if (seeds.size() != static_cast<std::size_t>(n_peaks))
    throw FitError("could not locate the requested number of peaks");

  Eigen::VectorXd p0(3 * n_peaks);
  for (int j = 0; j < n_peaks; ++j) {
    const std::size_t idx = seeds[static_cast<std::size_t>(j)];
    p0[3 * j + 0] = angles[idx];
    p0[3 * j + 1] = half_max_width(angles, counts, idx);
    p0[3 * j + 2] = counts[idx];
  }

  constexpr double k4ln2 = 4.0 * std::numbers::ln2;
  auto model = [n_peaks](const Eigen::VectorXd& p, double x) {
    double sum = 0;
    for (int j = 0; j < n_peaks; ++j) {
      const double z = (x - p[3 * j]) / p[3 * j + 1];
      sum += p[3 * j + 2] * std::exp(-k4ln2 * z * z);
    }
    return sum;
  };
  auto gradient = [n_peaks](const Eigen::VectorXd& p, double x) -> Eigen::VectorXd {
    Eigen::VectorXd g(3 * n_peaks);
    for (int j = 0; j < n_peaks; ++j) {
      const double c = p[3 * j], w = p[3 * j + 1], h = p[3 * j + 2];
      const double z = (x - c) / w;
      const double e = std::exp(-k4ln2 * z * z);
      g[3 * j + 0] = h * e * 2.0 * k4ln2 * z / w;
      g[3 * j + 1] = h * e * 2.0 * k4ln2 * z * z / w;
      g[3 * j + 2] = e;
    }
    return g;
  };

  const std::vector<double> w = poisson_weights(counts);
  CurveFitResult fit = fit_weighted_curve(angles, counts, w, model, gradient, p0);

  GaussianPeaksFit out;
  out.chi_square = fit.chi_square;
  out.dof = fit.dof;
  for (int j = 0; j < n_peaks; ++j) {
    FittedPeak peak;
    peak.peak.center = fit.params[3 * j];
    peak.peak.fwhm = std::abs(fit.params[3 * j + 1]);  // model is even in the width
    peak.peak.height = fit.params[3 * j + 2];
    peak.center_sigma = sigma_from(fit.covariance, 3 * j);
    peak.fwhm_sigma = sigma_from(fit.covariance, 3 * j + 1);
    peak.height_sigma = sigma_from(fit.covariance, 3 * j + 2);
    out.peaks.push_back(peak);
  }
  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const FittedPeak& a, const FittedPeak& b) { return a.peak.center < b.peak.center; });
  return out;
}

// --- expectation values and the Bell inequality --------------------------

ExpectationEstimate expectation_from_counts(const counting::CountRecord& n_pp,
                                            const counting::CountRecord& n_mm,
                                            const counting::CountRecord& n_pm,
                                            const counting::CountRecord& n_mp) {
  const double alpha = n_pp.setting.alpha;
  const double chi = n_pp.setting.chi;
  const bool pattern_ok =
      same_angle(n_mm.setting.alpha, alpha + std::numbers::pi) &&
      same_angle(n_mm.setting.chi, chi + std::numbers::pi) &&
      same_angle(n_pm.setting.alpha, alpha) &&
      same_angle(n_pm.setting.chi, chi + std::numbers::pi) &&
      same_angle(n_mp.setting.alpha, alpha + std::numbers::pi) &&
      same_angle(n_mp.setting.chi, chi);
  if (!pattern_ok)
    throw std::invalid_argument(
        "expectation records must follow the (a,x), (a+pi,x+pi), (a,x+pi), (a+pi,x) pattern");
  for (const auto* rec : {&n_pp, &n_mm, &n_pm, &n_mp})
    if (!(rec->counts >= 0)) throw std::invalid_argument("counts must be non-negative");

  const double a = n_pp.counts + n_mm.counts;
  const double b = n_pm.counts + n_mp.counts;
  const double total = a + b;
  if (!(total > 0)) throw std::domain_error("expectation value undefined for zero total counts");

  ExpectationEstimate est;
  est.setting = n_pp.setting;
  est.value = (a - b) / total;
  est.sigma = 2.0 * std::sqrt(b * b * a + a * a * b) / (total * total);
  return est;
}

ExpectationEstimate expectation_from_fringes(const FringeFit& at_alpha,
                                             const FringeFit& at_alpha_plus_pi,
                                             const qcore::JointSettingd& setting) {
  const double c1 = std::cos(setting.chi + at_alpha.phase);
  const double s1 = std::sin(setting.chi + at_alpha.phase);
  const double c2 = std::cos(setting.chi + at_alpha_plus_pi.phase);
  const double s2 = std::sin(setting.chi + at_alpha_plus_pi.phase);
  const double denom = at_alpha.offset + at_alpha_plus_pi.offset;
  if (!(denom > 0)) throw std::domain_error("fringe offsets must be positive");

  ExpectationEstimate est;
  est.setting = setting;
  est.value = (at_alpha.amplitude * c1 - at_alpha_plus_pi.amplitude * c2) / denom;

  // Gradient of E with respect to each fit's (offset, amplitude, phase).
  const Eigen::Vector3d g1(-est.value / denom, c1 / denom, -at_alpha.amplitude * s1 / denom);
  const Eigen::Vector3d g2(-est.value / denom, -c2 / denom,
                           at_alpha_plus_pi.amplitude * s2 / denom);
  const double var = g1.dot(at_alpha.covariance * g1) + g2.dot(at_alpha_plus_pi.covariance * g2);
  est.sigma = std::sqrt(std::max(var, 0.0));
  return est;
}

BellResult chsh_s(const ExpectationEstimate& e1, const ExpectationEstimate& e2,
                  const ExpectationEstimate& e3, const ExpectationEstimate& e4) {
  const bool pattern_ok = same_angle(e1.setting.alpha, e2.setting.alpha) &&
                          same_angle(e3.setting.alpha, e4.setting.alpha) &&
                          same_angle(e1.setting.chi, e3.setting.chi) &&
                          same_angle(e2.setting.chi, e4.setting.chi);
  if (!pattern_ok)
    throw std::invalid_argument("expectation settings must follow the (a1,a2) x (chi1,chi2) grid");

  BellResult result;
  result.e = {e1, e2, e3, e4};
  result.s_value = e1.value + e2.value - e3.value + e4.value;
  result.s_sigma = std::sqrt(e1.sigma * e1.sigma + e2.sigma * e2.sigma + e3.sigma * e3.sigma +
                             e4.sigma * e4.sigma);
  result.n_sigma_violation = (result.s_value - 2.0) / result.s_sigma;
  return result;
}

double visibility_budget(double contrast, double polarization,
                         std::span<const double> flipper_efficiencies) {
  auto check = [](double v, const char* what) {
    if (!(v >= 0 && v <= 1)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
  };
  check(contrast, "contrast");
  check(polarization, "polarization");
  double product = contrast * polarization;
  for (double f : flipper_efficiencies) {
    check(f, "flipper efficiency");
    product *= f;
  }
  return product;
}

}  // namespace ifmsim::analysis
