#pragma once

// Physical models of the beamline: element channels (spin turners, Larmor
// accelerators, phase shifter, noise processes) and scalar calibration
// formulas (Larmor rotation angle, rocking-curve peaks, thermal response).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ifmsim/qcore.hpp"

namespace ifmsim::apparatus {

template <typename Scalar = double>
struct PhysicalConstants {
  Scalar planck_h = Scalar(6.62607015e-34);                                // J s
  Scalar hbar = Scalar(6.62607015e-34) / (Scalar(2) * std::numbers::pi_v<Scalar>);  // J s
  Scalar neutron_mass = Scalar(1.67492749804e-27);                         // kg
  Scalar neutron_magnetic_moment_magnitude = Scalar(9.6623651e-27);        // J/T
};

using PhysicalConstantsd = PhysicalConstants<double>;

template <typename Scalar = double>
struct BeamParameters {
  Scalar wavelength = Scalar(1.92e-10);           // m
  Scalar prism_beam_separation = Scalar(2.3e-5);  // rad, up/down beam splitting
  Scalar detector_efficiency = Scalar(0.99);      // He-3 counter efficiency
};

using BeamParametersd = BeamParameters<double>;

/// de Broglie velocity v = h / (m_n * lambda).
template <typename Scalar>
Scalar neutron_velocity(const BeamParameters<Scalar>& beam, const PhysicalConstants<Scalar>& c) {
  if (!(beam.wavelength > Scalar(0))) throw std::invalid_argument("wavelength must be positive");
  return c.planck_h / (c.neutron_mass * beam.wavelength);
}

/// One Larmor accelerator coil: a local z-field region of effective length
/// `effective_length` producing field_per_ampere * current.
template <typename Scalar = double>
struct LarmorCoil {
  Scalar effective_length = Scalar(0);   // m
  Scalar field_per_ampere = Scalar(0);   // T/A
  Scalar current = Scalar(0);            // A
};

using LarmorCoild = LarmorCoil<double>;

/// Spin rotation angle alpha(B_z) = 2 mu l B_z / (hbar v). The sign
/// follows the sign of the coil current.
template <typename Scalar>
Scalar larmor_angle(const LarmorCoil<Scalar>& coil, const BeamParameters<Scalar>& beam,
                    const PhysicalConstants<Scalar>& c) {
  if (!(coil.effective_length > Scalar(0)))
    throw std::invalid_argument("coil effective_length must be positive");
  const Scalar field = coil.field_per_ampere * coil.current;
  const Scalar velocity = neutron_velocity(beam, c);
  return Scalar(2) * c.neutron_magnetic_moment_magnitude * coil.effective_length * field /
         (c.hbar * velocity);
}

/// Coil defaults calibrated so that 0.33 mT (reached at 0.7 A) rotates the
/// spin by exactly pi/2 at the given beam velocity. The effective length
/// is the free calibration parameter.
template <typename Scalar>
LarmorCoil<Scalar> default_larmor_coil(const BeamParameters<Scalar>& beam,
                                       const PhysicalConstants<Scalar>& c) {
  constexpr Scalar kFieldForHalfPi = Scalar(0.33e-3);  // T
  constexpr Scalar kCurrentForHalfPi = Scalar(0.7);    // A
  const Scalar velocity = neutron_velocity(beam, c);
  LarmorCoil<Scalar> coil;
  coil.effective_length = (std::numbers::pi_v<Scalar> / Scalar(2)) * c.hbar * velocity /
                          (Scalar(2) * c.neutron_magnetic_moment_magnitude * kFieldForHalfPi);
  coil.field_per_ampere = kFieldForHalfPi / kCurrentForHalfPi;
  coil.current = Scalar(0);
  return coil;
}

namespace detail {

template <typename Scalar>
qcore::Matrix2<Scalar> rotation_x(Scalar angle) {
  const Scalar c = std::cos(angle / Scalar(2));
  const Scalar s = std::sin(angle / Scalar(2));
  qcore::Matrix2<Scalar> u;
  u(0, 0) = c;
  u(0, 1) = std::complex<Scalar>(0, -s);
  u(1, 0) = std::complex<Scalar>(0, -s);
  u(1, 1) = c;
  return u;
}

template <typename Scalar>
qcore::Matrix2<Scalar> rotation_z(Scalar angle) {
  qcore::Matrix2<Scalar> u = qcore::Matrix2<Scalar>::Zero();
  u(0, 0) = std::polar(Scalar(1), -angle / Scalar(2));
  u(1, 1) = std::polar(Scalar(1), angle / Scalar(2));
  return u;
}

template <typename Scalar>
void require_fraction(Scalar value, const char* what) {
  if (!(value >= Scalar(0) && value <= Scalar(1)))
    throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

}  // namespace detail

/// DC spin turner: rotation of the spin factor by `angle` about x, convexly
/// mixed with the identity so that a pi rotation flips the spin with
/// probability `efficiency`.
template <typename Scalar>
qcore::ElementChannel<Scalar> make_spin_turner(Scalar angle, Scalar efficiency) {
  detail::require_fraction(efficiency, "spin turner efficiency");
  const qcore::Matrix4<Scalar> rot =
      qcore::kron<Scalar>(detail::rotation_x(angle), qcore::Matrix2<Scalar>::Identity());
  qcore::ElementChannel<Scalar> ch;
  ch.label = "spin_turner";
  if (efficiency < Scalar(1))
    ch.kraus_ops.push_back(std::sqrt(Scalar(1) - efficiency) * qcore::Matrix4<Scalar>::Identity());
  if (efficiency > Scalar(0)) ch.kraus_ops.push_back(std::sqrt(efficiency) * rot);
  return ch;
}

/// Larmor accelerator: z-rotation of the spin applied only on the given
/// interferometer path (a controlled rotation; unitary).
template <typename Scalar>
qcore::ElementChannel<Scalar> make_larmor_accelerator(Scalar angle, qcore::Path path) {
  qcore::Matrix2<Scalar> on_path = qcore::Matrix2<Scalar>::Zero();
  on_path(static_cast<int>(path), static_cast<int>(path)) = Scalar(1);
  qcore::Matrix2<Scalar> off_path = qcore::Matrix2<Scalar>::Identity() - on_path;
  qcore::Matrix4<Scalar> u = qcore::kron<Scalar>(detail::rotation_z(angle), on_path) +
                             qcore::kron<Scalar>(qcore::Matrix2<Scalar>::Identity(), off_path);
  qcore::ElementChannel<Scalar> ch;
  ch.label = "larmor_accelerator";
  ch.kraus_ops.push_back(std::move(u));
  return ch;
}

/// Sapphire phase shifter: relative phase e^{i chi} on path II.
template <typename Scalar>
qcore::ElementChannel<Scalar> make_phase_shifter(Scalar chi) {
  qcore::Matrix2<Scalar> u = qcore::Matrix2<Scalar>::Identity();
  u(1, 1) = std::polar(Scalar(1), chi);
  qcore::ElementChannel<Scalar> ch;
  ch.label = "phase_shifter";
  ch.kraus_ops.push_back(qcore::kron<Scalar>(qcore::Matrix2<Scalar>::Identity(), u));
  return ch;
}

/// Phenomenological contrast loss: scales the path off-diagonal blocks by
/// `contrast`, leaving populations unchanged. Composes as a semigroup:
/// dephasing(c1) then dephasing(c2) equals dephasing(c1*c2).
template <typename Scalar>
qcore::ElementChannel<Scalar> make_path_dephasing(Scalar contrast) {
  detail::require_fraction(contrast, "contrast");
  const Scalar q = (Scalar(1) - contrast) / Scalar(2);
  qcore::Matrix2<Scalar> sz = qcore::Matrix2<Scalar>::Identity();
  sz(1, 1) = Scalar(-1);
  qcore::ElementChannel<Scalar> ch;
  ch.label = "path_dephasing";
  ch.kraus_ops.push_back(std::sqrt(Scalar(1) - q) * qcore::Matrix4<Scalar>::Identity());
  if (q > Scalar(0))
    ch.kraus_ops.push_back(std::sqrt(q) *
                           qcore::kron<Scalar>(qcore::Matrix2<Scalar>::Identity(), sz));
  return ch;
}

/// Isotropic spin depolarization: scales the spin Bloch vector by
/// `polarization`.
template <typename Scalar>
qcore::ElementChannel<Scalar> make_spin_depolarizer(Scalar polarization) {
  detail::require_fraction(polarization, "polarization");
  const Scalar lam = Scalar(1) - polarization;
  qcore::ElementChannel<Scalar> ch;
  ch.label = "spin_depolarizer";
  ch.kraus_ops.push_back(std::sqrt(Scalar(1) - Scalar(0.75) * lam) *
                         qcore::Matrix4<Scalar>::Identity());
  if (lam > Scalar(0)) {
    qcore::Matrix2<Scalar> sx, sy, sz;
    sx << Scalar(0), Scalar(1), Scalar(1), Scalar(0);
    sy << Scalar(0), std::complex<Scalar>(0, -1), std::complex<Scalar>(0, 1), Scalar(0);
    sz << Scalar(1), Scalar(0), Scalar(0), Scalar(-1);
    const Scalar w = std::sqrt(lam) / Scalar(2);
    for (const auto& pauli : {sx, sy, sz})
      ch.kraus_ops.push_back(w * qcore::kron<Scalar>(pauli, qcore::Matrix2<Scalar>::Identity()));
  }
  return ch;
}

/// One Gaussian rocking-curve peak, parameterized by its FWHM.
template <typename Scalar = double>
struct RockingPeak {
  Scalar center = Scalar(0);  // rad
  Scalar fwhm = Scalar(0);    // rad
  Scalar height = Scalar(1);  // normalized intensity
};

using RockingPeakd = RockingPeak<double>;

template <typename Scalar>
Scalar gaussian_peak_value(const RockingPeak<Scalar>& peak, Scalar angle) {
  const Scalar z = (angle - peak.center) / peak.fwhm;
  return peak.height * std::exp(Scalar(-4) * std::numbers::ln2_v<Scalar> * z * z);
}

/// Sum of Gaussian peaks evaluated on an angle grid.
template <typename Scalar>
Eigen::VectorX<Scalar> rocking_curve(const std::vector<RockingPeak<Scalar>>& peaks,
                                     const Eigen::VectorX<Scalar>& angle_grid) {
  for (const auto& p : peaks)
    if (!(p.fwhm > Scalar(0)) || !(p.height >= Scalar(0)))
      throw std::invalid_argument("rocking peak requires fwhm > 0 and height >= 0");
  Eigen::VectorX<Scalar> intensity = Eigen::VectorX<Scalar>::Zero(angle_grid.size());
  for (Eigen::Index i = 0; i < angle_grid.size(); ++i)
    for (const auto& p : peaks) intensity[i] += gaussian_peak_value(p, angle_grid[i]);
  return intensity;
}

enum class CoilKind { none, al_wire, al_ribbon, cu_ribbon_3mm, cu_ribbon_4mm };

/// Peak-height and FWHM scaling caused by a spin-turner coil in the beam,
/// normalized to the empty beamline.
template <typename Scalar>
RockingPeak<Scalar> broadened_peak(const RockingPeak<Scalar>& base, CoilKind kind) {
  Scalar height_factor(1), fwhm_factor(1);
  switch (kind) {
    case CoilKind::none: break;
    case CoilKind::al_wire: height_factor = Scalar(0.56); fwhm_factor = Scalar(1.68); break;
    case CoilKind::al_ribbon: height_factor = Scalar(0.80); fwhm_factor = Scalar(1.16); break;
    case CoilKind::cu_ribbon_3mm: height_factor = Scalar(0.84); fwhm_factor = Scalar(1.11); break;
    case CoilKind::cu_ribbon_4mm: height_factor = Scalar(0.85); fwhm_factor = Scalar(1.16); break;
  }
  RockingPeak<Scalar> out = base;
  out.height *= height_factor;
  out.fwhm *= fwhm_factor;
  return out;
}

namespace detail {

// Composite-Simpson integral, panels doubled until the relative change of
// the estimate drops below rel_tol.
template <typename Scalar, typename Fn>
Scalar adaptive_simpson(Fn&& f, Scalar a, Scalar b, Scalar rel_tol) {
  auto simpson = [&](int panels) {
    const Scalar h = (b - a) / Scalar(panels);
    Scalar sum = f(a) + f(b);
    for (int i = 1; i < panels; ++i) sum += f(a + Scalar(i) * h) * Scalar(i % 2 == 1 ? 4 : 2);
    return sum * h / Scalar(3);
  };
  Scalar prev = simpson(64);
  for (int panels = 128; panels <= (1 << 20); panels *= 2) {
    const Scalar cur = simpson(panels);
    if (std::abs(cur - prev) <= rel_tol * std::max(std::abs(cur), Scalar(1e-300))) return cur;
    prev = cur;
  }
  return prev;
}

}  // namespace detail

/// Beam polarization after peak selection: each spin component's rocking
/// peak is integrated against a Gaussian acceptance window centered on the
/// up peak, P = (I_up - I_down) / (I_up + I_down). Quadrature to a relative
/// error of 1e-8.
template <typename Scalar>
Scalar polarization_from_peak_overlap(const RockingPeak<Scalar>& up,
                                      const RockingPeak<Scalar>& down,
                                      Scalar acceptance_fwhm) {
  if (!(acceptance_fwhm > Scalar(0)))
    throw std::invalid_argument("acceptance fwhm must be positive");
  RockingPeak<Scalar> window{up.center, acceptance_fwhm, Scalar(1)};
  auto accepted = [&](const RockingPeak<Scalar>& peak) {
    auto integrand = [&](Scalar x) {
      return gaussian_peak_value(peak, x) * gaussian_peak_value(window, x);
    };
    // The product of the two Gaussians is supported well inside the union
    // of their +-10 FWHM neighbourhoods.
    const Scalar lo = std::min(peak.center, window.center) -
                      Scalar(10) * std::max(peak.fwhm, window.fwhm);
    const Scalar hi = std::max(peak.center, window.center) +
                      Scalar(10) * std::max(peak.fwhm, window.fwhm);
    return detail::adaptive_simpson(integrand, lo, hi, Scalar(1e-8));
  };
  const Scalar i_up = accepted(up);
  const Scalar i_down = accepted(down);
  const Scalar total = i_up + i_down;
  if (!(total > Scalar(0))) throw std::invalid_argument("no intensity in acceptance window");
  return (i_up - i_down) / total;
}

/// Thermal response of the interferometer: contrast anchors interpolated
/// piecewise-linearly and a linear phase drift around the reference
/// temperature.
template <typename Scalar = double>
struct ThermalModel {
  Scalar reference_temperature = Scalar(25.2);  // deg C
  std::vector<std::pair<Scalar, Scalar>> contrast_vs_temperature = {
      {Scalar(25.2), Scalar(0.88)}, {Scalar(26.2), Scalar(0.60)}, {Scalar(26.8), Scalar(0.33)}};
  Scalar phase_drift_rate = Scalar(1.92);  // rad per deg C

  void validate() const {
    if (contrast_vs_temperature.size() < 2)
      throw std::invalid_argument("thermal model needs at least two anchors");
    for (std::size_t i = 0; i < contrast_vs_temperature.size(); ++i) {
      const auto& [t, c] = contrast_vs_temperature[i];
      if (!(c >= Scalar(0) && c <= Scalar(1)))
        throw std::invalid_argument("thermal anchor contrast must lie in [0, 1]");
      if (i > 0 && !(t > contrast_vs_temperature[i - 1].first))
        throw std::invalid_argument("thermal anchor temperatures must be strictly increasing");
    }
  }
};

using ThermalModeld = ThermalModel<double>;

/// Piecewise-linear interpolation through the contrast anchors; out of
/// range temperatures are an error.
template <typename Scalar>
Scalar contrast_at_temperature(const ThermalModel<Scalar>& tm, Scalar t) {
  tm.validate();
  const auto& anchors = tm.contrast_vs_temperature;
  if (t < anchors.front().first || t > anchors.back().first)
    throw std::out_of_range("temperature outside the calibrated contrast range");
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    if (t <= anchors[i].first) {
      const auto& [t0, c0] = anchors[i - 1];
      const auto& [t1, c1] = anchors[i];
      return c0 + (c1 - c0) * (t - t0) / (t1 - t0);
    }
  }
  return anchors.back().second;
}

/// Fringe phase shift caused by operating away from the reference
/// temperature.
template <typename Scalar>
Scalar thermal_phase_shift(const ThermalModel<Scalar>& tm, Scalar t) {
  return tm.phase_drift_rate * (t - tm.reference_temperature);
}

}  // namespace ifmsim::apparatus
