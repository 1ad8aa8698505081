#pragma once

// Exact quantum mechanics of the spin (x) path two-qubit space: states,
// projective measurements and CPTP channels on 4x4 density matrices.
//
// Basis ordering of the product space is fixed throughout the library:
//   index 0: |up, I>    index 1: |up, II>
//   index 2: |down, I>  index 3: |down, II>
// i.e. index = 2*spin + path with spin in {0=up, 1=down}, path in {0=I, 1=II}.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ifmsim::qcore {

template <typename Scalar>
using Matrix2 = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

template <typename Scalar>
using Matrix4 = Eigen::Matrix<std::complex<Scalar>, 4, 4>;

// Numerical tolerances for the state/channel invariants. Double precision
// leaves ample headroom for exact 4x4 algebra.
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kEigenvalueTol = 1e-10;
inline constexpr double kKrausTol = 1e-10;

enum class Path : int { I = 0, II = 1 };

inline Path other_path(Path p) { return p == Path::I ? Path::II : Path::I; }

/// One joint measurement setting: spin-analysis azimuth alpha and path
/// phase chi, both in radians.
template <typename Scalar = double>
struct JointSetting {
  Scalar alpha{0};
  Scalar chi{0};
};

using JointSettingd = JointSetting<double>;

/// Density matrix over the spin (x) path product space.
///
/// Valid states are Hermitian, unit-trace and positive semidefinite; the
/// checks are split out so tests and channel code can verify them cheaply.
template <typename Scalar = double>
struct SpinPathState {
  Matrix4<Scalar> rho = Matrix4<Scalar>::Zero();

  Scalar hermiticity_defect() const {
    return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  }

  Scalar trace_defect() const { return std::abs(rho.trace() - std::complex<Scalar>(1)); }

  Scalar smallest_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix4<Scalar>> es(
        ((rho + rho.adjoint()) / Scalar(2)).eval(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  bool is_valid() const {
    return hermiticity_defect() <= Scalar(kHermitianTol) &&
           trace_defect() <= Scalar(kTraceTol) &&
           smallest_eigenvalue() >= Scalar(-kEigenvalueTol);
  }

  Scalar purity() const { return (rho * rho).trace().real(); }
};

using SpinPathStated = SpinPathState<double>;

/// A completely positive trace-preserving map in Kraus form, representing
/// one beamline element or noise process.
template <typename Scalar = double>
struct ElementChannel {
  std::vector<Matrix4<Scalar>> kraus_ops;
  std::string label;
};

using ElementChanneld = ElementChannel<double>;

/// Max-norm deviation of sum(K^dag K) from the identity.
template <typename Scalar>
Scalar trace_preservation_defect(const ElementChannel<Scalar>& ch) {
  Matrix4<Scalar> sum = Matrix4<Scalar>::Zero();
  for (const auto& k : ch.kraus_ops) sum += k.adjoint() * k;
  return (sum - Matrix4<Scalar>::Identity()).cwiseAbs().maxCoeff();
}

template <typename Scalar>
bool is_trace_preserving(const ElementChannel<Scalar>& ch) {
  return trace_preservation_defect(ch) <= Scalar(kKrausTol);
}

/// Kronecker product with the spin factor slow and the path factor fast,
/// matching the declared basis ordering.
template <typename Scalar>
Matrix4<Scalar> kron(const Matrix2<Scalar>& spin, const Matrix2<Scalar>& path) {
  Matrix4<Scalar> out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.template block<2, 2>(2 * i, 2 * j) = spin(i, j) * path;
  return out;
}

/// |Psi><Psi| for |Psi> = (|up,I> + |down,II>)/sqrt(2).
template <typename Scalar = double>
SpinPathState<Scalar> prepare_bell_state() {
  SpinPathState<Scalar> state;
  const Scalar half(0.5);
  state.rho(0, 0) = half;
  state.rho(0, 3) = half;
  state.rho(3, 0) = half;
  state.rho(3, 3) = half;
  return state;
}

/// Fully mixed state 1/4 on the product space.
template <typename Scalar = double>
SpinPathState<Scalar> maximally_mixed_state() {
  SpinPathState<Scalar> state;
  state.rho = Matrix4<Scalar>::Identity() / Scalar(4);
  return state;
}

namespace detail {

inline void require_sign(int sign) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("projector sign must be +1 or -1");
}

// 2x2 projector onto (|0> + sign*e^{i phi}|1>)/sqrt(2).
template <typename Scalar>
Matrix2<Scalar> azimuthal_projector(Scalar phi, int sign) {
  const std::complex<Scalar> phase = std::polar(Scalar(1), phi) * Scalar(sign);
  Matrix2<Scalar> p;
  p(0, 0) = Scalar(0.5);
  p(0, 1) = Scalar(0.5) * std::conj(phase);
  p(1, 0) = Scalar(0.5) * phase;
  p(1, 1) = Scalar(0.5);
  return p;
}

}  // namespace detail

/// Projector onto the spin state (|up> + sign*e^{i alpha}|down>)/sqrt(2),
/// acting as identity on the path factor.
template <typename Scalar>
Matrix4<Scalar> spin_projector(Scalar alpha, int sign) {
  detail::require_sign(sign);
  return kron<Scalar>(detail::azimuthal_projector(alpha, sign), Matrix2<Scalar>::Identity());
}

/// Projector onto the path state (|I> + sign*e^{i chi}|II>)/sqrt(2),
/// acting as identity on the spin factor.
template <typename Scalar>
Matrix4<Scalar> path_projector(Scalar chi, int sign) {
  detail::require_sign(sign);
  return kron<Scalar>(Matrix2<Scalar>::Identity(), detail::azimuthal_projector(chi, sign));
}

/// Probability of the joint outcome (spin_sign, path_sign) at the given
/// setting. The four outcomes of one setting sum to one.
template <typename Scalar>
Scalar ideal_joint_probability(const SpinPathState<Scalar>& state, const JointSetting<Scalar>& s,
                               int spin_sign, int path_sign) {
  const Matrix4<Scalar> proj =
      spin_projector(s.alpha, spin_sign) * path_projector(s.chi, path_sign);
  return (state.rho * proj).trace().real();
}

/// Expectation value of the joint spin/path observable
///   [P^S(alpha,+) - P^S(alpha,-)] * [P^P(chi,+) - P^P(chi,-)],
/// which equals cos(alpha + chi) on the ideal Bell state.
template <typename Scalar>
Scalar joint_expectation(const SpinPathState<Scalar>& state, const JointSetting<Scalar>& s) {
  const Matrix4<Scalar> spin_obs = spin_projector(s.alpha, +1) - spin_projector(s.alpha, -1);
  const Matrix4<Scalar> path_obs = path_projector(s.chi, +1) - path_projector(s.chi, -1);
  return (state.rho * spin_obs * path_obs).trace().real();
}

/// rho -> sum_k K rho K^dag. Rejects channels that are not trace
/// preserving within kKrausTol.
template <typename Scalar>
SpinPathState<Scalar> apply_channel(const SpinPathState<Scalar>& state,
                                    const ElementChannel<Scalar>& ch) {
  if (ch.kraus_ops.empty()) throw std::invalid_argument("channel has no Kraus operators");
  if (!is_trace_preserving(ch))
    throw std::invalid_argument("channel '" + ch.label + "' is not trace preserving");
  SpinPathState<Scalar> out;
  for (const auto& k : ch.kraus_ops) out.rho += k * state.rho * k.adjoint();
  return out;
}

/// Applies channels left to right (beam order).
template <typename Scalar>
SpinPathState<Scalar> apply_pipeline(SpinPathState<Scalar> state,
                                     const std::vector<ElementChannel<Scalar>>& chain) {
  for (const auto& ch : chain) state = apply_channel(state, ch);
  return state;
}

/// Projects onto one interferometer path (an ideal beam blocker on the
/// other path) and renormalizes. Returns the renormalized state and the
/// transmitted intensity fraction. Not a trace-preserving channel.
template <typename Scalar>
std::pair<SpinPathState<Scalar>, Scalar> project_onto_path(const SpinPathState<Scalar>& state,
                                                           Path keep) {
  Matrix2<Scalar> keep_path = Matrix2<Scalar>::Zero();
  keep_path(static_cast<int>(keep), static_cast<int>(keep)) = Scalar(1);
  const Matrix4<Scalar> proj = kron<Scalar>(Matrix2<Scalar>::Identity(), keep_path);
  Matrix4<Scalar> projected = proj * state.rho * proj;
  const Scalar weight = projected.trace().real();
  if (weight <= Scalar(0)) throw std::invalid_argument("no intensity in the kept path");
  SpinPathState<Scalar> out;
  out.rho = projected / weight;
  return {out, weight};
}

}  // namespace ifmsim::qcore
