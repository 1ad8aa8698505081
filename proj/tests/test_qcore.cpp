#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ifmsim/apparatus.hpp"
#include "ifmsim/qcore.hpp"
#include "test_helpers.hpp"

using namespace ifmsim;
using test::Complex;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent evaluation of the joint observable expectation: projectors
// built from state vectors, tensor products and traces via index loops.
double oracle_joint_expectation(const qcore::SpinPathStated& state, double alpha, double chi) {
  auto minus = [](test::Matrix2 a, const test::Matrix2& b) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) a[i][j] -= b[i][j];
    return a;
  };
  const test::Matrix2 spin_obs = minus(test::naive_azimuthal_projector(alpha, +1),
                                       test::naive_azimuthal_projector(alpha, -1));
  const test::Matrix2 path_obs = minus(test::naive_azimuthal_projector(chi, +1),
                                       test::naive_azimuthal_projector(chi, -1));
  const auto joint = test::naive_kron(spin_obs, path_obs);
  return test::naive_trace_product(state.rho, joint).real();
}

}  // namespace

TEST_CASE("bell state has the expected matrix elements") {
  const auto state = qcore::prepare_bell_state();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const bool corner = (i == 0 || i == 3) && (j == 0 || j == 3);
      const Complex expected = corner ? Complex(0.5) : Complex(0.0);
      CHECK(std::abs(state.rho(i, j) - expected) <= 1e-15);
    }
  }
  CHECK(state.trace_defect() <= 1e-15);
  CHECK(state.purity() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(state.is_valid());
}

TEST_CASE("bell state instantiates for other scalars") {
  const auto state = qcore::prepare_bell_state<float>();
  CHECK(std::abs(state.rho.trace() - std::complex<float>(1.0f)) < 1e-6f);
}

TEST_CASE("spin projector special cases") {
  const auto p0 = qcore::spin_projector(0.0, +1);
  const auto expected0 =
      test::naive_kron({{{0.5, 0.5}, {0.5, 0.5}}}, {{{1.0, 0.0}, {0.0, 1.0}}});
  CHECK(test::max_abs_diff(p0, expected0) <= 1e-15);

  // alpha = pi with sign + equals alpha = 0 with sign -.
  CHECK(test::max_abs_diff(qcore::spin_projector(kPi, +1), qcore::spin_projector(0.0, -1)) <=
        1e-15);

  // Hand-expanded outer product of (|up> + i |down>)/sqrt(2).
  const test::Matrix2 quarter{{{Complex(0.5, 0.0), Complex(0.0, -0.5)},
                               {Complex(0.0, 0.5), Complex(0.5, 0.0)}}};
  const auto expected_quarter = test::naive_kron(quarter, {{{1.0, 0.0}, {0.0, 1.0}}});
  CHECK(test::max_abs_diff(qcore::spin_projector(kPi / 2, +1), expected_quarter) <= 1e-15);

  CHECK_THROWS_AS(qcore::spin_projector(0.0, 2), std::invalid_argument);
}

TEST_CASE("path projector special cases") {
  const auto p0 = qcore::path_projector(0.0, +1);
  const auto expected0 =
      test::naive_kron({{{1.0, 0.0}, {0.0, 1.0}}}, {{{0.5, 0.5}, {0.5, 0.5}}});
  CHECK(test::max_abs_diff(p0, expected0) <= 1e-15);

  const auto quarter = qcore::path_projector(kPi / 4, +1);
  for (int i = 0; i < 4; ++i) CHECK(quarter(i, i).real() == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("projector completeness, idempotence and orthogonality") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(-8.0, 8.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double phi = angle(rng);
    for (auto make : {&qcore::spin_projector<double>, &qcore::path_projector<double>}) {
      const auto plus = make(phi, +1);
      const auto minus = make(phi, -1);
      CHECK(test::max_abs_diff(plus + minus, test::Matrix4cd::Identity()) <= 1e-12);
      CHECK(test::max_abs_diff(plus * plus, plus) <= 1e-12);
      CHECK(test::max_abs_diff(minus * minus, minus) <= 1e-12);
      CHECK((plus * minus).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("joint expectation on the bell state") {
  const auto bell = qcore::prepare_bell_state();

  CHECK(qcore::joint_expectation(bell, {0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-12));
  // cos(pi/2) = 0, cross-checked against the independent matrix route.
  const double e_quarter = qcore::joint_expectation(bell, {kPi / 4, kPi / 4});
  CHECK(std::abs(e_quarter) <= 1e-12);
  CHECK(std::abs(e_quarter - oracle_joint_expectation(bell, kPi / 4, kPi / 4)) <= 1e-12);

  const auto mixed = qcore::maximally_mixed_state();
  CHECK(std::abs(qcore::joint_expectation(mixed, {0.7, -1.3})) <= 1e-12);
}

TEST_CASE("joint expectation equals cos(alpha + chi) on the bell state") {
  const auto bell = qcore::prepare_bell_state();
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> angle(-10.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double alpha = angle(rng);
    const double chi = angle(rng);
    const double e = qcore::joint_expectation(bell, {alpha, chi});
    CHECK(std::abs(e - std::cos(alpha + chi)) <= 1e-12);
    CHECK(std::abs(e - oracle_joint_expectation(bell, alpha, chi)) <= 1e-12);
  }
}

TEST_CASE("joint probabilities: examples and completeness") {
  const auto bell = qcore::prepare_bell_state();
  CHECK(qcore::ideal_joint_probability(bell, {0.0, 0.0}, +1, +1) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(qcore::ideal_joint_probability(bell, {0.0, kPi}, +1, +1)) <= 1e-12);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> angle(-7.0, 7.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto state = test::random_state(rng);
    const qcore::JointSettingd s{angle(rng), angle(rng)};
    double total = 0;
    double signed_sum = 0;
    for (int ss : {+1, -1}) {
      for (int ps : {+1, -1}) {
        const double p = qcore::ideal_joint_probability(state, s, ss, ps);
        CHECK(p >= -1e-12);
        CHECK(p <= 1.0 + 1e-12);
        total += p;
        signed_sum += ss * ps * p;
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // Consistency of the two forms of the joint expectation.
    CHECK(std::abs(signed_sum - qcore::joint_expectation(state, s)) <= 1e-12);
  }
}

TEST_CASE("apply_channel basics") {
  const auto bell = qcore::prepare_bell_state();

  qcore::ElementChanneld identity;
  identity.label = "identity";
  identity.kraus_ops.push_back(test::Matrix4cd::Identity());
  const auto same = qcore::apply_channel(bell, identity);
  CHECK(test::max_abs_diff(same.rho, bell.rho) <= 1e-15);

  // Full path dephasing kills the joint correlation at every setting.
  const auto dephased = qcore::apply_channel(bell, apparatus::make_path_dephasing(0.0));
  CHECK(dephased.is_valid());
  for (double alpha : {0.0, 0.4, 1.7})
    for (double chi : {0.0, -0.9, 2.2})
      CHECK(std::abs(qcore::joint_expectation(dephased, {alpha, chi})) <= 1e-12);

  // Off-diagonal path blocks vanish.
  CHECK(std::abs(dephased.rho(0, 3)) <= 1e-15);
  CHECK(std::abs(dephased.rho(0, 1)) <= 1e-15);

  qcore::ElementChanneld broken;
  broken.label = "broken";
  broken.kraus_ops.push_back(0.5 * test::Matrix4cd::Identity());
  CHECK_THROWS_AS(qcore::apply_channel(bell, broken), std::invalid_argument);
}

TEST_CASE("spin z-rotations compose additively") {
  std::mt19937_64 rng(5);
  auto z_rotation_channel = [](double theta) {
    // Equal rotation on both paths = unconditional spin z-rotation.
    qcore::ElementChanneld ch;
    ch.label = "spin_rz";
    test::Matrix2 rz{{{std::polar(1.0, -theta / 2), 0.0}, {0.0, std::polar(1.0, theta / 2)}}};
    ch.kraus_ops.push_back(test::naive_kron(rz, {{{1.0, 0.0}, {0.0, 1.0}}}));
    return ch;
  };
  std::uniform_real_distribution<double> angle(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double t1 = angle(rng), t2 = angle(rng);
    const auto state = test::random_state(rng);
    const auto two_steps =
        qcore::apply_channel(qcore::apply_channel(state, z_rotation_channel(t1)),
                             z_rotation_channel(t2));
    const auto one_step = qcore::apply_channel(state, z_rotation_channel(t1 + t2));
    CHECK(test::max_abs_diff(two_steps.rho, one_step.rho) <= 1e-12);
  }
}

TEST_CASE("random channel compositions preserve state invariants") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    auto state = test::random_state(rng);
    REQUIRE(state.is_valid());
    for (int step = 0; step < 4; ++step) {
      qcore::ElementChanneld ch;
      const int kind = static_cast<int>(uni(rng) * 3);
      if (kind == 0) {
        ch.label = "random_unitary";
        ch.kraus_ops.push_back(test::random_unitary(rng));
      } else if (kind == 1) {
        // Random mixture of two unitaries.
        const double p = uni(rng);
        ch.label = "mixed_unitary";
        ch.kraus_ops.push_back(std::sqrt(p) * test::random_unitary(rng));
        ch.kraus_ops.push_back(std::sqrt(1 - p) * test::random_unitary(rng));
      } else {
        ch = apparatus::make_path_dephasing(uni(rng));
      }
      state = qcore::apply_channel(state, ch);
      CHECK(state.hermiticity_defect() <= 1e-12);
      CHECK(state.trace_defect() <= 1e-12);
      CHECK(state.smallest_eigenvalue() >= -1e-10);
    }
  }
}

TEST_CASE("path projection renormalizes and reports the lost intensity") {
  // Spin-up beam split over both paths.
  qcore::SpinPathStated split;
  split.rho(0, 0) = 0.5;
  split.rho(0, 1) = 0.5;
  split.rho(1, 0) = 0.5;
  split.rho(1, 1) = 0.5;
  const auto [kept, weight] = qcore::project_onto_path(split, qcore::Path::I);
  CHECK(weight == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(kept.trace_defect() <= 1e-14);
  CHECK(kept.rho(0, 0).real() == doctest::Approx(1.0).epsilon(1e-14));
}
