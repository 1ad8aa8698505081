#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ifmsim/apparatus.hpp"
#include "ifmsim/counting.hpp"
#include "ifmsim/rng.hpp"

using namespace ifmsim;

namespace {

double poisson_pmf(int k, double lambda) {
  return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
}

// Pearson chi-square of sampled counts against the Poisson law, with the
// tails pooled into edge bins.
double poisson_gof_statistic(counting::CountingRng& rng, double lambda, int n_samples,
                             int k_low, int k_high) {
  // Bins: {<= k_low}, each k strictly between, {>= k_high}.
  const int n_bins = k_high - k_low + 1;
  std::vector<double> observed(static_cast<std::size_t>(n_bins), 0.0);
  for (int i = 0; i < n_samples; ++i) {
    const auto k = rng.poisson(lambda);
    int bin;
    if (k <= k_low) bin = 0;
    else if (k >= k_high) bin = n_bins - 1;
    else bin = static_cast<int>(k) - k_low;
    observed[static_cast<std::size_t>(bin)] += 1.0;
  }
  std::vector<double> expected(static_cast<std::size_t>(n_bins), 0.0);
  double below = 0;
  for (int k = 0; k <= k_low; ++k) below += poisson_pmf(k, lambda);
  expected[0] = below;
  double covered = below;
  for (int k = k_low + 1; k < k_high; ++k) {
    expected[static_cast<std::size_t>(k - k_low)] = poisson_pmf(k, lambda);
    covered += poisson_pmf(k, lambda);
  }
  expected[static_cast<std::size_t>(n_bins - 1)] = 1.0 - covered;

  double stat = 0;
  for (int b = 0; b < n_bins; ++b) {
    const double e = expected[static_cast<std::size_t>(b)] * n_samples;
    REQUIRE(e >= 5.0);  // binning sanity
    const double d = observed[static_cast<std::size_t>(b)] - e;
    stat += d * d / e;
  }
  return stat;
}

}  // namespace

TEST_CASE("stream derivation is deterministic and spreads") {
  const counting::RngSeed master{987654321};
  const auto a = counting::derive_stream(master, 0);
  const auto b = counting::derive_stream(master, 1);
  CHECK(a.value == counting::derive_stream(master, 0).value);
  CHECK(a.value != b.value);
  CHECK(a.value != master.value);
}

TEST_CASE("expected_rate follows the (1 + cos)/2 law on the bell state") {
  const auto bell = qcore::prepare_bell_state();
  const double base = 50.0, eff = 0.99;

  // Maximum at alpha + chi = 0, zero at pi, half in between.
  CHECK(counting::expected_rate(bell, {0.0, 0.0}, base, eff) ==
        doctest::Approx(base * eff).epsilon(1e-12));
  CHECK(counting::expected_rate(bell, {0.0, std::numbers::pi}, base, eff) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(counting::expected_rate(bell, {std::numbers::pi / 2, 0.0}, base, eff) ==
        doctest::Approx(base * eff / 2).epsilon(1e-12));

  // A fully dephased state gives the flat half rate at every setting.
  const auto flat = qcore::apply_channel(bell, apparatus::make_path_dephasing(0.0));
  for (double chi : {0.0, 1.0, 2.5})
    CHECK(counting::expected_rate(flat, {0.3, chi}, base, eff) ==
          doctest::Approx(base * eff / 2).epsilon(1e-12));
}

TEST_CASE("expected_rate fringe visibility is the product of noise factors") {
  auto state = qcore::prepare_bell_state();
  const double contrast = 0.91, polarization = 0.993;
  state = qcore::apply_channel(state, apparatus::make_path_dephasing(contrast));
  state = qcore::apply_channel(state, apparatus::make_spin_depolarizer(polarization));
  const double base = 80.0, eff = 0.97, alpha = 0.6;
  const double visibility = contrast * polarization;
  for (int j = 0; j < 32; ++j) {
    const double chi = 2 * std::numbers::pi * j / 32;
    const double expected = base * eff * (1 + visibility * std::cos(alpha + chi)) / 2;
    CHECK(counting::expected_rate(state, {alpha, chi}, base, eff) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("draw_counts basics") {
  SUBCASE("zero rate always gives zero counts") {
    for (std::uint64_t s = 0; s < 10; ++s)
      CHECK(counting::draw_counts(0.0, 100.0, {s}).counts == 0.0);
  }
  SUBCASE("deterministic for a fixed seed") {
    const auto a = counting::draw_counts(123.4, 50.0, {314159});
    const auto b = counting::draw_counts(123.4, 50.0, {314159});
    CHECK(a.counts == b.counts);
    CHECK(a.mean_rate == 123.4);
    CHECK(a.integration_time == 50.0);
  }
  SUBCASE("counts are integral") {
    const auto rec = counting::draw_counts(87.3, 11.0, {5});
    CHECK(rec.counts == std::floor(rec.counts));
  }
  SUBCASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(counting::draw_counts(-1.0, 1.0, {1}), std::invalid_argument);
    CHECK_THROWS_AS(counting::draw_counts(1.0, -1.0, {1}), std::invalid_argument);
    counting::CountingRng rng({1});
    CHECK_THROWS_AS(rng.poisson(1e19), std::invalid_argument);
  }
  SUBCASE("noise-free counterpart is exact") {
    const auto rec = counting::expected_counts(12.5, 8.0);
    CHECK(rec.counts == 100.0);
  }
}

TEST_CASE("poisson sampler: mean and variance at large mean") {
  counting::CountingRng rng({20210607});
  const double mean = 1e6;
  const int n = 10000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double k = static_cast<double>(rng.poisson(mean));
    sum += k;
    sum_sq += k * k;
  }
  const double sample_mean = sum / n;
  const double sample_var = (sum_sq - n * sample_mean * sample_mean) / (n - 1);
  // 3 sigma of the mean estimate: 3 * sqrt(mean / n) = 30.
  CHECK(std::abs(sample_mean - mean) <= 30.0);
  CHECK(sample_var / sample_mean >= 0.95);
  CHECK(sample_var / sample_mean <= 1.05);
}

TEST_CASE("poisson sampler: chi-square goodness of fit at the 0.1% level") {
  SUBCASE("small-mean branch") {
    counting::CountingRng rng({424242});
    // Bins {<=0, 1, ..., 10, >=11}: 12 bins, 11 degrees of freedom.
    const double stat = poisson_gof_statistic(rng, 3.7, 100000, 0, 11);
    CHECK(stat < 31.264);  // chi-square 0.999 quantile, 11 dof
  }
  SUBCASE("transformed-rejection branch") {
    counting::CountingRng rng({90210});
    // Bins {<=11, 12, ..., 28, >=29}: 19 bins, 18 degrees of freedom.
    const double stat = poisson_gof_statistic(rng, 20.0, 100000, 11, 29);
    CHECK(stat < 42.312);  // chi-square 0.999 quantile, 18 dof
  }
}
