#include <gtest/gtest.h>

#include <cmath>

#include "gmclt/example5.hpp"
#include "gmclt/transfer.hpp"

using namespace gmclt;

TEST(Example5, FirstTerm) {
  const Example5Term t = example5_term({}, 1);
  EXPECT_EQ(t.m, 0u);
  EXPECT_DOUBLE_EQ(t.ell, 1.0);
  EXPECT_EQ(t.digit, 1);
  EXPECT_DOUBLE_EQ(t.gamma, 1.0);
  // g_1 = 1_{a_1} - mu(a_1)
  const GaussObservable g = example5_g({}, 1);
  const double in = 0.7, out = 0.3;
  EXPECT_NEAR(g(std::span<const double>(&in, 1)), 1.0 - GaussMap::cylinder_measure(1), 1e-15);
  EXPECT_NEAR(g(std::span<const double>(&out, 1)), -GaussMap::cylinder_measure(1), 1e-15);
}

TEST(Example5, SecondTerm) {
  const Example5Term t = example5_term({0.25, 32}, 2);
  EXPECT_EQ(t.m, 3u);
  EXPECT_DOUBLE_EQ(t.ell, 3.375);
  EXPECT_EQ(t.digit, 3);
  EXPECT_NEAR(t.gamma, std::pow(2.0 / 3.0, 6.75), 1e-15);
  EXPECT_NEAR(t.gamma, 0.0647, 1e-4);  // 0.064772
}

TEST(Example5, LevelsNondecreasingAndExactPowers) {
  std::size_t prev = 0;
  for (std::size_t n = 1; n <= 200; ++n) {
    const std::size_t m = example5_level(n);
    EXPECT_GE(m, prev);
    prev = m;
    // (3/2)^m <= n^2 < (3/2)^{m+1}
    EXPECT_LE(std::pow(1.5, m), static_cast<double>(n * n) * (1.0 + 1e-12));
    EXPECT_GT(std::pow(1.5, m + 1), static_cast<double>(n * n));
  }
}

TEST(Example5, RejectsBadEta) {
  EXPECT_THROW(build_example5(GaussMap{}, {0.0, 32}), ConfigError);
  EXPECT_THROW(build_example5(GaussMap{}, {0.5, 32}), ConfigError);
  EXPECT_THROW(example5_term({0.7, 32}, 3), ConfigError);
}

TEST(Example5, TermNormsClosedForm) {
  const Example5Spec spec{};
  for (std::size_t n = 1; n <= spec.n_trunc; ++n) {
    const Example5Term t = example5_term(spec, n);
    const GaussObservable g = example5_g(spec, n, true);
    const double l2 = std::sqrt(gauss_integral([&](double x) {
      const double v = g(std::span<const double>(&x, 1));
      return v * v;
    }));
    EXPECT_NEAR(l2, t.l2_norm, 1e-10) << "n=" << n;
    EXPECT_LT(std::abs(gauss_integral([&](double x) { return g(std::span<const double>(&x, 1)); })), 1e-8);
    EXPECT_NEAR(t.sup_norm, t.ell * (1.0 - t.mu_a), 1e-12);
  }
}

TEST(Example5, ShiftedAndReducedAgreeOnShiftedPoint) {
  // g_n(x) reads T^{m_n} x; the reduced form reads x itself.
  const Example5Spec spec{};
  const GaussObservable g = example5_g(spec, 3, false), gr = example5_g(spec, 3, true);
  std::vector<double> orbit(g.window);
  CounterRng rng(1, 0);
  GaussMap::sample_orbit(rng, orbit);
  EXPECT_DOUBLE_EQ(g(orbit), gr(std::span<const double>(&orbit[g.window - 1], 1)));
}

TEST(Example5, PartialSumsAddUp) {
  const Example5Spec spec{};
  std::vector<double> orbit(40);
  CounterRng rng(2, 0);
  GaussMap::sample_orbit(rng, orbit);
  double manual = 0.0;
  for (std::size_t n = 1; n <= 10; ++n) {
    const GaussObservable g = example5_g(spec, n);
    manual += example5_term(spec, n).gamma * g(orbit);
  }
  EXPECT_NEAR(example5_partial(spec, 10)(orbit), manual, 1e-12);
}

TEST(Example5, TailAndWeightedNorms) {
  const Example5Spec spec{};
  const double e = 3.0 + 2.0 * spec.eta;
  double K = 0.0;
  for (std::size_t n = 2; n < spec.n_trunc; ++n) K = std::max(K, example5_tail(spec, n, spec.n_trunc) * std::pow(n, e));
  EXPECT_TRUE(std::isfinite(K));
  EXPECT_LT(K, 10.0);
  const double first = example5_term(spec, 1).gamma * example5_term(spec, 1).sup_norm;
  for (std::size_t n = 1; n <= spec.n_trunc; ++n) {
    const Example5Term t = example5_term(spec, n);
    EXPECT_LT(t.gamma * t.sup_norm, 10.0 * first);
  }
}

TEST(Example5, CenteredOnTheGrid) {
  const UlamGrid g = build_ulam_grid(GaussMap{}, 256);
  const Eigen::VectorXd v = project(GaussMap{}, g, example5_partial({}, 4, true));
  EXPECT_LT(std::abs(g.integrate(v)), 1e-12);
}
