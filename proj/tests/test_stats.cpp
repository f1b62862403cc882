#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "gmclt/parallel.hpp"
#include "gmclt/random.hpp"
#include "gmclt/stats.hpp"

using namespace gmclt;

TEST(Normal, CdfValues) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.96), 0.9750021048517795, 1e-12);
  for (double x : {0.1, 0.7, 1.5, 3.0, 6.0}) EXPECT_NEAR(normal_cdf(x) + normal_cdf(-x), 1.0, 1e-12);
}

TEST(Normal, CdfMatchesQuadratureOfDensity) {
  const QuadratureRule rule = gauss_legendre(32);
  for (double x : {-2.5, -0.3, 0.8, 1.96}) {
    const double oracle = 0.5 + integrate([](double t) { return normal_pdf(t); }, 0.0, x, 64, rule);
    EXPECT_NEAR(normal_cdf(x), oracle, 1e-10);
  }
}

TEST(Normal, QuantileInvertsCdf) {
  for (double p : {1e-9, 0.001, 0.2, 0.5, 0.9, 0.999999})
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12 + 1e-9 * p);
}

TEST(Ks, SinglePointIsHalf) { EXPECT_DOUBLE_EQ(ks_normal({0.0}), 0.5); }

TEST(Ks, ExactQuantilesGiveHalfOverN) {
  const std::size_t n = 200;
  std::vector<double> xs;
  for (std::size_t i = 1; i <= n; ++i) xs.push_back(normal_quantile((i - 0.5) / n));
  EXPECT_NEAR(ks_normal(xs), 0.5 / n, 1e-10);
}

// sup over every point t of |F_n(t) - F(t)| with left and right limits, by a double loop.
static double ks_bruteforce(const std::vector<double>& xs) {
  double d = 0.0;
  const double n = static_cast<double>(xs.size());
  for (double t : xs) {
    double below = 0.0, upto = 0.0;
    for (double x : xs) {
      below += x < t;
      upto += x <= t;
    }
    d = std::max({d, std::abs(upto / n - normal_cdf(t)), std::abs(normal_cdf(t) - below / n)});
  }
  return d;
}

TEST(Ks, TiesMatchBruteForce) {
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    CounterRng rng(99, rep);
    std::vector<double> xs(20);
    for (auto& x : xs) x = static_cast<double>(rng.below(7)) * 0.5 - 1.5;  // heavy ties
    EXPECT_NEAR(ks_normal(xs), ks_bruteforce(xs), 1e-15);
  }
}

TEST(Ks, EmptyThrows) { EXPECT_THROW(ks_normal({}), EmptySample); }

TEST(Ks, TwoSampleIdenticalIsZero) {
  std::vector<double> a{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(ks_two_sample(a, a), 0.0);
  EXPECT_DOUBLE_EQ(ks_two_sample({0, 1}, {5, 6}), 1.0);
}

TEST(Moments, KnownValues) {
  const std::vector<double> xs{1, 2, 3, 4};
  const Moments m = moments(xs);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.variance, 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.skewness, 0.0, 1e-15);
}

TEST(Quadrature, GaussLegendreExactForPolynomials) {
  const QuadratureRule r = gauss_legendre(8);
  EXPECT_NEAR(integrate([](double x) { return std::pow(x, 15); }, 0.0, 1.0, 1, r), 1.0 / 16.0, 1e-15);
}

TEST(Random, CounterRngIsDeterministicAndIndexed) {
  CounterRng a(5, 17), b(5, 17), c(5, 18);
  const double ua = a.uniform();
  EXPECT_EQ(ua, b.uniform());
  EXPECT_NE(ua, c.uniform());
  for (int i = 0; i < 10000; ++i) {
    const double u = a.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Random, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 1000; ++t) seen.insert(derive_seed(1, t));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(hash_tag("sigma"), hash_tag("sigma"));
  EXPECT_NE(hash_tag("sigma"), hash_tag("holder"));
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  auto fill = [](unsigned workers) {
    std::vector<double> out(5000);
    parallel_for(out.size(), workers, [&](std::size_t i) {
      CounterRng rng(3, i);
      out[i] = rng.uniform();
    });
    return out;
  };
  EXPECT_EQ(fill(1), fill(8));
}
