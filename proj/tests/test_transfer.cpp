#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "gmclt/observables.hpp"
#include "gmclt/transfer.hpp"

using namespace gmclt;

namespace {

const MarkovShift& two_state() {
  static const MarkovShift m(Eigen::MatrixXd{{0.9, 0.1}, {0.2, 0.8}});
  return m;
}

const UlamGrid& gauss512() {
  static const UlamGrid g = build_ulam_grid(GaussMap{}, 512);
  return g;
}

// pi0 pi1 (1 + l2) / (1 - l2) for the centered indicator of state 0.
constexpr double kMarkovSigma2 = (2.0 / 9.0) * (1.7 / 0.3);

Eigen::VectorXd random_grid_function(std::size_t N, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(N));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform() * 2.0 - 0.5;
  return v;
}

}  // namespace

TEST(TransferPointwise, IdentityAtZeroMatchesBranchSum) {
  // w_k(0) f(1/k) = 1/(k^2 (k+1)); brute-force sum of 10^6 branch terms
  long double oracle = 0.0L;
  for (long k = 1000000; k >= 1; --k) oracle += 1.0L / (static_cast<long double>(k) * k * (k + 1));
  const double got = transfer_at([](double y) { return y; }, 0.0, 1000000);
  EXPECT_NEAR(got, static_cast<double>(oracle), 1e-12);
  EXPECT_NEAR(got, std::numbers::pi * std::numbers::pi / 6.0 - 1.0, 1e-12);
}

TEST(TransferPointwise, ConstantIsFixed) {
  for (double x : {0.0, 0.3, 0.77, 1.0}) EXPECT_NEAR(transfer_at([](double) { return 1.0; }, x), 1.0, 1e-12);
}

TEST(UlamGauss, FixedPointAndMass) {
  const UlamGrid& g = gauss512();
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(512);
  EXPECT_LT((apply_transfer(g, one) - one).cwiseAbs().maxCoeff(), 1e-8);
  const Eigen::VectorXd f = random_grid_function(512, 4);
  EXPECT_NEAR(g.integrate(apply_transfer(g, f)), g.integrate(f), 1e-12);
}

TEST(UlamGauss, PositivityAndSupContraction) {
  const UlamGrid& g = gauss512();
  Eigen::VectorXd f = random_grid_function(512, 8).cwiseAbs();
  const double sup = f.cwiseAbs().maxCoeff();
  for (int n = 1; n <= 50; ++n) {
    f = apply_transfer(g, f);
    ASSERT_GE(f.minCoeff(), 0.0);
    ASSERT_LE(f.cwiseAbs().maxCoeff(), sup * (1.0 + 1e-12));
  }
}

TEST(UlamGauss, SpectralGap) {
  const SpectralReport r = spectral_report(gauss512());
  EXPECT_NEAR(r.lambda1, 1.0, 1e-6);
  EXPECT_GT(r.rho, 0.25);
  EXPECT_LT(r.rho, 0.35);
  EXPECT_LE(r.residual, 1e-8);
}

TEST(UlamGauss, RejectsTinyGrid) { EXPECT_THROW(build_ulam_grid(GaussMap{}, 4), ConfigError); }

TEST(UlamMarkov, TwoStateSpectrum) {
  const SpectralReport r = build_ulam(two_state(), 2);
  EXPECT_NEAR(r.lambda1, 1.0, 1e-12);
  EXPECT_NEAR(r.rho, 0.7, 1e-8);
  // finer cylinder grids see the same spectrum
  EXPECT_NEAR(build_ulam(two_state(), 8).rho, 0.7, 1e-8);
}

TEST(UlamMarkov, BernoulliIsRankOne) {
  EXPECT_LT(build_ulam(bernoulli_shift(), 2).rho, 1e-8);
  // on length-2 cylinders the zero eigenvalue is defective, so the solver
  // only resolves it to about sqrt(machine eps)
  EXPECT_LT(build_ulam(bernoulli_shift(), 4).rho, 1e-7);
}

TEST(UlamMarkov, ResolutionMustBePowerOfStates) { EXPECT_THROW(build_ulam_grid(two_state(), 6), ConfigError); }

TEST(Projection, GridMismatch) {
  const UlamGrid g = build_ulam_grid(two_state(), 2);
  EXPECT_THROW(project(GaussMap{}, g, gauss_identity()), GridMismatch);
  EXPECT_THROW(project(bernoulli_shift(), gauss512(), markov_coin(bernoulli_shift())), GridMismatch);
}

TEST(Twisted, ZeroTwistIsOne) {
  const UlamGrid g = build_ulam_grid(two_state(), 2);
  const Eigen::VectorXd f = project(two_state(), g, center(two_state(), markov_indicator(two_state(), 0)));
  const TwistedResult r = twisted_eigenvalue(g, f, 0.0);
  EXPECT_NEAR(r.lambda.real(), 1.0, 1e-12);
  EXPECT_NEAR(r.lambda.imag(), 0.0, 1e-12);
}

TEST(Twisted, FairCoinIsCosine) {
  const MarkovShift b = bernoulli_shift();
  const UlamGrid g = build_ulam_grid(b, 2);
  const Eigen::VectorXd f = project(b, g, markov_coin(b));
  for (double t : {0.1, 0.4, 0.9}) {
    const TwistedResult r = twisted_eigenvalue(g, f, t);
    EXPECT_NEAR(r.lambda.real(), std::cos(t / 2.0), 1e-10);
    EXPECT_NEAR(r.lambda.imag(), 0.0, 1e-10);
  }
}

TEST(Twisted, ConjugateSymmetryAndSmallTExpansion) {
  const UlamGrid& g = gauss512();
  const Eigen::VectorXd f = project(GaussMap{}, g, center(GaussMap{}, gauss_identity()));
  const double s2 = variance_green_kubo(g, f).sigma2;
  for (double t : {0.05, 0.2}) {
    const std::complex<double> a = twisted_eigenvalue(g, f, t).lambda, b = twisted_eigenvalue(g, f, -t).lambda;
    EXPECT_EQ(a.real(), b.real());
    EXPECT_EQ(a.imag(), -b.imag());
    EXPECT_NEAR(a.real(), 1.0 - s2 * t * t / 2.0, 2.0 * t * t * t);
    EXPECT_LT(std::abs(a.imag()), 2.0 * t * t * t);
  }
}

TEST(Twisted, SmallnessEnforced) {
  const MarkovShift b = bernoulli_shift();
  const UlamGrid g = build_ulam_grid(b, 2);
  const Eigen::VectorXd f = project(b, g, markov_coin(b));
  EXPECT_THROW(twisted_eigenvalue(g, f, 2.0), SmallnessViolation);
}

TEST(GreenKubo, BernoulliCoin) {
  const MarkovShift b = bernoulli_shift();
  const UlamGrid g = build_ulam_grid(b, 2);
  EXPECT_NEAR(variance_green_kubo(g, project(b, g, markov_coin(b))).sigma2, 0.25, 1e-12);
}

TEST(GreenKubo, TwoStateClosedForm) {
  const UlamGrid g = build_ulam_grid(two_state(), 2);
  const Eigen::VectorXd f = project(two_state(), g, center(two_state(), markov_indicator(two_state(), 0)));
  EXPECT_NEAR(variance_green_kubo(g, f).sigma2, kMarkovSigma2, 1e-8);
}

TEST(GreenKubo, CoboundaryVanishes) {
  const MarkovShift& m = two_state();
  const MarkovObservable f = markov_coboundary(m, {1.0, 0.0});
  const UlamGrid g = build_ulam_grid(m, 4);
  const Eigen::VectorXd v = project(m, g, f);
  const double var_f = g.integrate(v.cwiseProduct(v));
  EXPECT_LT(variance_green_kubo(g, v).sigma2, 0.01 * var_f);
  EXPECT_LT(variance_spectral(g, v).sigma2, 0.01 * var_f);
}

TEST(GreenKubo, RejectsUncentered) {
  const UlamGrid g = build_ulam_grid(two_state(), 2);
  EXPECT_THROW(variance_green_kubo(g, project(two_state(), g, markov_indicator(two_state(), 0))), NotCentered);
}

TEST(SpectralVariance, MatchesClosedForms) {
  const MarkovShift b = bernoulli_shift();
  const UlamGrid gb = build_ulam_grid(b, 2);
  EXPECT_NEAR(variance_spectral(gb, project(b, gb, markov_coin(b))).sigma2, 0.25, 1e-6);
  const UlamGrid g = build_ulam_grid(two_state(), 2);
  const Eigen::VectorXd f = project(two_state(), g, center(two_state(), markov_indicator(two_state(), 0)));
  EXPECT_NEAR(variance_spectral(g, f).sigma2, kMarkovSigma2, 0.02 * kMarkovSigma2);
}

TEST(MonteCarloVariance, SingleStepIsVarianceOfF) {
  const MarkovShift b = bernoulli_shift();
  const MonteCarloVariance mc = variance_monte_carlo(b, markov_coin(b), 1, 20000, 3);
  EXPECT_NEAR(mc.sigma2, 0.25, 0.01);
}

TEST(MonteCarloVariance, TwoStateWithinFivePercent) {
  const MonteCarloVariance mc =
      variance_monte_carlo(two_state(), center(two_state(), markov_indicator(two_state(), 0)), 1000, 10000, 17);
  EXPECT_NEAR(mc.sigma2, kMarkovSigma2, 0.05 * kMarkovSigma2);
}

TEST(EstimateVariance, GaussIdentityTripleAgreement) {
  VarianceOptions opt;
  opt.mc_samples = 4000;
  const VarianceEstimate v = estimate_variance(GaussMap{}, gauss_identity(), opt, &gauss512());
  EXPECT_NEAR(v.sigma2_spectral, v.sigma2_green_kubo, 0.05 * v.sigma2_green_kubo);
  EXPECT_LT(std::abs(v.sigma2_monte_carlo - v.sigma2_green_kubo),
            std::max(0.05 * v.sigma2_green_kubo, 3.0 * v.monte_carlo_se));
}
