#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gmclt/clt.hpp"
#include "gmclt/error.hpp"
#include "gmclt/observables.hpp"
#include "gmclt/parallel.hpp"
#include "gmclt/random.hpp"
#include "gmclt/stats.hpp"
#include "gmclt/systems.hpp"

namespace gmclt {

using Cdf = std::function<double(double)>;

// Sum of the midranks of X within X ∪ Y.
inline double rank_sum(std::span<const double> X, std::span<const double> Y) {
  if (X.empty() || Y.empty()) throw EmptySample("rank_sum needs two non-empty samples");
  std::vector<std::pair<double, bool>> all;  // (value, from X)
  all.reserve(X.size() + Y.size());
  for (double x : X) all.emplace_back(x, true);
  for (double y : Y) all.emplace_back(y, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double W = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j + 1 < all.size() && all[j + 1].first == all[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t t = i; t <= j; ++t)
      if (all[t].second) W += midrank;
    i = j + 1;
  }
  return W;
}

// U = sum_{i,k} (1{Y_k < X_i} + 1/2 1{Y_k = X_i}) by sorting Y once.
inline double pair_count(std::span<const double> X, std::span<const double> Y) {
  std::vector<double> ys(Y.begin(), Y.end());
  std::sort(ys.begin(), ys.end());
  double U = 0.0;
  for (double x : X) {
    const auto lo = std::lower_bound(ys.begin(), ys.end(), x);
    const auto hi = std::upper_bound(lo, ys.end(), x);
    U += static_cast<double>(lo - ys.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return U;
}

// Null centre (m/2)(n+m+1) of the midrank sum for identical atomless laws.
inline double null_center(std::size_t m, std::size_t n) {
  return 0.5 * static_cast<double>(m) * static_cast<double>(n + m + 1);
}

// Two samples with the CDFs of their marginal laws and
// theta = P(Y <= X) = int F_psi dmu_phi.
struct TwoSampleSeries {
  std::vector<double> X, Y;
  Cdf phi_cdf, psi_cdf;
  double theta = 0.5;
};

struct WilcoxonDecomposition {
  double W = 0.0;
  double A = 0.0, B = 0.0, C = 0.0, D = 0.0;
  double theta = 0.5;
  double identity_error = 0.0;
};

// W = A + m B + n C + D with
//   B = sum_k (1 - F_phi(Y_k)) - n theta,   C = sum_i F_psi(X_i) - m theta,
//   D = m n theta + m(m+1)/2,               A = the doubly centred pair count.
inline WilcoxonDecomposition decompose(const TwoSampleSeries& s) {
  if (!s.phi_cdf || !s.psi_cdf) throw CdfUnavailable("decomposition needs both marginal CDFs");
  const double m = static_cast<double>(s.X.size());
  const double n = static_cast<double>(s.Y.size());
  WilcoxonDecomposition d;
  d.theta = s.theta;
  d.W = rank_sum(s.X, s.Y);
  double sum_b = 0.0, sum_c = 0.0;
  for (double y : s.Y) sum_b += 1.0 - s.phi_cdf(y);
  for (double x : s.X) sum_c += s.psi_cdf(x);
  const double U = pair_count(s.X, s.Y);
  d.A = U - m * sum_b - n * sum_c + m * n * s.theta;
  d.B = sum_b - n * s.theta;
  d.C = sum_c - m * s.theta;
  d.D = m * n * s.theta + 0.5 * m * (m + 1.0);
  const double recon = d.A + m * d.B + n * d.C + d.D;
  d.identity_error = std::abs(recon - d.W);
  if (d.identity_error > 1e-9 * std::max(1.0, d.W)) throw Error("Wilcoxon decomposition identity violated by " + std::to_string(d.identity_error));
  return d;
}

// Literal double sum for A, quadratic in the sample sizes; test oracle.
inline double decomposition_A_bruteforce(const TwoSampleSeries& s) {
  double A = 0.0;
  for (double x : s.X)
    for (double y : s.Y) {
      const double ind = y < x ? 1.0 : (y == x ? 0.5 : 0.0);
      A += ind - (1.0 - s.phi_cdf(y)) - s.psi_cdf(x) + s.theta;
    }
  return A;
}

// Empirical CDF from a calibration sample.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> sample) : xs_(std::move(sample)) {
    if (xs_.empty()) throw EmptySample("empirical CDF of an empty sample");
    std::sort(xs_.begin(), xs_.end());
  }
  double operator()(double t) const {
    return static_cast<double>(std::upper_bound(xs_.begin(), xs_.end(), t) - xs_.begin()) / static_cast<double>(xs_.size());
  }
  std::size_t size() const { return xs_.size(); }

 private:
  std::vector<double> xs_;
};

// Generator of (X, Y) pairs for replication `rep`.
class WilcoxonModel {
 public:
  virtual ~WilcoxonModel() = default;
  virtual std::string name() const = 0;
  virtual void generate(std::size_t m, std::size_t n, std::uint64_t seed, std::uint64_t rep, std::vector<double>& X,
                        std::vector<double>& Y) const = 0;
  virtual Cdf phi_cdf() const = 0;
  virtual Cdf psi_cdf() const = 0;
  virtual double theta() const = 0;
  // Whether n = m (ratio 1) is admissible.
  virtual bool allows_equal_sizes() const { return false; }

  TwoSampleSeries series(std::size_t m, std::size_t n, std::uint64_t seed, std::uint64_t rep) const {
    TwoSampleSeries s;
    generate(m, n, seed, rep, s.X, s.Y);
    s.phi_cdf = phi_cdf();
    s.psi_cdf = psi_cdf();
    s.theta = theta();
    return s;
  }
};

// Classical oracle: X, Y i.i.d. uniform on (0,1) plus a location shift of Y.
class IidUniformModel final : public WilcoxonModel {
 public:
  explicit IidUniformModel(double shift = 0.0) : shift_(shift) {}
  std::string name() const override { return "iid-uniform"; }
  bool allows_equal_sizes() const override { return true; }
  void generate(std::size_t m, std::size_t n, std::uint64_t seed, std::uint64_t rep, std::vector<double>& X,
                std::vector<double>& Y) const override {
    CounterRng rng(seed, rep);
    X.resize(m);
    Y.resize(n);
    for (auto& x : X) x = rng.uniform();
    for (auto& y : Y) y = rng.uniform() + shift_;
  }
  Cdf phi_cdf() const override {
    return [](double t) { return std::clamp(t, 0.0, 1.0); };
  }
  Cdf psi_cdf() const override {
    return [c = shift_](double t) { return std::clamp(t - c, 0.0, 1.0); };
  }
  // P(U' + c <= U) for independent uniforms.
  double theta() const override {
    const double c = std::clamp(shift_, -1.0, 1.0);
    return c >= 0.0 ? 0.5 * (1.0 - c) * (1.0 - c) : 1.0 - 0.5 * (1.0 + c) * (1.0 + c);
  }

 private:
  double shift_;
};

// Gauss-map observable with a known or calibrated marginal CDF.
struct GaussMarginal {
  GaussObservable f;
  Cdf cdf;
  std::string name;
};

inline Cdf calibrate_cdf(const GaussObservable& f, std::size_t samples, std::uint64_t seed);

// identity and shift:c have closed-form laws; indicator:k is atomic.
// "empirical:<spec>" replaces the closed form by a 10^6-point calibration.
inline GaussMarginal gauss_marginal(const std::string& spec) {
  if (spec.rfind("empirical:", 0) == 0) {
    GaussMarginal g = gauss_marginal(spec.substr(10));
    if (!g.cdf) return g;
    g.cdf = calibrate_cdf(g.f, 1000000, derive_seed(0xca11b, hash_tag(spec)));
    g.name = spec;
    return g;
  }
  GaussMarginal g;
  g.name = spec;
  if (spec == "identity") {
    g.f = gauss_identity();
    g.cdf = [](double t) { return t <= 0.0 ? 0.0 : (t >= 1.0 ? 1.0 : GaussMap::cdf(t)); };
    return g;
  }
  if (spec.rfind("shift:", 0) == 0) {
    double c = 0.0;
    try {
      c = std::stod(spec.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("bad shift observable '" + spec + "'");
    }
    g.f = gauss_shift(c);
    g.cdf = [c](double t) { return t <= c ? 0.0 : (t >= 1.0 + c ? 1.0 : GaussMap::cdf(t - c)); };
    return g;
  }
  if (spec.rfind("indicator:", 0) == 0) {
    long long k = 0;
    try {
      k = std::stoll(spec.substr(10));
    } catch (const std::exception&) {
      throw ConfigError("bad indicator observable '" + spec + "'");
    }
    g.f = gauss_indicator(k);
    return g;  // no cdf: the law has atoms
  }
  throw ConfigError("unknown observable '" + spec + "' (expected identity, shift:c or indicator:k)");
}

// Calibrated CDF of a Gauss observable from an independent long run.
inline Cdf calibrate_cdf(const GaussObservable& f, std::size_t samples, std::uint64_t seed) {
  std::vector<double> v(samples);
  std::vector<double> orbit(f.window);
  for (std::size_t i = 0; i < samples; ++i) {
    CounterRng rng(seed, i);
    GaussMap::sample_orbit(rng, std::span<double>(orbit));
    v[i] = f(orbit);
  }
  auto e = std::make_shared<EmpiricalCdf>(std::move(v));
  return [e](double t) { return (*e)(t); };
}

// X_i = phi(T^i x), Y_k = psi(T^k x) along one Gauss orbit per replication.
class GaussSeriesModel final : public WilcoxonModel {
 public:
  GaussSeriesModel(GaussMarginal phi, GaussMarginal psi) : phi_(std::move(phi)), psi_(std::move(psi)) {
    if (!phi_.cdf) throw CdfUnavailable("law of " + phi_.name + " has atoms; the rank statistic needs an atomless law");
    if (!psi_.cdf) throw CdfUnavailable("law of " + psi_.name + " has atoms; the rank statistic needs an atomless law");
    // theta = int F_psi(phi) dmu by quadrature on the branch intervals.
    const auto& fphi = phi_.f;
    const auto& Fpsi = psi_.cdf;
    theta_ = gauss_integral([&](double x) { return Fpsi(fphi(std::span<const double>(&x, 1))); });
  }
  std::string name() const override { return "gauss:" + phi_.name + "/" + psi_.name; }
  void generate(std::size_t m, std::size_t n, std::uint64_t seed, std::uint64_t rep, std::vector<double>& X,
                std::vector<double>& Y) const override {
    const std::size_t w = std::max(phi_.f.window, psi_.f.window);
    std::vector<double> orbit(std::max(m, n) + w);
    CounterRng rng(seed, rep);
    GaussMap::sample_orbit(rng, std::span<double>(orbit));
    const std::span<const double> o(orbit);
    X.resize(m);
    Y.resize(n);
    for (std::size_t i = 0; i < m; ++i) X[i] = phi_.f(o.subspan(i + 1, phi_.f.window));
    for (std::size_t k = 0; k < n; ++k) Y[k] = psi_.f(o.subspan(k + 1, psi_.f.window));
  }
  Cdf phi_cdf() const override { return phi_.cdf; }
  Cdf psi_cdf() const override { return psi_.cdf; }
  double theta() const override { return theta_; }

 private:
  GaussMarginal phi_, psi_;
  double theta_ = 0.5;
};

inline std::size_t companion_size(std::size_t m, double lambda, bool allow_equal) {
  if (!(lambda > 0.0 && (lambda < 1.0 || (allow_equal && lambda == 1.0))))
    throw ConfigError("size ratio lambda must lie in (0,1)" + std::string(allow_equal ? " or equal 1 for this model" : ""));
  const auto n = static_cast<std::size_t>(std::llround(lambda * static_cast<double>(m)));
  if (n < 1) throw ConfigError("companion sample size rounds to 0");
  return n;
}

struct SigmaEstimate {
  std::size_t m = 0, n = 0, reps = 0;
  double var_B = 0.0, var_C = 0.0, cov_BC = 0.0;
  double sigma2 = 0.0;      // m^2 Var B + n^2 Var C + 2 n m Cov(B, C)
  double sigma_scaled = 0.0;  // sigma m^{-3/2}
  double var_A = 0.0;
  double var_A_ratio = 0.0;   // Var A / sigma^2
  double mean_W = 0.0;
  double var_W = 0.0;
};

inline SigmaEstimate sigma_m_estimate(const WilcoxonModel& model, std::size_t m, double lambda, std::size_t n_reps,
                                      std::uint64_t seed, unsigned workers = 1) {
  if (n_reps < 2) throw EmptySample("sigma_m_estimate needs at least two replications");
  const std::size_t n = companion_size(m, lambda, model.allows_equal_sizes());
  std::vector<double> A(n_reps), B(n_reps), C(n_reps), W(n_reps);
  parallel_for(n_reps, workers, [&](std::size_t r) {
    const WilcoxonDecomposition d = decompose(model.series(m, n, seed, r));
    A[r] = d.A;
    B[r] = d.B;
    C[r] = d.C;
    W[r] = d.W;
  });
  SigmaEstimate out;
  out.m = m;
  out.n = n;
  out.reps = n_reps;
  const Moments mb = moments(B), mc = moments(C), ma = moments(A), mw = moments(W);
  double cov = 0.0;
  for (std::size_t r = 0; r < n_reps; ++r) cov += (B[r] - mb.mean) * (C[r] - mc.mean);
  cov /= static_cast<double>(n_reps - 1);
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  out.var_B = mb.variance;
  out.var_C = mc.variance;
  out.cov_BC = cov;
  out.sigma2 = md * md * mb.variance + nd * nd * mc.variance + 2.0 * nd * md * cov;
  if (!(out.sigma2 > 0.0)) throw DegenerateVariance("sigma_m^2 is not positive");
  out.sigma_scaled = std::sqrt(out.sigma2) * std::pow(md, -1.5);
  out.var_A = ma.variance;
  out.var_A_ratio = ma.variance / out.sigma2;
  out.mean_W = mw.mean;
  out.var_W = mw.variance;
  return out;
}

struct BehrensFisherResult {
  CltReport report;        // (W - D_model) / sigma_m against N(0,1)
  SigmaEstimate sigma;
  double D_model = 0.0;    // m n theta + m(m+1)/2
  double D_null = 0.0;     // (m/2)(n+m+1)
  double drift = 0.0;      // mean of (W - D_null) / sigma_m
  double drift_se = 0.0;
};

inline BehrensFisherResult behrens_fisher_test(const WilcoxonModel& model, std::size_t m, double lambda,
                                               std::size_t n_samples, std::uint64_t seed, const CltCriteria& crit,
                                               std::size_t calibration_reps = 0, unsigned workers = 1) {
  if (calibration_reps == 0) calibration_reps = n_samples;
  BehrensFisherResult out;
  out.sigma = sigma_m_estimate(model, m, lambda, calibration_reps, derive_seed(seed, 0x5167), workers);
  const std::size_t n = out.sigma.n;
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  out.D_model = md * nd * model.theta() + 0.5 * md * (md + 1.0);
  out.D_null = null_center(m, n);
  const double sigma = std::sqrt(out.sigma.sigma2);
  std::vector<double> W(n_samples);
  const std::uint64_t test_seed = derive_seed(seed, 0x7e57);
  parallel_for(n_samples, workers, [&](std::size_t r) {
    std::vector<double> X, Y;
    model.generate(m, n, test_seed, r, X, Y);
    W[r] = rank_sum(X, Y);
  });
  std::vector<double> z(n_samples), drift(n_samples);
  for (std::size_t r = 0; r < n_samples; ++r) {
    z[r] = (W[r] - out.D_model) / sigma;
    drift[r] = (W[r] - out.D_null) / sigma;
  }
  out.report = evaluate_normalized(m, z, crit);
  const Moments md_ = moments(drift);
  out.drift = md_.mean;
  out.drift_se = std::sqrt(md_.variance / static_cast<double>(n_samples));
  out.report.diagnostics["sigma2"] = out.sigma.sigma2;
  out.report.diagnostics["sigma_scaled"] = out.sigma.sigma_scaled;
  out.report.diagnostics["var_A_ratio"] = out.sigma.var_A_ratio;
  out.report.diagnostics["theta"] = model.theta();
  out.report.diagnostics["n"] = nd;
  out.report.diagnostics["drift"] = out.drift;
  out.report.diagnostics["drift_se"] = out.drift_se;
  return out;
}

}  // namespace gmclt
