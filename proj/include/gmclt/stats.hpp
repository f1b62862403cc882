#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "gmclt/error.hpp"

namespace gmclt {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;
  double kurtosis = 0.0;  // non-excess, 3 for a normal law
};

inline Moments moments(std::span<const double> xs) {
  if (xs.empty()) throw EmptySample("moments of an empty sample");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  Moments out;
  out.mean = mean;
  out.variance = xs.size() > 1 ? m2 * n / (n - 1.0) : 0.0;
  if (m2 > 0.0) {
    out.skewness = m3 / std::pow(m2, 1.5);
    out.kurtosis = m4 / (m2 * m2);
  }
  return out;
}

// Standard error of the unbiased variance estimate, from the fourth moment.
inline double variance_standard_error(std::span<const double> xs) {
  const Moments mo = moments(xs);
  const double n = static_cast<double>(xs.size());
  const double m2 = mo.variance * (n - 1.0) / n;
  const double m4 = mo.kurtosis * m2 * m2;
  return std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
}

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Phi(x) through the complementary error function of the C library, accurate
// to a few ulps over the whole real line.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Inverse of Phi: Acklam's rational start, then two Halley steps on normal_cdf.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile needs p in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p > 1.0 - lo) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = normal_cdf(x) - p;
    const double u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

// sup_x |F_n(x) - F(x)| for a continuous F. Tied samples are grouped so the
// empirical CDF jumps once per distinct value.
template <class Cdf>
double ks_distance(std::vector<double> xs, Cdf&& cdf) {
  if (xs.empty()) throw EmptySample("ks_distance of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < xs.size()) {
    std::size_t j = i;
    while (j + 1 < xs.size() && xs[j + 1] == xs[i]) ++j;
    const double f = cdf(xs[i]);
    const double below = static_cast<double>(i) / n;
    const double at = static_cast<double>(j + 1) / n;
    d = std::max({d, std::abs(at - f), std::abs(f - below)});
    i = j + 1;
  }
  return d;
}

inline double ks_normal(std::vector<double> xs) {
  return ks_distance(std::move(xs), [](double x) { return normal_cdf(x); });
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw EmptySample("ks_two_sample needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Standard deviation of the one-sample KS statistic under the null:
// sqrt(n) * D_n tends to the Kolmogorov law, whose standard deviation is
// sqrt(pi^2/12 - (pi/2) ln^2 2).
inline double ks_sampling_sd(std::size_t n) {
  const double kolmogorov_sd =
      std::sqrt(std::numbers::pi * std::numbers::pi / 12.0 -
                0.5 * std::numbers::pi * std::numbers::ln2 * std::numbers::ln2);
  return kolmogorov_sd / std::sqrt(static_cast<double>(n));
}

// Gauss-Legendre nodes and weights on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline QuadratureRule gauss_legendre(std::size_t order) {
  if (order == 0) throw ConfigError("quadrature order must be positive");
  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const std::size_t half = (order + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(order) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= order; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      if (order == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = static_cast<double>(order) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  return rule;
}

// Composite Gauss-Legendre integral of f over [a, b] with `panels` equal panels.
template <class F>
double integrate(F&& f, double a, double b, std::size_t panels, const QuadratureRule& rule) {
  const double h = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double mid = lo + 0.5 * h;
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) acc += rule.weights[q] * f(mid + 0.5 * h * rule.nodes[q]);
    total += 0.5 * h * acc;
  }
  return total;
}

}  // namespace gmclt
