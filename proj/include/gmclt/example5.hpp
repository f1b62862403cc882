#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gmclt/error.hpp"
#include "gmclt/observables.hpp"
#include "gmclt/systems.hpp"

namespace gmclt {

// Lesser-regularity observable on the Gauss map:
//   f = sum_n gamma_n g_n,  g_n = l_n (1_{a_{floor l_n}} o T^{m_n} - mu(a_{floor l_n})),
//   m_n = floor(-log_r n^2),  l_n = r^{-m_n},  gamma_n = r^{(2+eta) m_n},  r = 2/3.
struct Example5Spec {
  double eta = 0.25;
  std::size_t n_trunc = 32;

  void validate() const {
    if (!(eta > 0.0 && eta < 0.5)) throw ConfigError("eta must lie in (0, 1/2)");
    if (n_trunc < 1) throw ConfigError("truncation index must be >= 1");
  }
};

struct Example5Term {
  std::size_t n = 1;
  std::size_t m = 0;
  double ell = 1.0;
  GaussMap::Symbol digit = 1;  // floor(ell)
  double gamma = 1.0;
  double mu_a = 0.0;           // mu(a_digit)
  double sup_norm = 0.0;       // ell (1 - mu_a)
  double l2_norm = 0.0;        // ell sqrt(mu_a (1 - mu_a))
};

// floor(-log_r n^2) with r = 2/3; the nudge keeps exact powers on the right side.
inline std::size_t example5_level(std::size_t n) {
  if (n < 1) throw ConfigError("example index must be >= 1");
  const double v = 2.0 * std::log(static_cast<double>(n)) / std::log(1.5);
  return static_cast<std::size_t>(std::floor(v + 1e-12));
}

inline Example5Term example5_term(const Example5Spec& spec, std::size_t n) {
  spec.validate();
  Example5Term t;
  t.n = n;
  t.m = example5_level(n);
  t.ell = std::pow(1.5, static_cast<double>(t.m));
  t.digit = static_cast<GaussMap::Symbol>(std::floor(t.ell + 1e-12));
  t.gamma = std::pow(GaussMap::r(), (2.0 + spec.eta) * static_cast<double>(t.m));
  t.mu_a = GaussMap::cylinder_measure(t.digit);
  t.sup_norm = t.ell * (1.0 - t.mu_a);
  t.l2_norm = t.ell * std::sqrt(t.mu_a * (1.0 - t.mu_a));
  return t;
}

inline std::vector<Example5Term> example5_terms(const Example5Spec& spec, std::size_t upto) {
  std::vector<Example5Term> out;
  out.reserve(upto);
  for (std::size_t n = 1; n <= upto; ++n) out.push_back(example5_term(spec, n));
  return out;
}

// sum_{k=n+1}^{upto} gamma_k.
inline double example5_tail(const Example5Spec& spec, std::size_t n, std::size_t upto) {
  double s = 0.0;
  for (std::size_t k = upto; k > n; --k) s += std::pow(GaussMap::r(), (2.0 + spec.eta) * static_cast<double>(example5_level(k)));
  return s;
}

namespace detail {

// gamma_n depends on n only through m_n, so terms sharing a level collapse to
// one indicator with the summed coefficient.
struct Example5Level {
  std::size_t m;
  double lo, hi;  // digit(x) == k  <=>  lo < x <= hi
  double weight;  // (sum of gamma over the level) * ell
  double offset;  // weight * mu_a
};

inline std::vector<Example5Level> example5_levels(const Example5Spec& spec, std::size_t first, std::size_t last) {
  std::map<std::size_t, Example5Level> by_level;
  for (std::size_t n = first; n <= last; ++n) {
    const Example5Term t = example5_term(spec, n);
    auto [it, fresh] = by_level.try_emplace(t.m);
    auto& lv = it->second;
    if (fresh) {
      lv.m = t.m;
      lv.lo = 1.0 / (static_cast<double>(t.digit) + 1.0);
      lv.hi = 1.0 / static_cast<double>(t.digit);
      lv.weight = lv.offset = 0.0;
    }
    lv.weight += t.gamma * t.ell;
    lv.offset += t.gamma * t.ell * t.mu_a;
  }
  std::vector<Example5Level> out;
  for (auto& [m, lv] : by_level) out.push_back(lv);
  return out;
}

inline GaussObservable example5_observable(std::vector<Example5Level> levels, bool reduced, std::string name) {
  GaussObservable f;
  std::size_t window = 1;
  double lo = 0.0, hi = 0.0;
  for (const auto& lv : levels) {
    if (!reduced) window = std::max(window, lv.m + 1);
    lo -= lv.offset;
    hi += lv.weight - lv.offset;
  }
  f.eval = [levels = std::move(levels), reduced](std::span<const double> x) {
    double s = 0.0;
    for (const auto& lv : levels) {
      const double y = reduced ? x[0] : x[lv.m];
      s += (y > lv.lo && y <= lv.hi ? lv.weight : 0.0) - lv.offset;
    }
    return s;
  };
  f.window = window;
  f.mean = 0.0;
  f.centered = true;
  f.lower = lo;
  f.upper = hi;
  f.name = std::move(name);
  return f;
}

}  // namespace detail

// g_n alone (reduced = drop the T^{m_n} shift, same law and same asymptotic
// variance since h o T^m - h is a coboundary).
inline GaussObservable example5_g(const Example5Spec& spec, std::size_t n, bool reduced = false) {
  const Example5Term t = example5_term(spec, n);
  auto levels = detail::example5_levels(spec, n, n);
  levels[0].weight = t.ell;
  levels[0].offset = t.ell * t.mu_a;
  return detail::example5_observable(std::move(levels), reduced, "g_" + std::to_string(n));
}

// Partial sum f_N = sum_{n<=N} gamma_n g_n.
inline GaussObservable example5_partial(const Example5Spec& spec, std::size_t N, bool reduced = false) {
  if (N < 1) throw ConfigError("partial sum index must be >= 1");
  return detail::example5_observable(detail::example5_levels(spec, 1, N), reduced, "f_" + std::to_string(N));
}

// The truncated observable f = f_{N_trunc}.
inline GaussObservable build_example5(const GaussMap&, const Example5Spec& spec) {
  spec.validate();
  return example5_partial(spec, spec.n_trunc);
}

}  // namespace gmclt
