#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gmclt/error.hpp"
#include "gmclt/random.hpp"
#include "gmclt/stats.hpp"
#include "gmclt/systems.hpp"

namespace gmclt {

// Real function on the phase space. The evaluator reads the orbit window
// x, Tx, ..., T^{window-1}x, so f o T^j is evaluated on orbit.subspan(j).
template <class Sys>
struct Observable {
  using State = typename Sys::State;
  using Fn = std::function<double(std::span<const State>)>;

  Fn eval;
  std::size_t window = 1;
  std::string name;
  std::optional<double> mean;  // cached integral against mu
  bool centered = false;
  // Bounds on the range; sup_norm() is derived from them.
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  std::map<std::size_t, double> holder_estimates;  // depth -> sampled lower bound on D

  double operator()(std::span<const State> orbit) const { return eval(orbit); }
  double sup_norm() const { return std::max(std::abs(lower), std::abs(upper)); }
};

using GaussObservable = Observable<GaussMap>;
using MarkovObservable = Observable<MarkovShift>;

// Integral of a window-1 Gauss observable: composite Gauss-Legendre on each
// branch interval [1/(k+1), 1/k], so digit-dependent jumps sit on breakpoints.
inline double gauss_integral(const std::function<double(double)>& f) {
  static const QuadratureRule fine = gauss_legendre(32);
  static const QuadratureRule coarse = gauss_legendre(8);
  auto weighted = [&](double x) { return f(x) * GaussMap::density(x); };
  double total = 0.0;
  constexpr int kFine = 256, kCoarse = 8192;
  for (int k = 1; k <= kCoarse; ++k) {
    const double a = 1.0 / (k + 1.0), b = 1.0 / k;
    total += integrate(weighted, a, b, 1, k <= kFine ? fine : coarse);
  }
  total += integrate(weighted, 0.0, 1.0 / (kCoarse + 1.0), 1, fine);
  return total;
}

// Exact average over all words of length `window` (S^window terms).
inline double markov_integral(const MarkovShift& sys, const MarkovObservable& f) {
  const std::size_t S = sys.states();
  const std::size_t w = f.window;
  if (w == 0) throw ConfigError("observable window must be >= 1");
  double words = 1.0;
  for (std::size_t j = 0; j < w; ++j) words *= static_cast<double>(S);
  if (words > 4e6) throw ConfigError("observable window too long for exact Markov averaging");
  std::vector<MarkovShift::State> word(w, 0);
  double total = 0.0;
  for (;;) {
    const double m = sys.word_measure(word);
    if (m > 0.0) total += m * f(word);
    std::size_t p = w;
    while (p > 0) {
      --p;
      if (++word[p] < static_cast<MarkovShift::State>(S)) break;
      word[p] = 0;
      if (p == 0) return total;
    }
  }
}

inline double integral(const GaussMap&, const GaussObservable& f) {
  if (f.mean) return *f.mean;
  // T is smooth on each branch interval, so a function of (x, Tx) still has
  // its jumps on the quadrature breakpoints; deeper windows would not.
  if (f.window > 2) throw ConfigError("observable '" + f.name + "' reads more than two orbit points and carries no mean");
  if (f.window == 2)
    return gauss_integral([&](double x) {
      const double o[2] = {x, GaussMap::apply(x)};
      return f(std::span<const double>(o, 2));
    });
  return gauss_integral([&](double x) { return f(std::span<const double>(&x, 1)); });
}

inline double integral(const MarkovShift& sys, const MarkovObservable& f) {
  if (f.mean) return *f.mean;
  return markov_integral(sys, f);
}

// f - int f dmu. Idempotent: an already centered observable comes back as is.
template <class Sys>
Observable<Sys> center(const Sys& sys, const Observable<Sys>& f) {
  if (f.centered) return f;
  const double m = integral(sys, f);
  Observable<Sys> g = f;
  g.eval = [inner = f.eval, m](std::span<const typename Sys::State> x) { return inner(x) - m; };
  g.mean = 0.0;
  g.centered = true;
  g.lower = f.lower - m;
  g.upper = f.upper - m;
  g.name = f.name;
  return g;
}

template <class Sys>
Observable<Sys> constant_observable(double c) {
  Observable<Sys> f;
  f.eval = [c](std::span<const typename Sys::State>) { return c; };
  f.name = "const:" + std::to_string(c);
  f.mean = c;
  f.lower = f.upper = c;
  return f;
}

// --- Gauss map observables ---

inline GaussObservable gauss_identity() {
  GaussObservable f;
  f.eval = [](std::span<const double> x) { return x[0]; };
  f.name = "identity";
  f.mean = 1.0 / std::numbers::ln2 - 1.0;
  f.lower = 0.0;
  f.upper = 1.0;
  return f;
}

inline GaussObservable gauss_shift(double c) {
  GaussObservable f;
  f.eval = [c](std::span<const double> x) { return x[0] + c; };
  f.name = "shift:" + std::to_string(c);
  f.mean = 1.0 / std::numbers::ln2 - 1.0 + c;
  f.lower = c;
  f.upper = 1.0 + c;
  return f;
}

// 1 on a_k, i.e. first digit equal to k.
inline GaussObservable gauss_indicator(GaussMap::Symbol k) {
  const double m = GaussMap::cylinder_measure(k);
  GaussObservable f;
  f.eval = [k](std::span<const double> x) { return GaussMap::symbol(x[0]) == k ? 1.0 : 0.0; };
  f.name = "indicator:" + std::to_string(k);
  f.mean = m;
  f.lower = 0.0;
  f.upper = 1.0;
  return f;
}

// --- Markov shift observables ---

// 1 when the current state is k.
inline MarkovObservable markov_indicator(const MarkovShift& sys, MarkovShift::State k) {
  sys.check(k);
  MarkovObservable f;
  f.eval = [k](std::span<const MarkovShift::State> x) { return x[0] == k ? 1.0 : 0.0; };
  f.name = "indicator:" + std::to_string(k);
  f.mean = sys.pi()(k);
  f.lower = 0.0;
  f.upper = 1.0;
  return f;
}

// Centered fair-coin observable 1_{[0]} - 1/2 (any two-state chain).
inline MarkovObservable markov_coin(const MarkovShift& sys) {
  MarkovObservable f = center(sys, markov_indicator(sys, 0));
  f.name = "coin";
  return f;
}

// phi(x_0) for a state function phi.
inline MarkovObservable markov_state_function(const MarkovShift& sys, std::vector<double> phi, std::string name) {
  if (phi.size() != sys.states()) throw ConfigError("state function needs one value per state");
  MarkovObservable f;
  f.lower = *std::min_element(phi.begin(), phi.end());
  f.upper = *std::max_element(phi.begin(), phi.end());
  double m = 0.0;
  for (std::size_t s = 0; s < phi.size(); ++s) m += sys.pi()(static_cast<Eigen::Index>(s)) * phi[s];
  f.mean = m;
  f.eval = [phi = std::move(phi)](std::span<const MarkovShift::State> x) { return phi[static_cast<std::size_t>(x[0])]; };
  f.name = std::move(name);
  return f;
}

// Coboundary phi o T - phi for a state function phi; reads two coordinates.
inline MarkovObservable markov_coboundary(const MarkovShift& sys, std::vector<double> phi) {
  if (phi.size() != sys.states()) throw ConfigError("state function needs one value per state");
  MarkovObservable f;
  const double spread = *std::max_element(phi.begin(), phi.end()) - *std::min_element(phi.begin(), phi.end());
  f.lower = -spread;
  f.upper = spread;
  f.eval = [phi = std::move(phi)](std::span<const MarkovShift::State> x) {
    return phi[static_cast<std::size_t>(x[1])] - phi[static_cast<std::size_t>(x[0])];
  };
  f.window = 2;
  f.mean = 0.0;
  f.centered = true;
  f.name = "coboundary";
  return f;
}

// --- Hölder constant estimation ---

namespace detail {

// A point given by its first H symbols plus, for the Gauss map, the tail
// point T^H x. The orbit is rebuilt from the digits backwards.
template <class Sys>
struct CodedPoint {
  std::vector<typename Sys::Symbol> digits;
  double tail = 0.5;
};

inline void rebuild(const GaussMap&, const CodedPoint<GaussMap>& p, std::vector<double>& orbit) {
  const std::size_t H = p.digits.size();
  orbit.resize(H);
  double y = p.tail;
  for (std::size_t j = H; j-- > 0;) {
    y = 1.0 / (static_cast<double>(p.digits[j]) + y);
    orbit[j] = y;
  }
}

inline void rebuild(const MarkovShift&, const CodedPoint<MarkovShift>& p, std::vector<MarkovShift::State>& orbit) {
  orbit.assign(p.digits.begin(), p.digits.end());
}

// Random mu-distributed coded point, symbols from position `from` onward
// drawn afresh (earlier symbols kept). For the Markov shift the fresh part
// continues the chain from the symbol at from-1.
inline void draw_tail(const GaussMap&, CodedPoint<GaussMap>& p, std::size_t from, CounterRng& rng) {
  double x = GaussMap::sample(rng);
  for (std::size_t j = from; j < p.digits.size(); ++j) {
    p.digits[j] = static_cast<GaussMap::Symbol>(std::floor(1.0 / x));
    const double inv = 1.0 / x;
    x = inv - std::floor(inv);
    if (!(x > 0.0)) x = GaussMap::sample(rng);
  }
  p.tail = x;
}

inline void draw_tail(const MarkovShift& sys, CodedPoint<MarkovShift>& p, std::size_t from, CounterRng& rng) {
  const std::size_t H = p.digits.size();
  if (from >= H) return;
  if (from == 0) {
    sys.sample_orbit(rng, std::span<MarkovShift::State>(p.digits));
    return;
  }
  MarkovShift::State s = p.digits[from - 1];
  for (std::size_t j = from; j < H; ++j) {
    const double u = rng.uniform();
    double acc = 0.0;
    auto next = static_cast<MarkovShift::State>(sys.states() - 1);
    for (std::size_t c = 0; c + 1 < sys.states(); ++c) {
      acc += sys.transition(s, static_cast<MarkovShift::State>(c));
      if (u < acc) {
        next = static_cast<MarkovShift::State>(c);
        break;
      }
    }
    p.digits[j] = s = next;
  }
}

inline std::vector<GaussMap::Symbol> candidates(const GaussMap&, const CodedPoint<GaussMap>&, std::size_t) {
  std::vector<GaussMap::Symbol> out(1024);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = static_cast<GaussMap::Symbol>(c + 1);
  return out;
}

// Admissible replacements for the symbol at position p.
inline std::vector<MarkovShift::Symbol> candidates(const MarkovShift& sys, const CodedPoint<MarkovShift>& pt,
                                                   std::size_t p) {
  std::vector<MarkovShift::Symbol> out;
  for (std::size_t c = 0; c < sys.states(); ++c) {
    const auto s = static_cast<MarkovShift::Symbol>(c);
    if (p > 0 && sys.transition(pt.digits[p - 1], s) <= 0.0) continue;
    if (p + 1 < pt.digits.size() && sys.transition(s, pt.digits[p + 1]) <= 0.0) continue;
    out.push_back(s);
  }
  return out;
}

}  // namespace detail

// Sampled lower bound on sup |f(x) - f(y)| / r(x,y) over pairs in a common
// depth-d cylinder. Pairs share their first d symbols and have independent
// mu-typical continuations; the best pairs are then pushed uphill by
// coordinate ascent over the symbols at positions >= d, keeping the symbols
// at position d distinct so that r(x,y) = r^{d+1} stays fixed.
template <class Sys>
double holder_constant(const Sys& sys, const Observable<Sys>& f, std::size_t depth, std::size_t n_pairs,
                       std::uint64_t seed, std::size_t refine_top = 16) {
  if (depth == 0) throw ConfigError("holder_constant depth must be >= 1");
  using Point = detail::CodedPoint<Sys>;
  const std::size_t H = std::max(f.window, depth + 1) + 4;
  const double r = sys.r();

  std::vector<typename Sys::State> ox, oy;
  auto ratio = [&](const Point& x, const Point& y) {
    std::size_t s = 0;
    for (std::size_t j = 0; j < H; ++j) {
      if (x.digits[j] != y.digits[j]) {
        s = j + 1;
        break;
      }
    }
    if (s == 0) return 0.0;
    detail::rebuild(sys, x, ox);
    detail::rebuild(sys, y, oy);
    const double diff = std::abs(f(ox) - f(oy));
    return diff / std::pow(r, static_cast<double>(s));
  };

  struct Pair {
    Point x, y;
    double value;
  };
  std::vector<Pair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    CounterRng rng(seed, i);
    Point x, y;
    x.digits.resize(H);
    detail::draw_tail(sys, x, 0, rng);
    y = x;
    detail::draw_tail(sys, y, depth, rng);
    pairs.push_back({x, y, ratio(x, y)});
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.value > b.value; });

  double best = pairs.empty() ? 0.0 : pairs.front().value;
  const std::size_t top = std::min(refine_top, pairs.size());
  for (std::size_t t = 0; t < top; ++t) {
    Pair p = pairs[t];
    // Force a split at position `depth` so the metric is pinned at r^{d+1}.
    if (p.x.digits[depth] == p.y.digits[depth]) {
      for (auto c : detail::candidates(sys, p.y, depth)) {
        if (c != p.x.digits[depth]) {
          p.y.digits[depth] = c;
          break;
        }
      }
      p.value = ratio(p.x, p.y);
    }
    for (int round = 0; round < 3; ++round) {
      bool improved = false;
      for (std::size_t pos = depth; pos < H; ++pos) {
        for (int side = 0; side < 2; ++side) {
          Point& moving = side == 0 ? p.x : p.y;
          const Point& other = side == 0 ? p.y : p.x;
          const auto original = moving.digits[pos];
          auto best_digit = original;
          for (auto c : detail::candidates(sys, moving, pos)) {
            if (pos == depth && c == other.digits[pos]) continue;
            moving.digits[pos] = c;
            const double v = ratio(p.x, p.y);
            if (v > p.value) {
              p.value = v;
              best_digit = c;
              improved = true;
            }
          }
          moving.digits[pos] = best_digit;
        }
      }
      if (!improved) break;
    }
    best = std::max(best, p.value);
  }
  return best;
}

}  // namespace gmclt
