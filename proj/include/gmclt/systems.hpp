#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gmclt/error.hpp"
#include "gmclt/random.hpp"

namespace gmclt {

// Continued-fraction map T(x) = 1/x - floor(1/x) on (0,1) with the Gauss
// measure dmu = dx / ((1+x) ln 2). Symbol k = floor(1/x), so the partition
// element a_k is (1/(k+1), 1/k] and both 0.5 and T(0.4) = 0.5 carry digit 2.
class GaussMap {
 public:
  using State = double;
  using Symbol = std::int64_t;

  static constexpr const char* kind() { return "gauss"; }
  static constexpr double r() { return 2.0 / 3.0; }

  static void check(double x) {
    if (!(x > 0.0 && x < 1.0)) throw DomainError("Gauss map point must lie in (0,1), got " + std::to_string(x));
  }

  static double apply(double x) {
    check(x);
    const double inv = 1.0 / x;
    const double y = inv - std::floor(inv);
    if (y <= 0.0) throw DomainError("Gauss map orbit hit 0 (rational point)");
    return y;
  }

  static Symbol symbol(double x) {
    check(x);
    return static_cast<Symbol>(std::floor(1.0 / x));
  }

  // Inverse branch v_k(x) = 1/(k+x) onto a_k and its derivative magnitude.
  static double branch(Symbol k, double x) { return 1.0 / (static_cast<double>(k) + x); }
  static double branch_derivative(Symbol k, double x) {
    const double d = static_cast<double>(k) + x;
    return 1.0 / (d * d);
  }

  // Countably many branches over every point, one per digit.
  static std::size_t branch_count(double /*x*/, std::size_t k_max) { return k_max; }

  static double density(double x) { return 1.0 / ((1.0 + x) * std::numbers::ln2); }
  static double cdf(double x) { return std::log1p(x) / std::numbers::ln2; }
  // mu([a, b]) without cancellation.
  static double interval_measure(double a, double b) { return std::log1p((b - a) / (1.0 + a)) / std::numbers::ln2; }

  // F^{-1}(u) = 2^u - 1; u = 0 gives the excluded point 0.
  static double inverse_cdf(double u) { return std::expm1(u * std::numbers::ln2); }

  static double cylinder_measure(Symbol k) {
    if (k < 1) throw IndexError("Gauss digit must be >= 1, got " + std::to_string(k));
    const double kd = static_cast<double>(k);
    return std::log1p(1.0 / (kd * (kd + 2.0))) / std::numbers::ln2;
  }

  // mu of the union of a_k for k > K, i.e. mu((0, 1/(K+1)]).
  static double tail_measure(Symbol K) { return cdf(1.0 / (static_cast<double>(K) + 1.0)); }

  static double sample(CounterRng& rng) {
    for (;;) {
      const double x = inverse_cdf(rng.uniform());
      if (x > 0.0 && x < 1.0) return x;
    }
  }

  // Orbit x, Tx, ..., of length out.size() started from a mu-sample. If the
  // floating-point orbit lands on 0 the point is replaced by a fresh
  // mu-sample from the same stream; by invariance the statistics are unchanged.
  static void sample_orbit(CounterRng& rng, std::span<double> out) {
    if (out.empty()) return;
    double x = sample(rng);
    out[0] = x;
    for (std::size_t j = 1; j < out.size(); ++j) {
      const double inv = 1.0 / x;
      x = inv - std::floor(inv);
      if (!(x > 0.0)) x = sample(rng);
      out[j] = x;
    }
  }
};

// Finite-state stationary Markov shift. The phase point is the symbol stream
// itself, so an orbit is just a sampled path of the chain.
class MarkovShift {
 public:
  using State = std::int32_t;
  using Symbol = std::int32_t;

  MarkovShift(Eigen::MatrixXd P, std::vector<std::string> labels = {},
              std::optional<Eigen::VectorXd> pi = std::nullopt, double r = 0.5)
      : P_(std::move(P)), labels_(std::move(labels)), r_(r) {
    const auto S = P_.rows();
    if (S < 1 || P_.cols() != S) throw ConfigError("transition matrix must be square and non-empty");
    if (!(r_ > 0.0 && r_ < 1.0)) throw ConfigError("metric base r must lie in (0,1)");
    for (Eigen::Index i = 0; i < S; ++i) {
      for (Eigen::Index j = 0; j < S; ++j) {
        if (!(P_(i, j) >= 0.0) || !std::isfinite(P_(i, j))) throw ConfigError("transition matrix entries must be finite and nonnegative");
      }
      if (std::abs(P_.row(i).sum() - 1.0) > 1e-12) throw ConfigError("row " + std::to_string(i) + " of the transition matrix does not sum to 1");
    }
    if (labels_.empty()) {
      for (Eigen::Index i = 0; i < S; ++i) labels_.push_back(std::to_string(i));
    }
    if (static_cast<Eigen::Index>(labels_.size()) != S) throw ConfigError("labels must have one entry per state");

    if (pi) {
      pi_ = *pi;
      if (pi_.size() != S) throw ConfigError("stationary vector has the wrong length");
      if (std::abs(pi_.sum() - 1.0) > 1e-10 || (pi_.array() < 0.0).any()) throw ConfigError("stationary vector must be a probability vector");
    } else {
      pi_ = stationary(P_);
    }
    const double defect = (pi_.transpose() * P_ - pi_.transpose()).cwiseAbs().maxCoeff();
    if (defect > 1e-10) throw ConfigError("stationary vector fails pi P = pi (defect " + std::to_string(defect) + ")");

    cum_pi_.resize(static_cast<std::size_t>(S));
    cum_P_.resize(static_cast<std::size_t>(S * S));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < S; ++i) cum_pi_[static_cast<std::size_t>(i)] = (acc += pi_(i));
    for (Eigen::Index i = 0; i < S; ++i) {
      acc = 0.0;
      for (Eigen::Index j = 0; j < S; ++j) cum_P_[static_cast<std::size_t>(i * S + j)] = (acc += P_(i, j));
    }
  }

  // Unique solution of pi P = pi, sum pi = 1, via LU.
  static Eigen::VectorXd stationary(const Eigen::MatrixXd& P) {
    const auto S = P.rows();
    Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(S, S);
    A.row(S - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
    b(S - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw ConfigError("chain has no unique stationary vector");
    return lu.solve(b);
  }

  static constexpr const char* kind() { return "markov"; }
  double r() const { return r_; }
  std::size_t states() const { return static_cast<std::size_t>(P_.rows()); }
  const Eigen::MatrixXd& P() const { return P_; }
  const Eigen::VectorXd& pi() const { return pi_; }
  const std::vector<std::string>& labels() const { return labels_; }
  double transition(Symbol a, Symbol b) const { return P_(a, b); }

  Symbol symbol(State s) const {
    check(s);
    return s;
  }

  void check(Symbol s) const {
    if (s < 0 || static_cast<std::size_t>(s) >= states()) throw IndexError("invalid Markov state " + std::to_string(s));
  }

  double cylinder_measure(Symbol k) const {
    check(k);
    return pi_(k);
  }

  // mu of the cylinder [w_0 ... w_{d-1}].
  double word_measure(std::span<const Symbol> w) const {
    if (w.empty()) return 1.0;
    check(w[0]);
    double m = pi_(w[0]);
    for (std::size_t j = 1; j < w.size(); ++j) {
      check(w[j]);
      m *= P_(w[j - 1], w[j]);
    }
    return m;
  }

  // Shift: drops the first coordinate of a stream.
  static std::span<const State> apply(std::span<const State> stream) {
    if (stream.empty()) throw DomainError("cannot shift an empty symbol stream");
    return stream.subspan(1);
  }

  std::size_t branch_count(Symbol s) const {
    check(s);
    std::size_t c = 0;
    for (Eigen::Index a = 0; a < P_.rows(); ++a) c += P_(a, s) > 0.0 ? 1 : 0;
    return c;
  }

  State sample(CounterRng& rng) const { return draw(cum_pi_.data(), rng.uniform()); }

  void sample_orbit(CounterRng& rng, std::span<State> out) const {
    if (out.empty()) return;
    const std::size_t S = states();
    State s = sample(rng);
    out[0] = s;
    for (std::size_t j = 1; j < out.size(); ++j) {
      s = draw(cum_P_.data() + static_cast<std::size_t>(s) * S, rng.uniform());
      out[j] = s;
    }
  }

 private:
  State draw(const double* cum, double u) const {
    const std::size_t S = states();
    for (std::size_t j = 0; j + 1 < S; ++j) {
      if (u < cum[j]) return static_cast<State>(j);
    }
    return static_cast<State>(S - 1);
  }

  Eigen::MatrixXd P_;
  std::vector<std::string> labels_;
  Eigen::VectorXd pi_;
  double r_;
  std::vector<double> cum_pi_;
  std::vector<double> cum_P_;
};

using System = std::variant<GaussMap, MarkovShift>;

inline MarkovShift bernoulli_shift(double p = 0.5) {
  Eigen::MatrixXd P(2, 2);
  P << p, 1.0 - p, p, 1.0 - p;
  return MarkovShift(P, {"H", "T"});
}

// Symbols of x, Tx, ..., T^{d-1}x.
inline std::vector<GaussMap::Symbol> itinerary(const GaussMap&, double x, std::size_t depth) {
  if (depth == 0) throw ConfigError("itinerary depth must be >= 1");
  std::vector<GaussMap::Symbol> out;
  out.reserve(depth);
  for (std::size_t j = 0; j < depth; ++j) {
    out.push_back(GaussMap::symbol(x));
    if (j + 1 < depth) x = GaussMap::apply(x);
  }
  return out;
}

inline std::vector<MarkovShift::Symbol> itinerary(const MarkovShift& sys, std::span<const MarkovShift::State> x,
                                                  std::size_t depth) {
  if (depth == 0) throw ConfigError("itinerary depth must be >= 1");
  if (x.size() < depth) throw DomainError("symbol stream shorter than the requested depth");
  std::vector<MarkovShift::Symbol> out;
  for (std::size_t j = 0; j < depth; ++j) out.push_back(sys.symbol(x[j]));
  return out;
}

// s(x,y) = min{n+1 : T^n x and T^n y in different elements}, or 0 when the
// orbits agree through max_depth (read: not separated within the horizon).
template <class Sys>
std::size_t separation_time(const Sys& sys, std::span<const typename Sys::State> xs,
                            std::span<const typename Sys::State> ys, std::size_t max_depth) {
  const std::size_t depth = std::min({max_depth, xs.size(), ys.size()});
  for (std::size_t j = 0; j < depth; ++j) {
    if (sys.symbol(xs[j]) != sys.symbol(ys[j])) return j + 1;
  }
  return 0;
}

template <class Sys>
double separation_metric(const Sys& sys, std::span<const typename Sys::State> xs,
                         std::span<const typename Sys::State> ys, std::size_t max_depth) {
  if (max_depth == 0) throw ConfigError("max_depth must be >= 1");
  const std::size_t s = separation_time(sys, xs, ys, max_depth);
  return s == 0 ? 0.0 : std::pow(sys.r(), static_cast<double>(s));
}

inline double separation_metric(const GaussMap& sys, double x, double y, std::size_t max_depth) {
  if (max_depth == 0) throw ConfigError("max_depth must be >= 1");
  for (std::size_t j = 0; j < max_depth; ++j) {
    if (x == y) return 0.0;  // orbits coincide from here on
    if (GaussMap::symbol(x) != GaussMap::symbol(y)) return std::pow(sys.r(), static_cast<double>(j + 1));
    if (j + 1 < max_depth) {
      x = GaussMap::apply(x);
      y = GaussMap::apply(y);
    }
  }
  return 0.0;
}

// n i.i.d. draws from mu, draw i from stream i.
inline std::vector<double> sample_invariant(const GaussMap&, std::size_t n, std::uint64_t seed) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    out[i] = GaussMap::sample(rng);
  }
  return out;
}

inline std::vector<MarkovShift::State> sample_invariant(const MarkovShift& sys, std::size_t n, std::uint64_t seed) {
  std::vector<MarkovShift::State> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    out[i] = sys.sample(rng);
  }
  return out;
}

// Orbit of sample `index` under `seed`, length len.
template <class Sys>
std::vector<typename Sys::State> sample_orbit(const Sys& sys, std::size_t len, std::uint64_t seed, std::uint64_t index) {
  std::vector<typename Sys::State> out(len);
  CounterRng rng(seed, index);
  sys.sample_orbit(rng, std::span<typename Sys::State>(out));
  return out;
}

}  // namespace gmclt
