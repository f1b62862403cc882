#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gmclt/error.hpp"
#include "gmclt/observables.hpp"
#include "gmclt/parallel.hpp"
#include "gmclt/random.hpp"
#include "gmclt/stats.hpp"
#include "gmclt/systems.hpp"

namespace gmclt {

// Pointwise transfer operator with respect to mu on the Gauss map:
//   (Lf)(x) = sum_k w_k(x) f(1/(k+x)),  w_k(x) = (1+x) / ((k+x)(k+x+1)),
// weights summing to 1. Branches k > k_max are lumped into one term of mass
// (1+x)/(k_max+1+x) evaluated at the midpoint of their image.
template <class F>
double transfer_at(F&& f, double x, std::size_t k_max = 100000) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("transfer_at needs x in [0,1]");
  double s = 0.0;
  for (std::size_t k = k_max; k >= 1; --k) {
    const double kx = static_cast<double>(k) + x;
    s += (1.0 + x) / (kx * (kx + 1.0)) * f(1.0 / kx);
  }
  const double tail_start = static_cast<double>(k_max) + 1.0 + x;
  s += (1.0 + x) / tail_start * f(0.5 / tail_start);
  return s;
}

// Ulam discretization in mu-weighted form. J(i,j) = mu(cell_i ∩ T^{-1} cell_j),
// so M = diag(mu)^{-1} J is row-stochastic (conditional expectation of h o T)
// and the transfer operator on grid functions is (Lg)_j = (J^T g)_j / mu_j.
struct UlamGrid {
  std::string kind;           // "gauss" or "markov"
  std::size_t N = 0;
  std::size_t depth = 0;      // cylinder depth for the Markov shift
  std::size_t states = 0;
  Eigen::VectorXd mu;         // cell measures
  Eigen::MatrixXd J;

  std::size_t size() const { return N; }
  double h() const { return 1.0 / static_cast<double>(N); }

  void check(const Eigen::VectorXd& g) const {
    if (static_cast<std::size_t>(g.size()) != N)
      throw GridMismatch("grid function has " + std::to_string(g.size()) + " values, grid has " + std::to_string(N));
  }

  double integrate(const Eigen::VectorXd& g) const {
    check(g);
    return mu.dot(g);
  }
};

// Exact interval arithmetic: every entry is a closed-form mu-measure.
inline UlamGrid build_ulam_grid(const GaussMap&, std::size_t N, unsigned workers = 1) {
  if (N < 8) throw ConfigError("Gauss Ulam grid needs N >= 8");
  UlamGrid g;
  g.kind = "gauss";
  g.N = N;
  g.mu.resize(static_cast<Eigen::Index>(N));
  g.J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  const double h = 1.0 / static_cast<double>(N);
  const double Nd = static_cast<double>(N);
  constexpr double inv_ln2 = 1.0 / std::numbers::ln2;

  parallel_for(N, workers, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double a = static_cast<double>(i) * h;
    const double b = static_cast<double>(i + 1) * h;
    g.mu(ii) = GaussMap::interval_measure(a, b);
    if (i == 0) {
      // Every branch k >= N lies inside [0, 1/N]; the sum over k telescopes.
      for (std::size_t j = 0; j < N; ++j) {
        const double c = static_cast<double>(j) * h;
        const double d = static_cast<double>(j + 1) * h;
        g.J(0, static_cast<Eigen::Index>(j)) = std::log1p((d - c) / (Nd + c)) * inv_ln2;
      }
      return;
    }
    const auto k_lo = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(1.0 / b)));
    const auto k_hi = static_cast<std::int64_t>(std::floor(1.0 / a));
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
      const double kd = static_cast<double>(k);
      const double xa = std::max(a, 1.0 / (kd + 1.0));
      const double xb = std::min(b, 1.0 / kd);
      if (!(xb > xa)) continue;
      const double y_lo = std::max(0.0, 1.0 / xb - kd);
      const double y_hi = std::min(1.0, 1.0 / xa - kd);
      if (!(y_hi > y_lo)) continue;
      const auto j_lo = static_cast<std::size_t>(std::floor(y_lo * Nd));
      const auto j_hi = std::min(N - 1, static_cast<std::size_t>(std::ceil(y_hi * Nd)) - 1);
      for (std::size_t j = j_lo; j <= j_hi && j < N; ++j) {
        const double y1 = std::max(static_cast<double>(j) * h, y_lo);
        const double y2 = std::min(static_cast<double>(j + 1) * h, y_hi);
        if (!(y2 > y1)) continue;
        g.J(ii, static_cast<Eigen::Index>(j)) += std::log1p((y2 - y1) / ((kd + y1) * (kd + y2 + 1.0))) * inv_ln2;
      }
    }
  });
  return g;
}

// Cylinder grid of depth d: cell index = sum_j w_j S^{d-1-j}. Exact for
// Markov measures: T[w] meets [w'] iff w' = (w_1..w_{d-1}, s).
inline UlamGrid build_ulam_grid(const MarkovShift& sys, std::size_t N, unsigned = 1) {
  const std::size_t S = sys.states();
  std::size_t depth = 0, cells = 1;
  while (cells < N) {
    cells *= S;
    ++depth;
    if (S < 2) break;
  }
  if (cells != N || N < 2) throw ConfigError("Markov Ulam resolution must be a power of the state count (>= 2), got " + std::to_string(N));
  if (N > 4096) throw ConfigError("Markov Ulam resolution above 4096 is not supported");
  UlamGrid g;
  g.kind = "markov";
  g.N = N;
  g.depth = depth;
  g.states = S;
  g.mu.resize(static_cast<Eigen::Index>(N));
  g.J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  std::vector<MarkovShift::Symbol> w(depth);
  for (std::size_t idx = 0; idx < N; ++idx) {
    std::size_t rest = idx;
    for (std::size_t j = depth; j-- > 0;) {
      w[j] = static_cast<MarkovShift::Symbol>(rest % S);
      rest /= S;
    }
    const double m = sys.word_measure(w);
    g.mu(static_cast<Eigen::Index>(idx)) = m;
    const std::size_t shifted = (idx * S) % N;
    for (std::size_t s = 0; s < S; ++s) {
      g.J(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(shifted + s)) =
          m * sys.transition(w[depth - 1], static_cast<MarkovShift::Symbol>(s));
    }
  }
  return g;
}

inline Eigen::VectorXd apply_transfer(const UlamGrid& g, const Eigen::VectorXd& f) {
  g.check(f);
  Eigen::VectorXd out = g.J.transpose() * f;
  for (Eigen::Index j = 0; j < out.size(); ++j) out(j) = g.mu(j) > 0.0 ? out(j) / g.mu(j) : 0.0;
  return out;
}

// (Mh)_i = E[h o T | cell_i].
inline Eigen::VectorXd apply_koopman(const UlamGrid& g, const Eigen::VectorXd& h) {
  g.check(h);
  Eigen::VectorXd out = g.J * h;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = g.mu(i) > 0.0 ? out(i) / g.mu(i) : 0.0;
  return out;
}

inline Eigen::MatrixXd stochastic_matrix(const UlamGrid& g) {
  Eigen::MatrixXd M = g.J;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    if (g.mu(i) > 0.0) M.row(i) /= g.mu(i);
  }
  return M;
}

// (row, col, value) triples of M, zeros skipped.
inline void write_ulam_csv(std::ostream& os, const UlamGrid& g) {
  const Eigen::MatrixXd M = stochastic_matrix(g);
  os << "row,col,value\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      if (M(i, j) != 0.0) os << i << ',' << j << ',' << M(i, j) << '\n';
}

// --- Projection of observables onto a grid ---

// Cell averages (1/mu_i) int_cell f dmu with 64-point Gauss-Legendre per cell.
inline Eigen::VectorXd project(const GaussMap&, const UlamGrid& g, const GaussObservable& f,
                               std::size_t order = 64) {
  if (g.kind != "gauss") throw GridMismatch("Gauss observable on a non-Gauss grid");
  const QuadratureRule rule = gauss_legendre(order);
  const double h = g.h();
  Eigen::VectorXd out(static_cast<Eigen::Index>(g.N));
  std::vector<double> orbit(f.window);
  for (std::size_t i = 0; i < g.N; ++i) {
    const double mid = (static_cast<double>(i) + 0.5) * h;
    double num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < order; ++q) {
      double x = mid + 0.5 * h * rule.nodes[q];
      for (std::size_t j = 0; j < f.window; ++j) {
        orbit[j] = x;
        if (j + 1 < f.window) x = GaussMap::apply(x);
      }
      const double w = rule.weights[q] * GaussMap::density(orbit[0]);
      num += w * f(orbit);
      den += w;
    }
    out(static_cast<Eigen::Index>(i)) = num / den;
  }
  // A centered f has mean exactly 0; what's left is quadrature error at
  // discontinuities inside cells (indicators), so drop it.
  if (f.centered) out.array() -= g.integrate(out);
  return out;
}

// Conditional expectation given the first `depth` symbols; exact.
inline Eigen::VectorXd project(const MarkovShift& sys, const UlamGrid& g, const MarkovObservable& f) {
  if (g.kind != "markov" || g.states != sys.states()) throw GridMismatch("Markov observable on a foreign grid");
  const std::size_t S = sys.states();
  const std::size_t d = g.depth;
  const std::size_t len = std::max(d, f.window);
  Eigen::VectorXd out(static_cast<Eigen::Index>(g.N));
  std::vector<MarkovShift::State> word(len);
  for (std::size_t idx = 0; idx < g.N; ++idx) {
    std::size_t rest = idx;
    for (std::size_t j = d; j-- > 0;) {
      word[j] = static_cast<MarkovShift::State>(rest % S);
      rest /= S;
    }
    if (len == d) {
      out(static_cast<Eigen::Index>(idx)) = f(word);
      continue;
    }
    // Average over continuations of length len - d weighted by the chain.
    double acc = 0.0;
    std::vector<std::size_t> ext(len - d, 0);
    for (;;) {
      double p = 1.0;
      for (std::size_t j = d; j < len; ++j) {
        word[j] = static_cast<MarkovShift::State>(ext[j - d]);
        p *= sys.transition(word[j - 1], word[j]);
      }
      if (p > 0.0) acc += p * f(word);
      std::size_t pos = ext.size();
      bool done = true;
      while (pos > 0) {
        --pos;
        if (++ext[pos] < S) {
          done = false;
          break;
        }
        ext[pos] = 0;
      }
      if (done) break;
    }
    out(static_cast<Eigen::Index>(idx)) = acc;
  }
  return out;
}

// --- Spectrum ---

struct SpectralReport {
  std::size_t resolution = 0;
  double lambda1 = 0.0;                    // modulus of the leading eigenvalue
  double rho = 0.0;                        // modulus of the second eigenvalue
  std::complex<double> lambda2{0.0, 0.0};
  std::vector<std::complex<double>> leading;  // up to 8 eigenvalues by modulus
  std::size_t power_iterations = 0;
  double residual = 0.0;                   // sup |L v - v| for the power-iterated density
};

inline SpectralReport spectral_report(const UlamGrid& g, std::size_t max_iter = 20000, double tol = 1e-12) {
  SpectralReport rep;
  rep.resolution = g.N;
  const Eigen::MatrixXd M = stochastic_matrix(g);
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  if (es.info() != Eigen::Success) throw ConvergenceError("eigensolver failed on the Ulam matrix");
  std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::stable_sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a) > std::abs(b); });
  rep.lambda1 = std::abs(ev[0]);
  if (ev.size() > 1) {
    rep.lambda2 = ev[1];
    rep.rho = std::abs(ev[1]);
  }
  rep.leading.assign(ev.begin(), ev.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(8, ev.size())));

  // Power iteration on a perturbed density; it must settle on L1 = 1.
  Eigen::VectorXd v(static_cast<Eigen::Index>(g.N));
  for (std::size_t i = 0; i < g.N; ++i) v(static_cast<Eigen::Index>(i)) = 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(g.N));
  v /= g.integrate(v);
  double res = 0.0;
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    const Eigen::VectorXd w = apply_transfer(g, v);
    res = (w - v).cwiseAbs().maxCoeff();
    v = w;
    if (res < tol) break;
  }
  rep.power_iterations = it + 1;
  rep.residual = res;
  if (res > 1e-8) throw ConvergenceError("power iteration residual " + std::to_string(res) + " above 1e-8");
  return rep;
}

template <class Sys>
SpectralReport build_ulam(const Sys& sys, std::size_t N, UlamGrid* grid_out = nullptr, unsigned workers = 1) {
  UlamGrid g = build_ulam_grid(sys, N, workers);
  SpectralReport rep = spectral_report(g);
  if (grid_out) *grid_out = std::move(g);
  return rep;
}

// --- Twisted operator L_{f,t} g = L(e^{itf} g) ---

struct TwistedResult {
  std::complex<double> lambda{1.0, 0.0};
  std::size_t iterations = 0;
  double residual = 0.0;
};

inline TwistedResult twisted_eigenvalue(const UlamGrid& g, const Eigen::VectorXd& f, double t,
                                        double smallness = 0.5, std::size_t max_iter = 20000, double tol = 1e-14) {
  g.check(f);
  const double sup = f.cwiseAbs().maxCoeff();
  if (std::abs(t) * sup > smallness)
    throw SmallnessViolation("|t| * ||f|| = " + std::to_string(std::abs(t) * sup) + " exceeds " + std::to_string(smallness));
  const auto n = static_cast<Eigen::Index>(g.N);
  Eigen::VectorXd c(n), s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i) = std::cos(t * f(i));
    s(i) = std::sin(t * f(i));
  }
  // v = vr + i vi with integral 1.
  Eigen::VectorXd vr = Eigen::VectorXd::Ones(n), vi = Eigen::VectorXd::Zero(n);
  TwistedResult out;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd ur = c.cwiseProduct(vr) - s.cwiseProduct(vi);
    const Eigen::VectorXd ui = s.cwiseProduct(vr) + c.cwiseProduct(vi);
    const Eigen::VectorXd wr = apply_transfer(g, ur);
    const Eigen::VectorXd wi = apply_transfer(g, ui);
    const double lr = g.integrate(wr);
    const double li = g.integrate(wi);
    // Residual |w - lambda v| and the update v = w / lambda; the division is
    // written out so that t -> -t conjugates every step exactly.
    const double den = lr * lr + li * li;
    if (!(den > 0.0)) throw ConvergenceError("twisted eigenvalue vanished");
    double res = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double er = wr(i) - (lr * vr(i) - li * vi(i));
      const double ei = wi(i) - (lr * vi(i) + li * vr(i));
      res = std::max(res, std::hypot(er, ei));
      const double nr = (wr(i) * lr + wi(i) * li) / den;
      const double ni = (wi(i) * lr - wr(i) * li) / den;
      vr(i) = nr;
      vi(i) = ni;
    }
    out.lambda = {lr, li};
    out.iterations = it + 1;
    out.residual = res;
    if (res <= tol * std::sqrt(den)) return out;
  }
  if (out.residual > 1e-8) throw ConvergenceError("twisted power iteration did not converge");
  return out;
}

// --- Asymptotic variance ---

struct GreenKuboResult {
  double sigma2 = 0.0;
  double raw = 0.0;        // before clipping
  std::size_t lags = 0;
  bool clipped = false;
};

// int f^2 + 2 sum_k <L^k f, f>, stopping after two consecutive terms below
// `term_tol` or at `cap` lags.
inline GreenKuboResult variance_green_kubo(const UlamGrid& g, const Eigen::VectorXd& f, std::size_t cap = 10000,
                                           double term_tol = 1e-10) {
  g.check(f);
  if (cap < 1) throw ConfigError("Green-Kubo lag cap must be >= 1");
  const double mean = g.integrate(f);
  if (std::abs(mean) > 1e-8) throw NotCentered("observable mean on the grid is " + std::to_string(mean));
  GreenKuboResult out;
  double total = g.integrate(f.cwiseProduct(f));
  Eigen::VectorXd v = f;
  int small = 0;
  std::size_t k = 1;
  for (; k <= cap; ++k) {
    v = apply_transfer(g, v);
    const double term = g.integrate(v.cwiseProduct(f));
    total += 2.0 * term;
    small = std::abs(term) < term_tol ? small + 1 : 0;
    if (small >= 2) break;
  }
  out.lags = std::min(k, cap);
  out.raw = total;
  out.clipped = total < 0.0;
  out.sigma2 = std::max(0.0, total);
  return out;
}

struct SpectralVarianceResult {
  double sigma2 = 0.0;
  double coarse = 0.0;  // 2(1 - Re lambda(t0)) / t0^2 before extrapolation
  double t0 = 1e-2;
};

// 2(1 - Re lambda_{f,t}) / t^2, Richardson-extrapolated over {t0, t0/2}.
inline SpectralVarianceResult variance_spectral(const UlamGrid& g, const Eigen::VectorXd& f, double t0 = 1e-2,
                                                double smallness = 0.5) {
  if (!(t0 > 0.0)) throw ConfigError("eigencurve step must be positive");
  const double mean = g.integrate(f);
  if (std::abs(mean) > 1e-8) throw NotCentered("observable mean on the grid is " + std::to_string(mean));
  auto curvature = [&](double t) {
    const TwistedResult r = twisted_eigenvalue(g, f, t, smallness);
    return 2.0 * (1.0 - r.lambda.real()) / (t * t);
  };
  SpectralVarianceResult out;
  out.t0 = t0;
  out.coarse = curvature(t0);
  const double fine = curvature(0.5 * t0);
  out.sigma2 = (4.0 * fine - out.coarse) / 3.0;
  return out;
}

// Birkhoff sums S_n = sum_{j<n} f(T^j x) over mu-samples; sample i uses stream i.
template <class Sys>
std::vector<double> birkhoff_sums(const Sys& sys, const Observable<Sys>& f, std::size_t n, std::size_t n_samples,
                                  std::uint64_t seed, unsigned workers = 1) {
  if (n < 1) throw ConfigError("Birkhoff length must be >= 1");
  std::vector<double> out(n_samples);
  parallel_chunks(n_samples, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<typename Sys::State> orbit(n + f.window - 1);
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(seed, i);
      sys.sample_orbit(rng, std::span<typename Sys::State>(orbit));
      const std::span<const typename Sys::State> o(orbit);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += f(o.subspan(j, f.window));
      out[i] = s;
    }
  });
  return out;
}

struct MonteCarloVariance {
  double sigma2 = 0.0;
  double standard_error = 0.0;
  std::size_t n = 0;
  std::size_t samples = 0;
};

template <class Sys>
MonteCarloVariance variance_monte_carlo(const Sys& sys, const Observable<Sys>& f, std::size_t n,
                                        std::size_t n_samples, std::uint64_t seed, unsigned workers = 1) {
  if (n_samples < 2) throw EmptySample("Monte Carlo variance needs at least two samples");
  const std::vector<double> sums = birkhoff_sums(sys, f, n, n_samples, seed, workers);
  MonteCarloVariance out;
  out.n = n;
  out.samples = n_samples;
  out.sigma2 = moments(sums).variance / static_cast<double>(n);
  out.standard_error = variance_standard_error(sums) / static_cast<double>(n);
  return out;
}

struct VarianceEstimate {
  double sigma2_green_kubo = 0.0;
  double sigma2_spectral = 0.0;
  double sigma2_monte_carlo = 0.0;
  double monte_carlo_se = 0.0;
  std::size_t lag = 0;
  double t0 = 1e-2;
  bool clipped = false;
  double variance_of_f = 0.0;  // int f^2 on the grid
};

struct VarianceOptions {
  std::size_t resolution = 512;
  std::size_t gk_cap = 10000;
  double t0 = 1e-2;
  std::size_t mc_length = 1000;
  std::size_t mc_samples = 10000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

template <class Sys>
VarianceEstimate estimate_variance(const Sys& sys, const Observable<Sys>& f_in, const VarianceOptions& opt,
                                   const UlamGrid* grid = nullptr) {
  const Observable<Sys> f = center(sys, f_in);
  UlamGrid local;
  if (!grid) {
    local = build_ulam_grid(sys, opt.resolution, opt.workers);
    grid = &local;
  }
  const Eigen::VectorXd fv = project(sys, *grid, f);
  VarianceEstimate out;
  const GreenKuboResult gk = variance_green_kubo(*grid, fv, opt.gk_cap);
  out.sigma2_green_kubo = gk.sigma2;
  out.lag = gk.lags;
  out.clipped = gk.clipped;
  const SpectralVarianceResult sp = variance_spectral(*grid, fv, opt.t0);
  out.sigma2_spectral = sp.sigma2;
  out.t0 = opt.t0;
  const MonteCarloVariance mc = variance_monte_carlo(sys, f, opt.mc_length, opt.mc_samples, opt.seed, opt.workers);
  out.sigma2_monte_carlo = mc.sigma2;
  out.monte_carlo_se = mc.standard_error;
  out.variance_of_f = grid->integrate(fv.cwiseProduct(fv));
  return out;
}

}  // namespace gmclt
