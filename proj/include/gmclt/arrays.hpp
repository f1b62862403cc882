#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
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

// F = f + f o T + ... + f o T^{length-1}, launched at time tau.
struct Block {
  std::size_t tau = 0;
  std::size_t length = 0;
};

template <class Sys>
struct DynamicalArrayRow {
  std::size_t n = 0;            // row index
  std::vector<Block> blocks;
  Observable<Sys> f;
  std::size_t spacing = 0;      // min_i (tau_i - tau_{i-1} - l_{i-1}); 0 for a single block
  double s_check = 0.0;         // filled by estimate_s_check

  std::size_t k() const { return blocks.size(); }
  std::size_t horizon() const {
    std::size_t end = 0;
    for (const auto& b : blocks) end = std::max(end, b.tau + b.length);
    return end;
  }
};

// Validates non-overlap and computes the minimal spacing.
template <class Sys>
DynamicalArrayRow<Sys> make_row(std::size_t n, std::vector<Block> blocks, Observable<Sys> f) {
  DynamicalArrayRow<Sys> row;
  row.n = n;
  row.f = std::move(f);
  std::size_t spacing = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    const std::size_t prev_end = blocks[i - 1].tau + blocks[i - 1].length;
    if (blocks[i].tau < prev_end) throw ConfigError("blocks " + std::to_string(i - 1) + " and " + std::to_string(i) + " overlap");
    spacing = std::min(spacing, blocks[i].tau - prev_end);
  }
  row.spacing = blocks.size() > 1 ? spacing : 0;
  row.blocks = std::move(blocks);
  return row;
}

// Values F_i(T^{tau_i} x) of every block along one orbit.
template <class Sys>
void block_values(const DynamicalArrayRow<Sys>& row, std::span<const typename Sys::State> orbit, std::span<double> out) {
  const std::size_t w = row.f.window;
  for (std::size_t i = 0; i < row.blocks.size(); ++i) {
    const Block& b = row.blocks[i];
    double s = 0.0;
    for (std::size_t j = 0; j < b.length; ++j) s += row.f(orbit.subspan(b.tau + j, w));
    out[i] = s;
  }
}

template <class Sys>
double row_sum(const DynamicalArrayRow<Sys>& row, std::span<const typename Sys::State> orbit) {
  if (orbit.size() + 1 < row.horizon() + row.f.window) throw DomainError("orbit too short for the row");
  std::vector<double> v(row.blocks.size());
  block_values(row, orbit, std::span<double>(v));
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Gauss-map convenience: builds the orbit of x first.
inline double row_sum(const DynamicalArrayRow<GaussMap>& row, double x) {
  std::vector<double> orbit(row.horizon() + row.f.window - 1);
  for (std::size_t j = 0; j < orbit.size(); ++j) {
    orbit[j] = x;
    if (j + 1 < orbit.size()) x = GaussMap::apply(x);
  }
  return row_sum(row, std::span<const double>(orbit));
}

// Row sums over mu-samples, sample i from stream i.
template <class Sys>
std::vector<double> row_sums(const Sys& sys, const DynamicalArrayRow<Sys>& row, std::size_t n_samples,
                             std::uint64_t seed, unsigned workers = 1) {
  std::vector<double> out(n_samples);
  parallel_chunks(n_samples, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<typename Sys::State> orbit(row.horizon() + row.f.window - 1);
    std::vector<double> v(row.blocks.size());
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(seed, i);
      sys.sample_orbit(rng, std::span<typename Sys::State>(orbit));
      block_values(row, std::span<const typename Sys::State>(orbit), std::span<double>(v));
      double s = 0.0;
      for (double x : v) s += x;
      out[i] = s;
    }
  });
  return out;
}

// Main blocks of length l at tau_i = (i-1)(l+m), i <= k = floor(n/(l+m)),
// plus the completion block of length min(l, q) at k(l+m), q = n - k(l+m).
// The gap row holds the blocks of length m after each main block and the
// trailing gap of length q - min(l, q). Together they tile {0, ..., n-1}.
template <class Sys>
struct BlockDecomposition {
  DynamicalArrayRow<Sys> main;
  DynamicalArrayRow<Sys> gaps;
  std::size_t k = 0;   // number of full main blocks
  std::size_t l = 0;
  std::size_t m = 0;
};

template <class Sys>
BlockDecomposition<Sys> block_decompose(std::size_t n, std::size_t l, std::size_t m, const Observable<Sys>& f) {
  if (!(l > m && m > 0)) throw ConfigError("block decomposition needs l > m > 0 (got l=" + std::to_string(l) + ", m=" + std::to_string(m) + ")");
  const std::size_t k = n / (l + m);
  std::vector<Block> main, gaps;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t tau = i * (l + m);
    main.push_back({tau, l});
    gaps.push_back({tau + l, m});
  }
  const std::size_t q = n - k * (l + m);
  const std::size_t tail = std::min(l, q);
  if (tail > 0) main.push_back({k * (l + m), tail});
  if (q > tail) gaps.push_back({k * (l + m) + tail, q - tail});
  BlockDecomposition<Sys> out;
  out.main = make_row(n, std::move(main), f);
  out.gaps = make_row(n, std::move(gaps), f);
  out.k = k;
  out.l = l;
  out.m = m;
  return out;
}

// Multiplicity of every time index 0..n-1 across main and gap blocks.
template <class Sys>
std::vector<int> tiling_counts(const BlockDecomposition<Sys>& d, std::size_t n) {
  std::vector<int> c(n, 0);
  for (const auto* row : {&d.main, &d.gaps})
    for (const auto& b : row->blocks)
      for (std::size_t j = b.tau; j < b.tau + b.length; ++j) {
        if (j >= n) throw ConfigError("block reaches past the row length");
        ++c[j];
      }
  return c;
}

struct SCheck {
  double s = 0.0;
  double s2 = 0.0;
  double s2_standard_error = 0.0;
};

template <class Sys>
SCheck estimate_s_check(const Sys& sys, const DynamicalArrayRow<Sys>& row, std::size_t n_samples, std::uint64_t seed,
                        unsigned workers = 1) {
  if (n_samples < 1000) throw ConfigError("estimate_s_check needs at least 1000 samples");
  const std::vector<double> sums = row_sums(sys, row, n_samples, seed, workers);
  SCheck out;
  out.s2 = moments(sums).variance;
  out.s2_standard_error = variance_standard_error(sums);
  if (!(out.s2 >= 1e-10)) throw DegenerateVariance("row variance " + std::to_string(out.s2) + " below 1e-10");
  out.s = std::sqrt(out.s2);
  return out;
}

// Per-block moments over mu-samples, normalized by s_check.
struct BlockMoments {
  std::map<double, double> lindeberg;  // eps -> (1/s^2) sum_i E[F_i^2 1{|F_i| >= eps s}]
  std::map<double, double> lindeberg_se;  // Monte Carlo standard error of the above
  double sum_second = 0.0;             // sum_i E F_i^2 / s^2
  double max_second = 0.0;             // max_i E F_i^2 / s^2
  double max_l1 = 0.0;                 // max_i E|F_i| / s
};

// Monte Carlo Lindeberg functional. Each F_i is evaluated at T^{tau_i} x along
// a common orbit sample, which by stationarity has the law of F_i.
template <class Sys>
BlockMoments lindeberg_functional(const Sys& sys, const DynamicalArrayRow<Sys>& row, const std::vector<double>& eps,
                                  double s_check, std::size_t n_samples, std::uint64_t seed, unsigned workers = 1) {
  if (!(s_check > 0.0)) throw DegenerateVariance("s_check must be positive");
  for (double e : eps)
    if (!(e > 0.0)) throw ConfigError("Lindeberg eps must be positive");
  const std::size_t k = row.blocks.size();
  const std::size_t E = eps.size();
  // Per-sample partial sums written by index, reduced in order afterwards.
  std::vector<double> second(n_samples * k), absval(n_samples * k);
  parallel_chunks(n_samples, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<typename Sys::State> orbit(row.horizon() + row.f.window - 1);
    std::vector<double> v(k);
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(seed, i);
      sys.sample_orbit(rng, std::span<typename Sys::State>(orbit));
      block_values(row, std::span<const typename Sys::State>(orbit), std::span<double>(v));
      for (std::size_t b = 0; b < k; ++b) {
        second[i * k + b] = v[b] * v[b];
        absval[i * k + b] = std::abs(v[b]);
      }
    }
  });
  const double s2 = s_check * s_check;
  const double N = static_cast<double>(n_samples);
  BlockMoments out;
  std::vector<double> lind(E, 0.0);
  for (std::size_t b = 0; b < k; ++b) {
    double sec = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
      const double q = second[i * k + b];
      sec += q;
      l1 += absval[i * k + b];
      for (std::size_t e = 0; e < E; ++e)
        if (absval[i * k + b] >= eps[e] * s_check) lind[e] += q;
    }
    out.sum_second += sec / N / s2;
    out.max_second = std::max(out.max_second, sec / N / s2);
    out.max_l1 = std::max(out.max_l1, l1 / N / s_check);
  }
  for (std::size_t e = 0; e < E; ++e) {
    // per-sample totals sum_b F_b^2 1{...} give the standard error
    std::vector<double> per(n_samples, 0.0);
    for (std::size_t i = 0; i < n_samples; ++i)
      for (std::size_t b = 0; b < k; ++b)
        if (absval[i * k + b] >= eps[e] * s_check) per[i] += second[i * k + b] / s2;
    out.lindeberg[eps[e]] = lind[e] / N / s2;
    out.lindeberg_se[eps[e]] = n_samples > 1 ? std::sqrt(moments(per).variance / N) : 0.0;
  }
  return out;
}

// Computable stand-in for the Banach norm of F = sum_{j<l} f o T^j:
// max(l ||f||_inf, C_f sum_{j<l} r^{-j}) with C_f = max(2||f||_inf / r, D f),
// the composition growth bound D(f o T^j) <= C_f r^{-j}.
inline double block_norm_proxy(std::size_t l, double sup, double holder, double r) {
  const double C = std::max(2.0 * sup / r, holder);
  double geometric = 0.0, p = 1.0;
  for (std::size_t j = 0; j < l; ++j) {
    geometric += p;
    p /= r;
  }
  return std::max(static_cast<double>(l) * sup, C * geometric);
}

struct HypothesisLedger {
  double cond2 = 0.0;       // k^2 rho^m
  double cond3 = 0.0;       // rho^m sum_i r^{l_i} ||F_i|| / s
  double cond3prime = 0.0;  // cond3 * max_i ||F_i||_1 / s
  std::map<double, double> lindeberg;
  std::map<double, double> lindeberg_se;
  double sum_second = 0.0;
  double max_second = 0.0;
};

template <class Sys>
HypothesisLedger hypothesis_ledger(const DynamicalArrayRow<Sys>& row, double rho, double r, double holder,
                                   const BlockMoments& bm) {
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0,1)");
  if (!(row.s_check > 0.0)) throw DegenerateVariance("row has no s_check estimate");
  HypothesisLedger led;
  const double k = static_cast<double>(row.k());
  const double rho_m = std::pow(rho, static_cast<double>(row.spacing));
  led.cond2 = k * k * rho_m;
  double acc = 0.0;
  for (const auto& b : row.blocks)
    acc += std::pow(r, static_cast<double>(b.length)) * block_norm_proxy(b.length, row.f.sup_norm(), holder, r);
  led.cond3 = rho_m * acc / row.s_check;
  led.cond3prime = led.cond3 * bm.max_l1;
  led.lindeberg = bm.lindeberg;
  led.lindeberg_se = bm.lindeberg_se;
  led.sum_second = bm.sum_second;
  led.max_second = bm.max_second;
  return led;
}

// Block schedule for Birkhoff sums: m_n = ceil((2 ln n + 1) / (-ln rho)), so
// that rho^{m_n} <= n^{-2}/e, and l_n = max(floor(n^0.4), m_n + 1).
struct BlockSchedule {
  double rho = 0.5;
  double l_exponent = 0.4;

  std::size_t m(std::size_t n) const {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("schedule needs rho in (0,1)");
    return static_cast<std::size_t>(std::ceil((2.0 * std::log(static_cast<double>(n)) + 1.0) / -std::log(rho)));
  }
  std::size_t l(std::size_t n) const {
    const auto base = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), l_exponent)));
    return std::max(base, m(n) + 1);
  }
};

}  // namespace gmclt
