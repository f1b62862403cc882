// Birkhoff sums of the centered indicator on a two-state chain: sigma^2 three
// ways, then KS distance to N(0,1) as k grows.
#include <cstdio>

#include "gmclt/gmclt.hpp"

int main() {
  using namespace gmclt;
  const MarkovShift sys(Eigen::MatrixXd{{0.9, 0.1}, {0.2, 0.8}});
  const MarkovObservable f = markov_coin(sys);

  VarianceOptions opt;
  opt.resolution = 2;
  opt.mc_samples = 4000;
  const VarianceEstimate v = estimate_variance(sys, f, opt);
  std::printf("sigma^2  green-kubo %.5f  spectral %.5f  monte-carlo %.5f (se %.5f)\n", v.sigma2_green_kubo,
              v.sigma2_spectral, v.sigma2_monte_carlo, v.monte_carlo_se);

  std::vector<BirkhoffRow<MarkovShift>> rows;
  for (std::size_t k : {10, 100, 1000}) rows.push_back({k, f, v.sigma2_green_kubo, f.sup_norm()});
  for (const CltReport& r : clt_sweep_theorem41(sys, rows, 20000, 7, CltCriteria{}, default_workers()))
    std::printf("k=%-5zu KS %.4f  mean %+.4f  var %.4f\n", r.n, r.ks_distance, r.moments.mean, r.moments.variance);
}
