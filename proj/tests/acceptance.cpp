// Acceptance sweep: one PASS/FAIL line per criterion, exit 1 if any fails.
// Row and summary records of both sweeps are written next to the binary.
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gmclt/gmclt.hpp"

using namespace gmclt;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json markov_system() { return json::parse(R"({"kind":"markov","P":[[0.9,0.1],[0.2,0.8]],"labels":["a","b"]})"); }
json bernoulli_system() { return json::parse(R"({"kind":"markov","P":[[0.5,0.5],[0.5,0.5]]})"); }
json gauss_system() { return json::parse(R"({"kind":"gauss"})"); }

struct Job {
  std::string name;
  int criterion = 0;
  RunConfig config;
};

struct Done {
  RunOutput out;
  double seconds = 0.0;
};

RunConfig make(const std::string& command, json system, const std::string& obs = "") {
  RunConfig c;
  c.command = command;
  c.system = std::move(system);
  c.observable = obs;
  return c;
}

std::vector<Job> jobs() {
  std::vector<Job> j;
  {
    RunConfig c = make("spectrum", markov_system());
    c.schedule = {2};
    j.push_back({"spectrum_markov", 2, c});
    c.system = bernoulli_system();
    j.push_back({"spectrum_bernoulli", 2, c});
    c = make("spectrum", gauss_system());
    c.schedule = {512, 1024};
    j.push_back({"spectrum_gauss", 2, c});
  }
  j.push_back({"variance_bernoulli_coin", 3, make("variance", bernoulli_system(), "coin")});
  j.push_back({"variance_markov_indicator", 3, make("variance", markov_system(), "indicator:0")});
  j.push_back({"variance_gauss_identity", 3, make("variance", gauss_system(), "identity")});
  j.push_back({"variance_markov_coboundary", 3, make("variance", markov_system(), "coboundary")});
  j.push_back({"variance_gauss_coboundary", 3, make("variance", gauss_system(), "coboundary")});
  {
    RunConfig c = make("clt", bernoulli_system(), "coin");
    c.scenario = "thm41";
    c.schedule = {4, 16, 64, 256, 1024, 4096};
    c.samples = 100000;
    c.ks_threshold = 0.02;
    j.push_back({"thm41_bernoulli", 4, c});
    c = make("clt", markov_system(), "indicator:0");
    c.scenario = "thm41";
    c.ks_threshold = 0.03;
    j.push_back({"thm41_markov", 4, c});
    c.system = gauss_system();
    c.observable = "identity";
    j.push_back({"thm41_gauss", 4, c});
  }
  {
    RunConfig c = make("clt", markov_system(), "coin");
    c.scenario = "cor57";
    c.samples = 50000;
    c.ks_threshold = 0.03;
    j.push_back({"cor57_markov", 5, c});
  }
  {
    RunConfig c;
    c.command = "example5";
    j.push_back({"example5_checks", 6, c});
    c.command = "clt";
    c.scenario = "example5";
    c.ks_threshold = 0.05;
    j.push_back({"example5_clt", 6, c});
  }
  {
    RunConfig c;
    c.command = "wilcoxon";
    c.model = "iid";
    c.lambda = 1.0;
    c.schedule = {512};
    c.samples = 20000;
    c.ks_threshold = 0.03;
    j.push_back({"wilcoxon_iid_null", 7, c});
    c = make("wilcoxon", gauss_system());
    c.model = "series";
    c.phi = c.psi = "identity";
    c.schedule = {64, 128, 256, 512};
    c.samples = 50000;
    j.push_back({"wilcoxon_gauss_null", 7, c});
    c.psi = "shift:0.2";
    c.schedule = {64, 128, 256};
    c.samples = 5000;
    j.push_back({"wilcoxon_gauss_shift", 7, c});
  }
  return j;
}

std::vector<Done> sweep(const std::vector<Job>& js, unsigned workers, const std::string& jsonl_path) {
  std::vector<Done> out;
  std::ofstream log(jsonl_path);
  for (const auto& job : js) {
    RunConfig c = job.config;
    c.workers = workers;
    const auto t0 = Clock::now();
    Done d;
    d.out = run(c);
    d.seconds = seconds_since(t0);
    for (const auto& r : d.out.records) log << json{{"job", job.name}, {"record", r}}.dump() << '\n';
    std::cerr << "  [workers=" << workers << "] " << job.name << ": " << (d.out.pass ? "pass" : "FAIL") << " in "
              << d.seconds << " s\n";
    out.push_back(std::move(d));
  }
  return out;
}

const json& summary(const Done& d) { return d.out.records.back(); }

std::string failed_checks(const Done& d) {
  std::string s;
  for (auto it = summary(d)["checks"].begin(); it != summary(d)["checks"].end(); ++it)
    if (!it.value().get<bool>()) s += (s.empty() ? "" : ",") + it.key();
  return s;
}

int failures = 0;

void report(int n, bool ok, const std::string& what) {
  if (!ok) ++failures;
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << what << std::endl;
}

// W from explicit midranks of the pooled sample, quadratic in the sizes.
double brute_force_rank_sum(const std::vector<double>& X, const std::vector<double>& Y) {
  double W = 0.0;
  for (double x : X) {
    double below = 0.0, equal = 0.0;
    for (double z : X) {
      below += z < x;
      equal += z == x;
    }
    for (double z : Y) {
      below += z < x;
      equal += z == x;
    }
    W += below + 0.5 * (equal + 1.0);
  }
  return W;
}

}  // namespace

int main() {
  const auto js = jobs();
  std::cerr << "sweep with workers = 1\n";
  const auto a = sweep(js, 1, "acceptance_workers1.jsonl");
  auto done = [&](const std::string& name) -> const Done& {
    for (std::size_t i = 0; i < js.size(); ++i)
      if (js[i].name == name) return a[i];
    throw std::logic_error("no job " + name);
  };
  auto ok = [&](const std::string& name) { return done(name).out.pass; };
  auto seconds = [&](int crit) {
    double s = 0.0;
    for (std::size_t i = 0; i < js.size(); ++i)
      if (js[i].criterion == crit) s += a[i].seconds;
    return s;
  };
  std::ostringstream msg;

  // 1. L 1 = 1 on the N = 512 Gauss grid, timed from grid construction.
  {
    const auto t0 = Clock::now();
    const UlamGrid g = build_ulam_grid(GaussMap{}, 512, 1);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(512);
    const double err = (apply_transfer(g, one) - one).cwiseAbs().maxCoeff();
    const double t = seconds_since(t0);
    msg.str("");
    msg << "Gauss transfer fixes 1 at N=512, max cell error " << err << ", " << t << " s";
    report(1, err < 1e-6 && t < 5.0, msg.str());
  }

  // 2. Spectral gaps.
  {
    const double rho_m = done("spectrum_markov").out.records[0]["spectral"]["rho"].get<double>();
    const double rho_b = done("spectrum_bernoulli").out.records[0]["spectral"]["rho"].get<double>();
    const double rho_512 = done("spectrum_gauss").out.records[0]["spectral"]["rho"].get<double>();
    const double rho_1024 = done("spectrum_gauss").out.records[1]["spectral"]["rho"].get<double>();
    const bool pass = std::abs(rho_m - 0.7) <= 1e-8 && rho_b < 1e-8 && std::abs(rho_512 - rho_1024) <= 0.02 &&
                      rho_1024 > 0.25 && rho_1024 < 0.35 && ok("spectrum_markov") && ok("spectrum_bernoulli") &&
                      ok("spectrum_gauss") && seconds(2) < 60.0;
    msg.str("");
    msg << "rho markov " << rho_m << ", bernoulli " << rho_b << ", gauss " << rho_512 << " (512) " << rho_1024
        << " (1024), " << seconds(2) << " s";
    report(2, pass, msg.str());
  }

  // 3. Variance triples against closed forms; coboundaries vanish.
  {
    auto var = [&](const std::string& name) { return done(name).out.records[0]["variance"]; };
    const double bern = var("variance_bernoulli_coin")["sigma2_green_kubo"].get<double>();
    const double mark = var("variance_markov_indicator")["sigma2_green_kubo"].get<double>();
    const double oracle = (2.0 / 9.0) * 1.7 / 0.3;  // pi0 pi1 (1 + lambda2) / (1 - lambda2)
    bool pass = std::abs(bern - 0.25) < 1e-9 && std::abs(mark - oracle) < 1e-6 && seconds(3) < 120.0;
    std::string bad;
    for (const char* n : {"variance_bernoulli_coin", "variance_markov_indicator", "variance_gauss_identity",
                          "variance_markov_coboundary", "variance_gauss_coboundary"})
      if (!ok(n)) {
        pass = false;
        bad += std::string(" ") + n + "[" + failed_checks(done(n)) + "]";
      }
    msg.str("");
    msg << "coin " << bern << ", markov indicator " << mark << " (oracle " << oracle << "), gauss identity "
        << var("variance_gauss_identity")["sigma2_green_kubo"].get<double>() << ", coboundaries below 1% of Var f, "
        << seconds(3) << " s" << bad;
    report(3, pass, msg.str());
  }

  // 4. Birkhoff CLT sweeps.
  {
    bool pass = true;
    msg.str("");
    for (const char* n : {"thm41_bernoulli", "thm41_markov", "thm41_gauss"}) {
      const Done& d = done(n);
      pass = pass && d.out.pass && d.seconds < 300.0;
      const auto& last = d.out.records[d.out.records.size() - 2];
      msg << n << " KS " << last["report"]["ks_distance"].get<double>() << " at k=" << last["report"]["n"] << " ("
          << d.seconds << " s" << (d.out.pass ? "" : ", failed " + failed_checks(d)) << "); ";
    }
    report(4, pass, msg.str());
  }

  // 5. Block array on the two-state chain.
  {
    const Done& d = done("cor57_markov");
    const auto& last = d.out.records[d.out.records.size() - 2];
    msg.str("");
    msg << "terminal KS " << last["report"]["ks_distance"].get<double>() << " at n=" << last["report"]["n"]
        << ", ledger checks " << (d.out.pass ? "hold" : "failed: " + failed_checks(d)) << ", " << d.seconds << " s";
    report(5, d.out.pass && d.seconds < 600.0, msg.str());
  }

  // 6. Example observable.
  {
    const Done& c = done("example5_checks");
    const Done& k = done("example5_clt");
    const auto& last = k.out.records[k.out.records.size() - 2];
    msg.str("");
    msg << "closed forms, tail fit and Holder growth " << (c.out.pass ? "hold" : "failed: " + failed_checks(c))
        << "; truncated CLT KS " << last["report"]["ks_distance"].get<double>() << " at n=" << last["report"]["n"]
        << (k.out.pass ? "" : " failed: " + failed_checks(k)) << ", " << seconds(6) << " s";
    report(6, c.out.pass && k.out.pass && seconds(6) < 600.0, msg.str());
  }

  // 7. Rank-sum statistic.
  {
    const auto t0 = Clock::now();
    double worst = 0.0;
    const GaussSeriesModel gm(gauss_marginal("identity"), gauss_marginal("shift:0.2"));
    const IidUniformModel im(0.1);
    for (std::uint64_t rep = 0; rep < 1000; ++rep) {
      CounterRng rng(2024, rep);
      const auto m = 1 + static_cast<std::size_t>(12 * rng.uniform());
      const auto n = 1 + static_cast<std::size_t>(12 * rng.uniform());
      const WilcoxonModel& model = rep % 2 ? static_cast<const WilcoxonModel&>(gm) : im;
      const TwoSampleSeries s = model.series(m, n, 2025, rep);
      const WilcoxonDecomposition d = decompose(s);
      const double recon = d.A + static_cast<double>(m) * d.B + static_cast<double>(n) * d.C + d.D;
      worst = std::max({worst, std::abs(recon - brute_force_rank_sum(s.X, s.Y)),
                        std::abs(d.A - decomposition_A_bruteforce(s))});
    }
    const double t = seconds_since(t0) + seconds(7);
    const bool pass = worst <= 1e-9 && ok("wilcoxon_iid_null") && ok("wilcoxon_gauss_null") &&
                      ok("wilcoxon_gauss_shift") && t < 600.0;
    msg.str("");
    msg << "decomposition error " << worst << " on 1000 samples; iid null "
        << (ok("wilcoxon_iid_null") ? "ok" : "failed: " + failed_checks(done("wilcoxon_iid_null"))) << "; Gauss null "
        << (ok("wilcoxon_gauss_null") ? "ok" : "failed: " + failed_checks(done("wilcoxon_gauss_null")))
        << "; shift alternative "
        << (ok("wilcoxon_gauss_shift") ? "detected" : "failed: " + failed_checks(done("wilcoxon_gauss_shift"))) << ", "
        << t << " s";
    report(7, pass, msg.str());
  }

  // 8. Same payloads with 8 workers.
  {
    std::cerr << "sweep with workers = 8\n";
    const auto b = sweep(js, 8, "acceptance_workers8.jsonl");
    std::size_t differing = 0, total = 0;
    for (std::size_t i = 0; i < js.size(); ++i) {
      const auto& ra = a[i].out.records;
      const auto& rb = b[i].out.records;
      total += ra.size();
      if (ra.size() != rb.size()) {
        differing += ra.size();
        continue;
      }
      for (std::size_t r = 0; r < ra.size(); ++r) differing += ra[r].dump() != rb[r].dump();
    }
    msg.str("");
    msg << differing << " of " << total << " JSONL records differ between workers 1 and 8";
    report(8, differing == 0, msg.str());
  }

  return failures == 0 ? 0 : 1;
}
