// gmclt command line: one subcommand per scenario family, JSONL on stdout or --out.
#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "gmclt/gmclt.hpp"

namespace {

struct Flags {
  std::string config_path, system_path, observable, scenario, out, csv, model, phi, psi;
  std::vector<std::size_t> schedule, resolution, ms;
  std::size_t samples = 0, calibration = 0, reps = 0, trunc = 32;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double eta = 0.25, lambda = 0.5, shift = 0.0, ks = 0.0, vtol = 0.05, l_exponent = 0.4, trunc_exponent = 0.125;
  std::vector<double> eps;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace gmclt;
  CLI::App app{"Numerical checks of central limit theorems for Gibbs-Markov maps"};
  app.set_version_flag("--version", std::string(GMCLT_VERSION));
  app.require_subcommand(1);
  Flags fl;
  fl.workers = default_workers();
  std::map<std::string, CLI::App*> subs;

  // Options shared by every subcommand; the Option* lets --config be overridden.
  std::map<CLI::App*, std::map<std::string, CLI::Option*>> opts;
  auto common = [&](CLI::App* s) {
    auto& o = opts[s];
    o["config"] = s->add_option("--config", fl.config_path, "Run configuration JSON (flags override it)");
    o["system"] = s->add_option("--system", fl.system_path, "System JSON file");
    o["seed"] = s->add_option("--seed", fl.seed, "Base seed (GMCLT_SEED overrides)");
    o["workers"] = s->add_option("--workers", fl.workers, "Worker threads")->check(CLI::PositiveNumber);
    o["out"] = s->add_option("--out", fl.out, "JSONL report path (default stdout)");
    o["csv"] = s->add_option("--csv", fl.csv, "CSV plot data path");
    o["samples"] = s->add_option("--samples", fl.samples, "Monte Carlo samples per row");
  };

  auto* spectrum = app.add_subcommand("spectrum", "Ulam spectrum of the transfer operator");
  common(spectrum);
  opts[spectrum]["resolution"] = spectrum->add_option("--resolution", fl.resolution, "Grid size(s) N")->expected(1, -1);

  auto* variance = app.add_subcommand("variance", "Green-Kubo, spectral and Monte Carlo asymptotic variance");
  common(variance);
  opts[variance]["obs"] = variance->add_option("--obs", fl.observable, "Observable spec");
  opts[variance]["schedule"] = variance->add_option("--length", fl.schedule, "Monte Carlo length [, Gauss grid N]")->expected(1, 2);

  auto* clt = app.add_subcommand("clt", "Distributional CLT sweep");
  common(clt);
  opts[clt]["scenario"] = clt->add_option("--scenario", fl.scenario, "thm41 | thm54 | cor57 | example5")
                              ->check(CLI::IsMember({"thm41", "thm54", "cor57", "example5"}));
  opts[clt]["obs"] = clt->add_option("--obs", fl.observable, "Observable spec");
  opts[clt]["schedule"] = clt->add_option("--schedule", fl.schedule, "k (thm41) or n values")->expected(1, -1);
  opts[clt]["calibration"] = clt->add_option("--calibration-samples", fl.calibration, "Samples for s_n calibration");
  opts[clt]["ks"] = clt->add_option("--ks-threshold", fl.ks, "Terminal KS threshold");
  opts[clt]["vtol"] = clt->add_option("--variance-tolerance", fl.vtol, "Allowed |var - 1|");
  opts[clt]["l_exponent"] = clt->add_option("--l-exponent", fl.l_exponent, "Block length exponent a in n^a");
  opts[clt]["trunc_exponent"] = clt->add_option("--trunc-exponent", fl.trunc_exponent, "Truncation exponent for example5");
  opts[clt]["eta"] = clt->add_option("--eta", fl.eta, "Example weight exponent");
  opts[clt]["trunc"] = clt->add_option("--trunc", fl.trunc, "Example truncation index");
  opts[clt]["eps"] = clt->add_option("--eps", fl.eps, "Lindeberg thresholds")->expected(1, -1);

  auto* lindeberg = app.add_subcommand("lindeberg", "Hypothesis ledger along the block schedule");
  common(lindeberg);
  opts[lindeberg]["obs"] = lindeberg->add_option("--obs", fl.observable, "Observable spec");
  opts[lindeberg]["schedule"] = lindeberg->add_option("--schedule", fl.schedule, "n values")->expected(1, -1);
  opts[lindeberg]["calibration"] = lindeberg->add_option("--calibration-samples", fl.calibration, "Samples per row");
  opts[lindeberg]["eps"] = lindeberg->add_option("--eps", fl.eps, "Lindeberg thresholds")->expected(1, -1);
  opts[lindeberg]["l_exponent"] = lindeberg->add_option("--l-exponent", fl.l_exponent, "Block length exponent");

  auto* example5 = app.add_subcommand("example5", "Closed-form checks and Holder growth for the example observable");
  common(example5);
  opts[example5]["eta"] = example5->add_option("--eta", fl.eta, "Weight exponent in (0, 1/2)");
  opts[example5]["trunc"] = example5->add_option("--trunc", fl.trunc, "Truncation index");

  auto* wilcoxon = app.add_subcommand("wilcoxon", "Two-sample rank-sum CLT");
  common(wilcoxon);
  opts[wilcoxon]["model"] = wilcoxon->add_option("--model", fl.model, "series | iid")->check(CLI::IsMember({"series", "iid"}));
  opts[wilcoxon]["phi"] = wilcoxon->add_option("--phi", fl.phi, "First-sample observable");
  opts[wilcoxon]["psi"] = wilcoxon->add_option("--psi", fl.psi, "Second-sample observable");
  opts[wilcoxon]["schedule"] = wilcoxon->add_option("--m", fl.ms, "Sample sizes m")->expected(1, -1);
  opts[wilcoxon]["lambda"] = wilcoxon->add_option("--lambda", fl.lambda, "Size ratio n/m");
  opts[wilcoxon]["reps"] = wilcoxon->add_option("--reps", fl.reps, "Replications per m");
  opts[wilcoxon]["calibration"] = wilcoxon->add_option("--calibration-samples", fl.calibration, "Replications for sigma_m");
  opts[wilcoxon]["shift"] = wilcoxon->add_option("--shift", fl.shift, "Location shift of Y (iid model)");
  opts[wilcoxon]["ks"] = wilcoxon->add_option("--ks-threshold", fl.ks, "Terminal KS threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  auto& o = opts[sub];
  auto given = [&](const char* name) { return o.count(name) && o.at(name)->count() > 0; };

  try {
    RunConfig c;
    if (given("config")) c = run_config_from_json(read_json_file(fl.config_path));
    c.command = sub->get_name();
    if (given("system")) {
      c.system_path = fl.system_path;
      c.system = read_json_file(fl.system_path);
    }
    if (given("seed")) c.seed = fl.seed;
    if (given("workers")) c.workers = fl.workers;
    else if (!given("config")) c.workers = default_workers();
    if (given("out")) c.out_path = fl.out;
    if (given("csv")) c.csv_path = fl.csv;
    if (given("samples")) c.samples = fl.samples;
    if (given("reps")) c.samples = fl.reps;
    if (given("calibration")) c.calibration_samples = fl.calibration;
    if (given("obs")) c.observable = fl.observable;
    if (given("scenario")) c.scenario = fl.scenario;
    if (given("resolution")) c.schedule = fl.resolution;
    if (given("schedule")) c.schedule = c.command == "wilcoxon" ? fl.ms : fl.schedule;
    if (given("ks")) c.ks_threshold = fl.ks;
    if (given("vtol")) c.variance_tolerance = fl.vtol;
    if (given("l_exponent")) c.l_exponent = fl.l_exponent;
    if (given("trunc_exponent")) c.truncation_exponent = fl.trunc_exponent;
    if (given("eta")) c.eta = fl.eta;
    if (given("trunc")) c.trunc = fl.trunc;
    if (given("eps")) c.eps = fl.eps;
    if (given("model")) c.model = fl.model;
    if (given("phi")) c.phi = fl.phi;
    if (given("psi")) c.psi = fl.psi;
    if (given("lambda")) c.lambda = fl.lambda;
    if (given("shift")) c.iid_shift = fl.shift;
    if (c.command == "clt" && c.scenario.empty()) c.scenario = "thm41";
    apply_environment(c);
    const int code = run_and_report(c, std::cout);
    if (code != 0) std::cerr << "gmclt: " << c.command << " checks failed (see summary record)\n";
    return code;
  } catch (const Error& e) {
    std::cerr << "gmclt: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "gmclt: unexpected error: " << e.what() << '\n';
    return 1;
  }
}
