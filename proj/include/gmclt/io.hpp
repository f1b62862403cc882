#pragma once

#include <json.hpp>

#include <complex>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gmclt/arrays.hpp"
#include "gmclt/clt.hpp"
#include "gmclt/error.hpp"
#include "gmclt/example5.hpp"
#include "gmclt/observables.hpp"
#include "gmclt/systems.hpp"
#include "gmclt/transfer.hpp"

namespace gmclt {

using json = nlohmann::ordered_json;

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + what);
}

// {"kind":"gauss"} or {"kind":"markov","P":[[..]],"labels":[..],"pi":[..],"r":0.5}
inline System parse_system(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) throw ConfigError("system needs a string 'kind'");
  const std::string kind = j["kind"];
  if (kind == "gauss") {
    reject_unknown_keys(j, {"kind"}, "gauss system");
    return GaussMap{};
  }
  if (kind != "markov") throw ConfigError("unknown system kind '" + kind + "'");
  reject_unknown_keys(j, {"kind", "P", "labels", "pi", "r"}, "markov system");
  if (!j.contains("P") || !j["P"].is_array() || j["P"].empty()) throw ConfigError("markov system needs a non-empty matrix 'P'");
  const auto S = static_cast<Eigen::Index>(j["P"].size());
  Eigen::MatrixXd P(S, S);
  for (Eigen::Index i = 0; i < S; ++i) {
    const auto& row = j["P"][static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != S) throw ConfigError("'P' must be square");
    for (Eigen::Index c = 0; c < S; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) throw ConfigError("'P' entries must be numbers");
      P(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  std::vector<std::string> labels;
  if (j.contains("labels")) {
    if (!j["labels"].is_array()) throw ConfigError("'labels' must be an array");
    for (const auto& l : j["labels"]) labels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
  }
  std::optional<Eigen::VectorXd> pi;
  if (j.contains("pi")) {
    if (!j["pi"].is_array()) throw ConfigError("'pi' must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j["pi"].size()));
    for (std::size_t i = 0; i < j["pi"].size(); ++i) v(static_cast<Eigen::Index>(i)) = j["pi"][i].get<double>();
    pi = v;
  }
  double r = 0.5;
  if (j.contains("r")) {
    if (!j["r"].is_number()) throw ConfigError("'r' must be a number");
    r = j["r"].get<double>();
  }
  return MarkovShift(std::move(P), std::move(labels), pi, r);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

inline System load_system(const std::string& path) { return parse_system(read_json_file(path)); }

inline json system_json(const System& sys) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussMap>) {
          return json{{"kind", "gauss"}, {"r", s.r()}};
        } else {
          json P = json::array();
          for (Eigen::Index i = 0; i < s.P().rows(); ++i) {
            json row = json::array();
            for (Eigen::Index c = 0; c < s.P().cols(); ++c) row.push_back(s.P()(i, c));
            P.push_back(row);
          }
          json pi = json::array();
          for (Eigen::Index i = 0; i < s.pi().size(); ++i) pi.push_back(s.pi()(i));
          return json{{"kind", "markov"}, {"P", P}, {"labels", s.labels()}, {"pi", pi}, {"r", s.r()}};
        }
      },
      sys);
}

// --- Observables from short specs ---

inline long long parse_int_suffix(const std::string& spec, std::size_t at) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(spec.substr(at), &used);
    if (used != spec.size() - at) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad observable spec '" + spec + "'");
  }
}

inline double parse_double_suffix(const std::string& spec, std::size_t at) {
  try {
    std::size_t used = 0;
    const double v = std::stod(spec.substr(at), &used);
    if (used != spec.size() - at) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad observable spec '" + spec + "'");
  }
}

// identity | shift:c | indicator:k | coboundary | example5 | example5-partial:N
inline GaussObservable parse_gauss_observable(const std::string& spec, const Example5Spec& ex = {}) {
  if (spec == "identity") return gauss_identity();
  if (spec.rfind("shift:", 0) == 0) return gauss_shift(parse_double_suffix(spec, 6));
  if (spec.rfind("indicator:", 0) == 0) return gauss_indicator(parse_int_suffix(spec, 10));
  if (spec == "coboundary") {
    // x o T - x
    GaussObservable f;
    f.eval = [](std::span<const double> x) { return x[1] - x[0]; };
    f.window = 2;
    f.mean = 0.0;
    f.centered = true;
    f.lower = -1.0;
    f.upper = 1.0;
    f.name = "coboundary";
    return f;
  }
  if (spec == "example5") return build_example5(GaussMap{}, ex);
  if (spec.rfind("example5-partial:", 0) == 0) {
    const long long N = parse_int_suffix(spec, 17);
    if (N < 1) throw ConfigError("partial sum index must be >= 1");
    return example5_partial(ex, static_cast<std::size_t>(N));
  }
  throw ConfigError("unknown Gauss observable '" + spec + "'");
}

// indicator:k | coin | state:v0,v1,... | coboundary
inline MarkovObservable parse_markov_observable(const MarkovShift& sys, const std::string& spec) {
  if (spec.rfind("indicator:", 0) == 0) return markov_indicator(sys, static_cast<MarkovShift::State>(parse_int_suffix(spec, 10)));
  if (spec == "coin") return markov_coin(sys);
  if (spec.rfind("state:", 0) == 0) {
    std::vector<double> phi;
    std::stringstream ss(spec.substr(6));
    std::string item;
    while (std::getline(ss, item, ',')) phi.push_back(parse_double_suffix(item, 0));
    return markov_state_function(sys, std::move(phi), spec);
  }
  if (spec == "coboundary") {
    std::vector<double> phi(sys.states(), 0.0);
    phi[0] = 1.0;
    return markov_coboundary(sys, std::move(phi));
  }
  throw ConfigError("unknown Markov observable '" + spec + "'");
}

// --- Report serialization ---

inline json complex_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const SpectralReport& r) {
  json lead = json::array();
  for (auto z : r.leading) lead.push_back(complex_json(z));
  return json{{"resolution", r.resolution},       {"lambda1", r.lambda1},
              {"rho", r.rho},                     {"lambda2", complex_json(r.lambda2)},
              {"leading", lead},                  {"power_iterations", r.power_iterations},
              {"residual", r.residual}};
}

inline json to_json(const Moments& m) {
  return json{{"mean", m.mean}, {"var", m.variance}, {"skew", m.skewness}, {"kurtosis", m.kurtosis}};
}

inline json to_json(const HypothesisLedger& l) {
  auto by_eps = [](const std::map<double, double>& m) {
    json o = json::object();
    for (const auto& [eps, v] : m) {
      std::ostringstream key;
      key << eps;
      o[key.str()] = v;
    }
    return o;
  };
  return json{{"cond2", l.cond2},           {"cond3", l.cond3},
              {"cond3prime", l.cond3prime}, {"lindeberg", by_eps(l.lindeberg)},
              {"lindeberg_se", by_eps(l.lindeberg_se)},
              {"sum_second", l.sum_second}, {"max_second", l.max_second}};
}

inline json to_json(const CltReport& r) {
  json j{{"n", r.n}, {"n_samples", r.n_samples}, {"ks_distance", r.ks_distance}, {"moments", to_json(r.moments)}};
  if (r.ledger) j["ledger"] = to_json(*r.ledger);
  json d = json::object();
  for (const auto& [k, v] : r.diagnostics) d[k] = v;
  j["diagnostics"] = d;
  j["pass"] = r.pass;
  return j;
}

inline json to_json(const VarianceEstimate& v) {
  return json{{"sigma2_green_kubo", v.sigma2_green_kubo},
              {"sigma2_spectral", v.sigma2_spectral},
              {"sigma2_monte_carlo", v.sigma2_monte_carlo},
              {"monte_carlo_se", v.monte_carlo_se},
              {"lag", v.lag},
              {"t0", v.t0},
              {"clipped", v.clipped},
              {"variance_of_f", v.variance_of_f}};
}

}  // namespace gmclt
