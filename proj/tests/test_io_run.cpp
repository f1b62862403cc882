#include <gtest/gtest.h>

#include <cstdlib>

#include "gmclt/run.hpp"

using namespace gmclt;

TEST(SystemJson, ParsesBothKinds) {
  EXPECT_TRUE(std::holds_alternative<GaussMap>(parse_system(json::parse(R"({"kind":"gauss"})"))));
  const System s = parse_system(json::parse(R"({"kind":"markov","P":[[0.9,0.1],[0.2,0.8]],"labels":["a","b"]})"));
  const auto& m = std::get<MarkovShift>(s);
  EXPECT_EQ(m.states(), 2u);
  EXPECT_NEAR(m.pi()(0), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(system_json(s)["labels"][1], "b");
}

TEST(SystemJson, RejectsBadInput) {
  EXPECT_THROW(parse_system(json::parse(R"({"kind":"gauss","extra":1})")), ConfigError);
  EXPECT_THROW(parse_system(json::parse(R"({"kind":"tent"})")), ConfigError);
  EXPECT_THROW(parse_system(json::parse(R"({"kind":"markov","P":[[0.9,0.2],[0.2,0.8]]})")), ConfigError);
  EXPECT_THROW(parse_system(json::parse(R"({"kind":"markov","P":[[1,0],[0,1]]})")), ConfigError);  // reducible
  EXPECT_THROW(parse_system(json::parse(R"({"kind":"markov","P":[[0.5,0.5]]})")), ConfigError);
  EXPECT_THROW(parse_system(json::parse(R"([1,2])")), ConfigError);
}

TEST(SystemJson, MissingFileNamesPath) {
  try {
    load_system("/nonexistent/sys.json");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/sys.json"), std::string::npos);
  }
}

TEST(ObservableSpecs, Gauss) {
  EXPECT_EQ(parse_gauss_observable("identity").name, "identity");
  EXPECT_NEAR(*parse_gauss_observable("shift:0.5").mean, 1.0 / std::numbers::ln2 - 0.5, 1e-12);
  EXPECT_EQ(parse_gauss_observable("coboundary").window, 2u);
  EXPECT_TRUE(parse_gauss_observable("example5").centered);
  EXPECT_THROW(parse_gauss_observable("shift:x"), ConfigError);
  EXPECT_THROW(parse_gauss_observable("indicator:3z"), ConfigError);
  EXPECT_THROW(parse_gauss_observable("example5-partial:0"), ConfigError);
  EXPECT_THROW(parse_gauss_observable("sine"), ConfigError);
}

TEST(ObservableSpecs, Markov) {
  const MarkovShift m(Eigen::MatrixXd{{0.9, 0.1}, {0.2, 0.8}});
  EXPECT_TRUE(parse_markov_observable(m, "coin").centered);
  const std::vector<MarkovShift::State> x{1};
  EXPECT_EQ(parse_markov_observable(m, "state:2,-1")(x), -1.0);
  EXPECT_THROW(parse_markov_observable(m, "state:1,2,3"), ConfigError);
  EXPECT_THROW(parse_markov_observable(m, "indicator:5"), IndexError);
  EXPECT_THROW(parse_markov_observable(m, "identity"), ConfigError);
}

TEST(RunConfigJson, UnknownKeysAndValues) {
  EXPECT_THROW(run_config_from_json(json::parse(R"({"command":"clt","sampels":10})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"samples":"many"})")), ConfigError);
  const RunConfig c = run_config_from_json(json::parse(R"({"command":"spectrum","system":{"kind":"gauss"},"schedule":[64]})"));
  EXPECT_EQ(c.command, "spectrum");
  EXPECT_EQ(c.schedule, std::vector<std::size_t>{64});
  EXPECT_NO_THROW(c.validate());
  RunConfig bad = c;
  bad.system = json();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.command = "plot";
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Environment, SeedOverride) {
  RunConfig c;
  c.seed = 1;
  setenv("GMCLT_SEED", "99", 1);
  apply_environment(c);
  EXPECT_EQ(c.seed, 99u);
  setenv("GMCLT_SEED", "9x", 1);
  EXPECT_THROW(apply_environment(c), ConfigError);
  unsetenv("GMCLT_SEED");
  apply_environment(c);
  EXPECT_EQ(c.seed, 99u);
}

TEST(Run, HeaderAndSummaryShape) {
  RunConfig c;
  c.command = "spectrum";
  c.system = json::parse(R"({"kind":"markov","P":[[0.9,0.1],[0.2,0.8]]})");
  const RunOutput out = run(c);
  ASSERT_FALSE(out.records.empty());
  EXPECT_EQ(out.records.front()["type"], "row");
  EXPECT_EQ(out.records.back()["type"], "summary");
  EXPECT_TRUE(out.pass);
  const json h = header_record(c);
  EXPECT_EQ(h["type"], "header");
  EXPECT_EQ(h["config"]["workers"], 1);
}

TEST(Run, RecordsDoNotDependOnWorkers) {
  RunConfig c;
  c.command = "clt";
  c.scenario = "thm41";
  c.system = json::parse(R"({"kind":"markov","P":[[0.9,0.1],[0.2,0.8]]})");
  c.observable = "coin";
  c.schedule = {10, 100};
  c.samples = 3000;
  c.ks_threshold = 0.1;
  const RunOutput a = run(c);
  c.workers = 8;
  const RunOutput b = run(c);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].dump(), b.records[i].dump());
}

TEST(Csv, NumbersRoundTrip) {
  EXPECT_EQ(std::stod(csv_number(0.1)), 0.1);
  std::ostringstream os;
  write_csv(os, {{"a", "b"}, {"1", "2"}});
  EXPECT_EQ(os.str(), "a,b\n1,2\n");
}
