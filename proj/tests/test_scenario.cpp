#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "hetrrm/experiment.hpp"
#include "hetrrm/oracle.hpp"

using namespace hetrrm;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kSource = HETRRM_SOURCE_DIR;

const char* kMinimal = R"(hetrrm-scenario 1
[general]
deterministic = true
subbands = 1
superframe_length = 10
guard_subframes = 1
[nodes]
M macro 0 0
U mu 30 0
[links]
M U
[backhaul]
M
[flows]
f M U
)";

std::string error_of(const std::string& text) {
  try {
    build_world(parse_scenario(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Scenario, BundledFigureScenarioLoads) {
  const ScenarioConfig c = load_scenario(kSource + "/scenarios/fig7_like.scenario");
  const World w = build_world(c);
  EXPECT_EQ(c.subbands, 10u);
  EXPECT_EQ(c.utility.alpha, 1.0);
  std::size_t macros = 0, picos = 0, users = 0;
  for (const Node& n : w.graph.nodes()) {
    macros += n.kind == NodeKind::macro_bs;
    picos += n.kind == NodeKind::pico_bs;
    users += n.kind == NodeKind::mobile_user;
  }
  EXPECT_EQ(macros, 3u);
  EXPECT_EQ(picos, 9u);
  EXPECT_EQ(users, 9u);
}

TEST(Scenario, EmptyFileNamesMissingHeader) {
  const std::string e = error_of("");
  EXPECT_NE(e.find("hetrrm-scenario"), std::string::npos) << e;
  const std::string only_header = error_of("hetrrm-scenario 1\n");
  EXPECT_NE(only_header.find("[general]"), std::string::npos) << only_header;
}

TEST(Scenario, UnknownFlowDestinationNamesTheFlow) {
  std::string text = kMinimal;
  text.replace(text.find("f M U"), 5, "video M X");
  const std::string e = error_of(text);
  EXPECT_NE(e.find("flow 'video'"), std::string::npos) << e;
  EXPECT_NE(e.find("'X'"), std::string::npos) << e;
}

TEST(Scenario, ErrorsCarryLineNumbers) {
  std::string text = kMinimal;
  text.replace(text.find("subbands = 1"), 12, "subbandz = 1");
  const std::string e = error_of(text);
  EXPECT_NE(e.find("line 4"), std::string::npos) << e;
  EXPECT_NE(e.find("subbandz"), std::string::npos) << e;

  std::string dup = kMinimal;
  dup.replace(dup.find("U mu 30 0"), 9, "M mu 30 0");
  EXPECT_NE(error_of(dup).find("duplicate node 'M'"), std::string::npos);

  std::string bad_kind = kMinimal;
  bad_kind.replace(bad_kind.find("U mu"), 4, "U femto");
  EXPECT_NE(error_of(bad_kind).find("line 9"), std::string::npos);
}

TEST(Scenario, UnreachableFlowRejected) {
  std::string text = kMinimal;
  text.replace(text.find("U mu 30 0"), 9, "U mu 30 0\nV mu 40 0\nP pico 10 10");
  text.replace(text.find("M U\n"), 4, "M U\nP V\n");
  text += "f2 M V\n";
  const std::string e = error_of(text);
  EXPECT_NE(e.find("unreachable"), std::string::npos) << e;
}

TEST(Scenario, SerializationRoundTrips) {
  const ScenarioConfig c = load_scenario(kSource + "/scenarios/fig7_like.scenario");
  const std::string once = serialize_scenario(c);
  const std::string twice = serialize_scenario(parse_scenario(once));
  EXPECT_EQ(once, twice);
}

TEST(Scenario, TraceConfigEchoReplays) {
  const ScenarioConfig c = load_scenario(kSource + "/scenarios/two_cell_small.scenario");
  const ExperimentResult first = run_experiment(c, Mode::proposed);
  const TraceFile t = parse_trace(first.trace);
  EXPECT_EQ(t.mode, Mode::proposed);
  const ExperimentResult again = run_experiment(parse_scenario(t.config_text), t.mode);
  EXPECT_EQ(first.trace, again.trace);
  ASSERT_FALSE(t.iterations.empty());
  for (const auto& rec : t.iterations) EXPECT_EQ(rec.at("v"), "1");
  EXPECT_EQ(t.final_record.at("v"), "1");
  EXPECT_EQ(t.final_record.at("converged"), "1");
}

TEST(Scenario, GoldenTrace) {
  const ScenarioConfig c = load_scenario(kSource + "/scenarios/two_cell_small.scenario");
  const std::string golden = read_file(kSource + "/tests/golden/two_cell_small.proposed.trace");
  ASSERT_FALSE(golden.empty());
  EXPECT_EQ(run_experiment(c, Mode::proposed).trace, golden);
}

TEST(Scenario, OracleOnSmallScenario) {
  const ScenarioConfig c = load_scenario(kSource + "/scenarios/two_cell_small.scenario");
  const OracleResult o = oracle_solve(c);
  const ExperimentResult r = run_experiment(c, Mode::proposed);
  EXPECT_TRUE(r.rrm.converged);
  EXPECT_NEAR(r.utility(), o.utility, 1e-4);
}

TEST(Scenario, OracleLimits) {
  ScenarioConfig c = load_scenario(kSource + "/scenarios/fig7_like.scenario");
  EXPECT_THROW(oracle_solve(c), ConfigError);
  c.deterministic = true;
  EXPECT_THROW(oracle_solve(c), OracleSizeError);
}

TEST(Scenario, OracleSingleLink) {
  const ScenarioConfig c = parse_scenario(kMinimal);
  const World w = build_world(c);
  const double cap = std::log1p(w.channel.mean_snr(0));
  const OracleResult o = oracle_solve(c);
  // The price, near 1 / epsilon, scales the solver tolerance.
  EXPECT_NEAR(o.utility, std::log(cap + 1e-3), 1e-7);
  ASSERT_TRUE(o.grid_utility.has_value());
  EXPECT_NEAR(*o.grid_utility, o.utility, 1e-9);
}

TEST(Scenario, FullBackhaulAddsWiredLinks) {
  const ScenarioConfig c = load_scenario(kSource + "/scenarios/fig7_like.scenario");
  const World p = build_world(c, Mode::proposed);
  const World f = build_world(c, Mode::fbc);
  std::size_t picos_without = 0;
  for (NodeId n : p.graph.base_stations()) {
    picos_without += p.graph.node(n).kind == NodeKind::pico_bs && !p.graph.has_backhaul(n);
  }
  EXPECT_EQ(f.graph.num_links(), p.graph.num_links() + picos_without);
  for (NodeId n : f.graph.base_stations()) EXPECT_TRUE(f.graph.has_backhaul(n));
  for (std::size_t l = 0; l < p.graph.num_links(); ++l) {
    EXPECT_EQ(f.channel.large_scale_gain(l), p.channel.large_scale_gain(l));
  }
}

TEST(Scenario, BaselinesCoincideWhenTheyShould) {
  // Fixed channel: large-scale scheduling equals instantaneous scheduling.
  const ScenarioConfig c = load_scenario(kSource + "/scenarios/two_cell_small.scenario");
  EXPECT_NEAR(run_experiment(c, Mode::ttrsc).utility(), run_experiment(c, Mode::proposed).utility(), 1e-9);
  // Every pico already has backhaul: FBC changes nothing.
  std::string text = kMinimal;
  text.replace(text.find("U mu 30 0"), 9, "U mu 30 0\nP pico 2000 0");
  text.replace(text.find("[backhaul]\nM\n"), 13, "[backhaul]\nM P\n");
  const ScenarioConfig all = parse_scenario(text);
  EXPECT_EQ(build_world(all, Mode::fbc).graph.num_links(), build_world(all).graph.num_links());
  EXPECT_NEAR(run_experiment(all, Mode::fbc).utility(), run_experiment(all, Mode::proposed).utility(), 1e-12);
  // One feasible non-empty pattern: uniform time sharing is the proposed policy.
  EXPECT_NEAR(run_experiment(all, Mode::fddsa).utility(), run_experiment(all, Mode::proposed).utility(), 1e-7);
}

TEST(Scenario, SweepParameters) {
  ScenarioConfig c = parse_scenario(kMinimal);
  apply_parameter(c, "p_pico_dbm", 33);
  EXPECT_EQ(c.radio.p_pico_dbm, 33);
  EXPECT_THROW(apply_parameter(c, "colour", 1), ConfigError);
}
