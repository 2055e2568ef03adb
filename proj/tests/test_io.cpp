#include <gtest/gtest.h>

#include <sstream>

#include "dlsched/experiment.hpp"
#include "dlsched/io.hpp"
#include "fixtures.hpp"

using namespace dlsched;
using namespace testing_fixtures;
using nlohmann::json;

namespace {

json minimal_config() {
  return json::parse(R"({
    "schema_version": 1,
    "network": {"nodes": ["u", "v"], "links": [{"tail": "u", "head": "v", "capacity": 2}]},
    "horizon": 50,
    "types": [{"source": "u", "destination": "v", "deadline": 1, "rate": 0.5}],
    "schedulers": ["FBPF", "GLS-FP", {"kind": "DLPF-FIXED", "phase_len": 20}]
  })");
}

}  // namespace

TEST(ConfigHash, StableAndSensitive) {
  const auto a = minimal_config();
  EXPECT_EQ(io::config_hash(a), io::config_hash(json::parse(a.dump())));
  EXPECT_EQ(io::config_hash(a).size(), 16u);
  auto b = a;
  b["horizon"] = 51;
  EXPECT_NE(io::config_hash(a), io::config_hash(b));
  // Key order in the source text does not matter.
  EXPECT_EQ(io::config_hash(json::parse(R"({"a":1,"b":2})")), io::config_hash(json::parse(R"({"b":2,"a":1})")));
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(io::fmt(0.5), "0.5");
  EXPECT_EQ(io::fmt(1.0), "1");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(io::fmt(x)), x);
}

TEST(TableJson, RoundTripAndFloor) {
  const SelfLoopView view(four_node());
  const std::vector<PacketTypeSpec> types{{kU, kV, 2, 1.0}};
  auto t = three_route_table(view);
  t.at(0, kBV, 1) = 1e-12;
  t.objective = 0.25;
  t.config_hash = "abc";
  const auto j = io::table_to_json(t, view, 7);
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("entries").size(), 6u);
  EXPECT_EQ(j.at("entries").at(0).at("link"), json::array({"u", "a"}));
  const auto back = io::table_from_json(j, view, types);
  t.at(0, kBV, 1) = 0.0;
  EXPECT_EQ(back.raw(0), t.raw(0));
  EXPECT_EQ(back.objective, 0.25);
  EXPECT_EQ(back.config_hash, "abc");
}

TEST(TableJson, RejectsUnknownLinks) {
  const SelfLoopView view(four_node());
  const std::vector<PacketTypeSpec> types{{kU, kV, 2, 1.0}};
  auto j = io::table_to_json(three_route_table(view), view);
  j["entries"][0]["link"] = json::array({"v", "u"});
  EXPECT_THROW(io::table_from_json(j, view, types), ConfigError);
}

TEST(ArrivalsCsv, RoundTrip) {
  const auto m = sample_arrivals({process::Poisson{2.0}, process::Bernoulli{0.4}}, 30, 3);
  const auto text = io::arrivals_to_csv(m, "deadbeef", 3);
  EXPECT_EQ(text.rfind("# schema_version=1 config_hash=deadbeef seed=3\nslot,type0,type1\n", 0), 0u);
  std::istringstream in(text);
  EXPECT_EQ(io::arrivals_from_csv(in), m);
  std::istringstream bad("slot,type0\n0,x\n");
  EXPECT_THROW(io::arrivals_from_csv(bad), ParseError);
}

TEST(SimCsv, RowMatchesHeader) {
  SimResult r;
  r.config_hash = "h";
  r.seed = 4;
  r.scheduler = "FBPF";
  r.reward = 2.5;
  r.counters = {{3, 2, 2, 1, 0, 0, 0}};
  const auto header = io::sim_csv_header();
  const auto row = io::sim_csv_row(r);
  EXPECT_EQ(row, "h,4,FBPF,2.5,3,2,2,1,0,0,0\n");
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  const auto j = io::sim_result_to_json(r);
  EXPECT_EQ(j.at("counters").at(0).at("arrived"), 3);
  EXPECT_EQ(j.at("config_hash"), "h");
}

TEST(ParseConfig, Minimal) {
  const auto c = parse_config(minimal_config());
  EXPECT_EQ(c.types.size(), 1u);
  EXPECT_EQ(c.rates, std::vector<double>{0.5});
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{0});
  ASSERT_EQ(c.schedulers.size(), 3u);
  EXPECT_EQ(scheduler_label(c.schedulers[0]), "FBPF");
  EXPECT_EQ(scheduler_label(c.schedulers[1]), "GLS-FP");
  EXPECT_EQ(scheduler_label(c.schedulers[2]), "DLPF-20");
  EXPECT_EQ(c.hash, io::config_hash(minimal_config()));
}

TEST(ParseConfig, Errors) {
  auto j = minimal_config();
  j["schema_version"] = 2;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = minimal_config();
  j["types"][0]["source"] = "q";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = minimal_config();
  j["types"][0].erase("rate");
  EXPECT_THROW(parse_config(j), ConfigError);
  j = minimal_config();
  j["epsilon"] = 1.5;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = minimal_config();
  j["schedulers"] = json::array({"EDF"});
  EXPECT_THROW(parse_config(j), ConfigError);
  j = minimal_config();
  j["sweep"] = {{"axis", "weight"}, {"values", {1}}};
  EXPECT_THROW(parse_config(j), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(ParseConfig, GeneratorIsDeterministic) {
  auto j = minimal_config();
  j.erase("types");
  j["network"] = std::string("net_ring8.json");
  j["generator"] = {{"count", 6}, {"rate", {0, 2}}, {"deadline", 4}, {"seed", 9}};
  const auto a = parse_config(j, DLSCHED_CONFIG_DIR);
  const auto b = parse_config(j, DLSCHED_CONFIG_DIR);
  ASSERT_EQ(a.types.size(), 6u);
  EXPECT_EQ(a.rates, b.rates);
  for (std::size_t k = 0; k < a.types.size(); ++k) {
    EXPECT_NE(a.types[k].source, a.types[k].destination);
    EXPECT_EQ(a.types[k].source, b.types[k].source);
    EXPECT_GE(a.rates[k], 0.0);
    EXPECT_LE(a.rates[k], 2.0);
  }
}

TEST(ParseSeeds, CountAndList) {
  EXPECT_EQ(parse_seeds(std::string("3")), (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(parse_seeds(std::string("4,9")), (std::vector<std::uint64_t>{4, 9}));
  EXPECT_THROW(parse_seeds(std::string("x")), ConfigError);
  EXPECT_THROW(parse_seeds(std::string("0")), ConfigError);
}

TEST(Sweep, LabelsAndPoints) {
  EXPECT_EQ(sweep_label(json(4)), "4");
  EXPECT_EQ(sweep_label(json::array({3, 5})), "3:5");
  EXPECT_EQ(sweep_label(json("poisson")), "poisson");
  auto j = minimal_config();
  j["capacity"] = 1;
  j["sweep"] = {{"axis", "capacity"}, {"values", {1, 7}}};
  const auto c = parse_config(j);
  const auto p = at_sweep_point(c, json(7));
  EXPECT_EQ(p.network.links()[0].capacity, 7);
}

TEST(Experiment, RunPointIsReproducible) {
  const auto c = parse_config(minimal_config());
  const auto a = run_point(c);
  const auto b = run_point(c, 2);
  ASSERT_EQ(a.schedulers.size(), 3u);
  for (std::size_t k = 0; k < a.schedulers.size(); ++k) {
    EXPECT_EQ(a.schedulers[k].rewards, b.schedulers[k].rewards);
    EXPECT_LE(a.schedulers[k].mean_ratio, 1.0);
  }
}

// Degenerate per-phase programs at this point once stalled the solver and
// silently lost seeds.
TEST(Experiment, CapacitySweepPointKeepsEverySeed) {
  auto c = load_config(std::filesystem::path(DLSCHED_CONFIG_DIR) / "sweep_capacity.json");
  c.schedulers.erase(std::remove_if(c.schedulers.begin(), c.schedulers.end(),
                                    [](const SchedulerSpec& s) { return s.kind != SchedulerKind::DlpfExp &&
                                                                        s.kind != SchedulerKind::DlpfFixed; }),
                     c.schedulers.end());
  ASSERT_EQ(c.schedulers.size(), 2u);
  const auto point = run_point(at_sweep_point(c, json(19)));
  for (const auto& s : point.schedulers) {
    EXPECT_EQ(s.error, "") << s.scheduler;
    EXPECT_EQ(s.rewards.size(), c.seeds.size()) << s.scheduler;
  }
}
