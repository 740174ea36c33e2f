#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "canalplan/cli/config.hpp"
#include "canalplan/cli/pipeline.hpp"
#include "canalplan/cli/render.hpp"
#include "canalplan/error.hpp"
#include "canalplan/graph/graph_io.hpp"
#include "replan_fixture.hpp"

namespace fs = std::filesystem;
using namespace canalplan;
using namespace canalplan::cli;
using nlohmann::json;
using testing_support::BaseRun;
using testing_support::exact_remaining_coverage;
using testing_support::plan_bundled_subgraph;
using testing_support::replan_dir;

namespace {

const fs::path kData = CANALPLAN_DATA_DIR;
const fs::path kGolden = CANALPLAN_GOLDEN_DIR;

// Scratch directory removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("canalplan_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig minimal_config(const fs::path& out) {
  RunConfig c = load_config(kData / "minimal" / "config.json");
  c.output_dir = out;
  return c;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(CANALPLAN_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::set<std::string> stroke_colors(const std::string& svg) {
  std::set<std::string> out;
  const std::regex re("stroke=\"(#[0-9a-f]{6})\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
    out.insert((*it)[1]);
  return out;
}

}  // namespace

TEST(Config, ResolvesRelativePathsAgainstTheFile) {
  const RunConfig c = load_config(kData / "configs" / "fleet_3_3.json");
  EXPECT_EQ(c.canal_file, (kData / "sample_canal.json").lexically_normal());
  EXPECT_EQ(c.road_file, (kData / "sample_road.json").lexically_normal());
  EXPECT_EQ(c.K, 3);
  EXPECT_EQ(c.K_car, 3);
  EXPECT_EQ(c.M, 3);
  EXPECT_EQ(c.office, "office");
  EXPECT_EQ(c.seed, 7u);
}

TEST(Config, DefaultsAndRoundTrip) {
  const RunConfig c = config_from_json(json{{"canal", "/a.json"}, {"road", "/b.json"}, {"office", "o"}});
  EXPECT_EQ(c.K, 4);
  EXPECT_EQ(c.K_car, 2);
  EXPECT_EQ(c.M, 3);
  EXPECT_DOUBLE_EQ(c.w_c, 150.0);
  EXPECT_DOUBLE_EQ(c.R_max, 400.0);
  EXPECT_EQ(c.output_dir, fs::path("out"));
  c.validate();
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(Config, RejectsUnknownFieldsAndWrongTypes) {
  EXPECT_THROW(config_from_json(json{{"Kcar", 2}}), UsageError);
  EXPECT_THROW(config_from_json(json{{"K", "four"}}), UsageError);
  EXPECT_THROW(config_from_json(json::array()), UsageError);
}

TEST(Config, ValidateNamesTheField) {
  RunConfig c = config_from_json(json{{"canal", "/a"}, {"road", "/b"}, {"office", "o"}});
  c.M = 0;
  try {
    c.validate();
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("'M'"), std::string::npos);
  }
  c.M = 3;
  c.R_max = -1;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Config, BadJsonIsAParseError) {
  TempDir d("badcfg");
  graph::write_text_file_atomic(d.path / "c.json", "{\"K\": ");
  EXPECT_THROW(load_config(d.path / "c.json"), ParseError);
  EXPECT_THROW(load_config(d.path / "missing.json"), IoError);
}

TEST(InspectionMinutes, StepsPlusTransfers) {
  RunConfig c;
  const std::vector<int> two{3, 2};
  // 10 * (3 + 2) steps, 10 * (1 between + 2 to and from the office)
  EXPECT_DOUBLE_EQ(inspection_minutes(c, two), 80.0);
  const std::vector<int> one{1};
  EXPECT_DOUBLE_EQ(inspection_minutes(c, one), 30.0);
  c.unit_step_minutes = 4;
  c.transfer_minutes = 7;
  const std::vector<int> three{2, 2, 3};
  EXPECT_DOUBLE_EQ(inspection_minutes(c, three), 4.0 * 7 + 7.0 * 4);
}

TEST(Coverage, SummaryFromPlanFiles) {
  const auto canal = graph::parse_canal_graph(
      json{{"nodes",
            {{{"id", "a"}, {"lat", 52.0}, {"lon", 4.0}},
             {{"id", "b"}, {"lat", 52.001}, {"lon", 4.0}},
             {{"id", "c"}, {"lat", 52.002}, {"lon", 4.0}}}},
           {"edges", {{{"from", "a"}, {"to", "b"}}, {{"from", "b"}, {"to", "c"}}}}}
          .dump(),
      "<test>");
  const auto cover = [](const std::string& u, const std::string& v) {
    return json{{"edge", {u, v}}, {"t", 0}, {"uav", "u0"}, {"dir", 1}};
  };
  const std::vector<json> exact{json{{"coverage", {cover("a", "b")}}}, json{{"coverage", {cover("c", "b")}}}};
  const auto ok = summarize_coverage(canal, exact);
  EXPECT_TRUE(ok.exact());
  EXPECT_EQ(ok.covered, 2);
  EXPECT_EQ(ok.canal_edges, 2);

  const std::vector<json> bad{json{{"coverage", {cover("a", "b"), cover("b", "a"), cover("a", "c")}}}};
  const auto s = summarize_coverage(canal, bad);
  EXPECT_FALSE(s.exact());
  EXPECT_EQ(s.missing, std::vector<std::string>{"b-c"});
  EXPECT_EQ(s.duplicated, std::vector<std::string>{"a-b"});
  EXPECT_EQ(s.unknown, std::vector<std::string>{"a-c"});

  const std::vector<json> broken{json{{"uavs", json::array()}}};
  EXPECT_THROW(summarize_coverage(canal, broken), ParseError);
}

TEST(Pipeline, MinimalMapWritesEveryArtifact) {
  TempDir d("pipe");
  const PipelineResult r = run_pipeline(minimal_config(d.path), true);
  EXPECT_EQ(r.partition.partition.S, 1);
  ASSERT_EQ(r.plans.size(), 1u);
  EXPECT_EQ(r.plans[0].result.plan.T, 1);
  for (const char* f : {"partition.json", "plan_0.json", "tour.json", "report.json"})
    EXPECT_TRUE(fs::exists(d.path / f)) << f;
  const json report = read_json_file(d.path / "report.json");
  EXPECT_TRUE(report["coverage"]["exact"].get<bool>());
  EXPECT_EQ(report["S"], 1);
  EXPECT_EQ(report["horizons"], json::array({1}));
  EXPECT_DOUBLE_EQ(report["totalInspectionMinutes"].get<double>(), 30.0);
  EXPECT_TRUE(report["tour"]["optimal"].get<bool>());
  const json plan = read_json_file(d.path / "plan_0.json");
  EXPECT_EQ(plan["subgraph"], 0);
  EXPECT_EQ(plan_subgraph_index(plan, d.path / "plan_0.json"), 0);
}

TEST(Pipeline, ReportsTheFailingStage) {
  TempDir d("stage");
  RunConfig c = minimal_config(d.path);
  c.office = "nowhere";
  std::string stage;
  EXPECT_THROW(run_pipeline(c, true, &stage), UsageError);
  EXPECT_EQ(stage, "ingest");

  c = minimal_config(d.path);
  c.R_max = 5;  // no road node near the canal
  EXPECT_THROW(run_pipeline(c, true, &stage), PlanningError);
  EXPECT_EQ(stage, "planning");
  EXPECT_TRUE(fs::exists(d.path / "partition.json"));
  EXPECT_FALSE(fs::exists(d.path / "tour.json"));
}

TEST(Pipeline, PlanIndexFromFileName) {
  EXPECT_EQ(plan_subgraph_index(json::object(), "x/plan_12.json"), 12);
  EXPECT_EQ(plan_subgraph_index(json::object(), "x/plan_3_replan.json"), 3);
  EXPECT_THROW(plan_subgraph_index(json::object(), "x/p.json"), UsageError);
}

class Replan : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    base_ = new BaseRun(plan_bundled_subgraph("subgraph.json"));
    big_battery_ = new BaseRun(plan_bundled_subgraph("subgraph_m5.json"));
  }
  static void TearDownTestSuite() {
    delete base_;
    delete big_battery_;
  }
  static ReplanRun run(const BaseRun& b, const std::string& scenario) {
    const Scenario sc = scenario_from_json(b.instance, read_json_file(replan_dir() / scenario), b.ws.cfg.seed);
    return run_replan(b.instance, b.plan, sc, b.ws.cfg);
  }
  static inline BaseRun* base_ = nullptr;
  static inline BaseRun* big_battery_ = nullptr;
};

TEST_F(Replan, BundledSubgraphNeedsThreeSteps) {
  EXPECT_EQ(base_->instance.canal.edge_count(), 12);
  EXPECT_EQ(base_->plan.T, 3);
  EXPECT_EQ(big_battery_->plan.T, 3);
}

TEST_F(Replan, EdgesDoneCoversTheRest) {
  const ReplanRun r = run(*base_, "edges_done.json");
  EXPECT_EQ(r.instance.required_edges.size(), 8u);
  EXPECT_EQ(r.instance.M, 2);
  plan::verify_plan(r.instance, r.plan);
  EXPECT_EQ(exact_remaining_coverage(*base_, r, 1), "");
  for (int k = 0; k < base_->instance.K; ++k) EXPECT_EQ(r.plan.uav_paths[k][0], base_->plan.uav_paths[k][1]);
}

TEST_F(Replan, RoadClosureDropsTheArcs) {
  const ReplanRun r = run(*base_, "road_closure.json");
  const int a = *r.instance.road.index_of("rc16"), b = *r.instance.road.index_of("rc46");
  EXPECT_FALSE(r.instance.road.has_arc(a, b));
  EXPECT_FALSE(r.instance.road.has_arc(b, a));
  plan::verify_plan(r.instance, r.plan);
  EXPECT_EQ(exact_remaining_coverage(*base_, r, 1), "");
}

TEST_F(Replan, UavFailureLeavesThreeUavs) {
  const ReplanRun r = run(*big_battery_, "uav_failure.json");
  EXPECT_EQ(r.instance.K, 3);
  EXPECT_EQ(r.plan.uav_paths.size(), 3u);
  EXPECT_EQ(r.instance.uav_id(0), "u1");
  plan::verify_plan(r.instance, r.plan);
  EXPECT_EQ(exact_remaining_coverage(*big_battery_, r, 1), "");
}

TEST_F(Replan, UavFailureNeedsSpareBattery) {
  EXPECT_THROW(run(*base_, "uav_failure.json"), PlanningError);
}

TEST_F(Replan, SeveredRoadGivesAnActionableError) {
  try {
    run(*base_, "road_severed.json");
    FAIL() << "expected PlanningError";
  } catch (const PlanningError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("canal node"), std::string::npos) << msg;
    EXPECT_NE(msg.find("reopen"), std::string::npos) << msg;
  }
}

TEST_F(Replan, EmptyScenarioKeepsThePlan) {
  const ReplanRun r = run(*base_, "empty.json");
  EXPECT_TRUE(r.kept_previous);
  EXPECT_EQ(r.plan.T, base_->plan.T);
  EXPECT_EQ(r.plan.objective, base_->plan.objective);
  EXPECT_EQ(r.plan.uav_paths, base_->plan.uav_paths);
}

TEST_F(Replan, RandomFailureFollowsTheSeed) {
  const json j = json::parse(R"({"t_now": 1, "events": [{"type": "uavFailed", "uav": "random"}]})");
  const Scenario a = scenario_from_json(base_->instance, j, 7);
  const Scenario b = scenario_from_json(base_->instance, j, 7);
  ASSERT_EQ(a.events.failed_uavs.size(), 1u);
  EXPECT_EQ(a.events.failed_uavs, b.events.failed_uavs);
  EXPECT_GE(a.events.failed_uavs[0], 0);
  EXPECT_LT(a.events.failed_uavs[0], base_->instance.K);
}

TEST_F(Replan, ScenarioErrors) {
  const auto parse = [&](const char* text) { return scenario_from_json(base_->instance, json::parse(text), 1); };
  EXPECT_THROW(parse(R"({"events": [{"type": "meteor"}]})"), ParseError);
  EXPECT_THROW(parse(R"({"events": {}})"), ParseError);
  EXPECT_THROW(parse(R"({"t_now": "one"})"), ParseError);
  EXPECT_THROW(parse(R"({"events": [{"type": "uavFailed", "uav": "u9"}]})"), UsageError);
  EXPECT_THROW(parse(R"({"events": [{"type": "edgesInspected", "edges": [["c13", "c19"]]}]})"), UsageError);
  EXPECT_THROW(parse(R"({"events": [{"type": "roadArcsRemoved", "arcs": [["rc0", "rc1"]]}]})"), UsageError);
  EXPECT_TRUE(parse(R"({"t_now": 0, "events": []})").empty());
}

TEST(Bench, NodeCountsRepeat) {
  const RunConfig c = load_config(replan_dir() / "subgraph.json");
  const BenchRow a = bench_once(c, "a");
  const BenchRow b = bench_once(c, "b");
  EXPECT_EQ(a.S, 1);
  EXPECT_EQ(a.steps, 3);
  EXPECT_DOUBLE_EQ(a.minutes, 50.0);
  EXPECT_EQ(a.partition_nodes, b.partition_nodes);
  EXPECT_EQ(a.planning_nodes, b.planning_nodes);
  EXPECT_EQ(a.routing_nodes, b.routing_nodes);
  const std::vector<BenchRow> rows{a, b};
  const std::string table = format_bench(rows);
  for (const char* col : {"partition_s", "planning_s", "slowest_s", "routing_s", "total_s"})
    EXPECT_NE(table.find(col), std::string::npos) << col;
}

TEST(Render, MatchesGoldenFiles) {
  const Workspace ws = load_workspace(load_config(replan_dir() / "subgraph.json"));
  for (const char* name : {"partition", "plan_0", "tour"}) {
    const json artifact = read_json_file(kGolden / (std::string(name) + ".json"));
    const Rendering r = render_artifact(ws.graphs.canal, ws.graphs.road, ws.office, artifact);
    EXPECT_EQ(r.dot, graph::read_text_file(kGolden / (std::string(name) + ".dot"))) << name;
    EXPECT_EQ(r.svg, graph::read_text_file(kGolden / (std::string(name) + ".svg"))) << name;
  }
}

TEST(Render, OneColourPerSubgraph) {
  const Workspace ws = load_workspace(load_config(kData / "configs" / "fleet_4_2.json"));
  const auto part = run_partition(ws).partition;
  const Rendering r = render_partition(ws.graphs.canal, partition::to_json(ws.graphs.canal, part));
  EXPECT_EQ(static_cast<int>(stroke_colors(r.svg).size()), part.S);
  std::set<std::string> table;
  for (int i = 0; i < 40; ++i) table.insert(subgraph_color(i));
  EXPECT_EQ(table.size(), 40u);
}

TEST(Render, OneColourPerUav) {
  const Workspace ws = load_workspace(load_config(replan_dir() / "subgraph.json"));
  const Rendering r = render_plan(ws.graphs.canal, ws.graphs.road, read_json_file(kGolden / "plan_0.json"));
  const auto colors = stroke_colors(r.svg);
  std::set<std::string> uav;
  for (int k = 0; k < 4; ++k) uav.insert(uav_color(k));
  EXPECT_EQ(uav.size(), 4u);
  for (const auto& c : uav) EXPECT_TRUE(colors.count(c)) << c;
  EXPECT_THROW(render_artifact(ws.graphs.canal, ws.graphs.road, ws.office, json{{"what", 1}}), UsageError);
}

TEST(ExitCodes, MapErrorKinds) {
  TempDir d("exit");
  const std::string minimal = (kData / "minimal" / "config.json").string();
  const std::string out = " --output " + (d.path / "out").string();
  EXPECT_EQ(run_binary("pipeline --config " + minimal + out), 0);
  EXPECT_EQ(run_binary("pipeline"), 2);
  EXPECT_EQ(run_binary("pipeline --config " + minimal + out + " --K 0"), 2);
  EXPECT_EQ(run_binary("pipeline --config " + minimal + out + " --office nowhere"), 2);
  EXPECT_EQ(run_binary("pipeline --config " + minimal + out + " --canal " + (d.path / "none.json").string()), 4);
  graph::write_text_file_atomic(d.path / "bad.json", "{");
  EXPECT_EQ(run_binary("pipeline --config " + (d.path / "bad.json").string()), 4);
  EXPECT_EQ(run_binary("pipeline --config " + minimal + out + " --R-max 5"), 3);
}

TEST(ExitCodes, EmptyScenarioRewritesTheSameBytes) {
  TempDir d("empty");
  const std::string cfg = (replan_dir() / "subgraph.json").string();
  ASSERT_EQ(run_binary("pipeline --config " + cfg + " --output " + d.path.string()), 0);
  const fs::path plan = d.path / "plan_0.json";
  const fs::path again = d.path / "again.json";
  ASSERT_EQ(run_binary("replan --config " + cfg + " --output " + d.path.string() + " --plan " + plan.string() +
                       " --scenario " + (replan_dir() / "empty.json").string() + " --out " + again.string()),
            0);
  EXPECT_EQ(graph::read_text_file(plan), graph::read_text_file(again));
  EXPECT_EQ(run_binary("replan --config " + cfg + " --output " + d.path.string() + " --plan " + plan.string() +
                       " --scenario " + (replan_dir() / "road_severed.json").string() + " --out " + again.string()),
            3);
}
