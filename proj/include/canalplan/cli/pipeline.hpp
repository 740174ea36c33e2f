#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "canalplan/cli/config.hpp"
#include "canalplan/graph/graph_io.hpp"
#include "canalplan/partition/partition.hpp"
#include "canalplan/plan/fleet_plan.hpp"
#include "canalplan/route/routing.hpp"

namespace canalplan::cli {

// Graphs as the planners see them: canal edges normalized to w_c.
struct Workspace {
  RunConfig cfg;
  graph::GraphPair graphs;
  int office = -1;  // road node index
};

// Throws UsageError when the office is not a road node.
Workspace load_workspace(const RunConfig& cfg);

partition::PartitionResult run_partition(const Workspace& ws);

plan::PlanningInstance subgraph_instance(const Workspace& ws, const partition::Partition& p, int s);
plan::PlanOptions plan_options(const RunConfig& cfg);

struct SubgraphRun {
  plan::PlanningInstance instance;
  plan::PlanResult result;
  double seconds = 0.0;
};

// Plans every subgraph on up to cfg.jobs threads. The first failure is
// rethrown after all workers stop; `done` sees each finished subgraph.
std::vector<SubgraphRun> run_planning(const Workspace& ws, const partition::Partition& p,
                                      const std::function<void(int, const SubgraphRun&)>& done = {});

struct RoutingRun {
  route::QMatrix Q;
  route::TourPlan tour;
};

RoutingRun run_routing(const Workspace& ws, std::span<const SubgraphRun> plans);

// Edge coverage read from plan JSON alone (node id pairs).
struct CoverageSummary {
  int canal_edges = 0;
  int covered = 0;
  std::vector<std::string> missing;     // "a-b"
  std::vector<std::string> duplicated;
  std::vector<std::string> unknown;     // covered pairs that are not canal edges
  bool exact() const { return missing.empty() && duplicated.empty() && unknown.empty(); }
};

CoverageSummary summarize_coverage(const graph::CanalGraph& canal, std::span<const nlohmann::json> plans);

// unitStepMinutes * sum T_s + transferMinutes * (S - 1 + 2): every step of
// every subgraph plus the legs between subgraphs and to and from the office.
double inspection_minutes(const RunConfig& cfg, std::span<const int> horizons);

struct StageTimes {
  double partition = 0.0;
  std::vector<double> planning;
  double routing = 0.0;
  double total = 0.0;
};

struct PipelineResult {
  Workspace ws;
  partition::PartitionResult partition;
  std::vector<SubgraphRun> plans;
  RoutingRun routing;
  StageTimes times;
  nlohmann::json report;
};

// Ingest, partition, plan, route. With `write` the artifacts partition.json,
// plan_<s>.json, tour.json and report.json land in cfg.output_dir as each
// stage finishes (atomically), so a failure keeps what came before it.
// `stage` names the running stage (for diagnostics after a throw).
PipelineResult run_pipeline(const RunConfig& cfg, bool write, std::string* stage = nullptr,
                            const std::function<void(const std::string&)>& log = {});

std::filesystem::path plan_file_name(int s);

// Stage-wise commands read earlier artifacts from cfg.output_dir.
partition::Partition read_partition(const Workspace& ws);
plan::FleetPlan read_plan(const plan::PlanningInstance& inst, const std::filesystem::path& file);

// Scenario file:
//   {"t_now": 1, "events": [{"type": "edgesInspected", "edges": [["a","b"], ...]},
//                           {"type": "roadArcsRemoved", "arcs": [["r1","r2"], ...]},
//                           {"type": "uavFailed", "uav": "u2"},
//                           {"type": "carDelayed", "car": "car0"}]}
// "uav": "random" picks a UAV with the config seed. Road arcs name both
// directions when "bothWays" is true.
struct Scenario {
  int t_now = 0;
  plan::ReplanEvents events;
  bool empty() const;
};

// Ids resolve against the instance; ParseError on schema problems,
// UsageError on unknown ids.
Scenario scenario_from_json(const plan::PlanningInstance& inst, const nlohmann::json& j, std::uint64_t seed,
                            const std::string& source = "<scenario>");

struct ReplanRun {
  plan::PlanningInstance instance;  // the re-planning instance
  plan::FleetPlan plan;
  double seconds = 0.0;
  bool kept_previous = false;       // nothing changed and the old plan is still optimal
};

// With t_now = 0 and no events the previous plan is returned unchanged when
// the fresh optimum matches it in T and objective.
ReplanRun run_replan(const plan::PlanningInstance& inst, const plan::FleetPlan& previous, const Scenario& scenario,
                     const RunConfig& cfg);

// Subgraph index of a plan file: its "subgraph" field, else the number in
// plan_<s>.json.
int plan_subgraph_index(const nlohmann::json& plan, const std::filesystem::path& file);

// One bench run: stage wall times (partition, subgraph planning, car
// routing, total) plus solver node counts, which repeat exactly under a
// fixed config.
struct BenchRow {
  std::string label;
  StageTimes times;
  int S = 0;
  int steps = 0;  // sum of horizons
  double minutes = 0.0;
  std::int64_t partition_nodes = 0;
  std::int64_t planning_nodes = 0;
  std::int64_t routing_nodes = 0;
};

BenchRow bench_once(const RunConfig& cfg, const std::string& label);
// Fixed-width table; planning time is the sum over subgraphs, with the
// slowest subgraph in its own column.
std::string format_bench(std::span<const BenchRow> rows);

nlohmann::json read_json_file(const std::filesystem::path& file);
void write_json_file(const std::filesystem::path& file, const nlohmann::json& j);

}  // namespace canalplan::cli
