#pragma once

// The bundled 12-edge subgraph under data/replan, planned in process, plus a
// check that a revised plan covers exactly what was left.

#include <filesystem>
#include <set>
#include <string>

#include "canalplan/cli/pipeline.hpp"

namespace testing_support {

struct BaseRun {
  canalplan::cli::Workspace ws;
  canalplan::partition::Partition partition;
  canalplan::plan::PlanningInstance instance;
  canalplan::plan::FleetPlan plan;
};

inline std::filesystem::path replan_dir() { return std::filesystem::path(CANALPLAN_DATA_DIR) / "replan"; }

inline BaseRun plan_bundled_subgraph(const std::string& config_name) {
  using namespace canalplan;
  BaseRun b;
  b.ws = cli::load_workspace(cli::load_config(replan_dir() / config_name));
  b.partition = cli::run_partition(b.ws).partition;
  b.instance = cli::subgraph_instance(b.ws, b.partition, 0);
  b.plan = plan::plan_subgraph(b.instance, cli::plan_options(b.ws.cfg)).plan;
  return b;
}

// Every edge left in the re-planning instance is covered exactly once and
// nothing else is; together with the edges flown before t_now that is the
// whole subgraph.
inline std::string exact_remaining_coverage(const BaseRun& base, const canalplan::cli::ReplanRun& r, int t_now) {
  std::multiset<int> flown;
  for (const auto& c : r.plan.coverage) flown.insert(c.edge);
  const std::set<int> left(r.instance.required_edges.begin(), r.instance.required_edges.end());
  for (int e : left)
    if (flown.count(e) != 1) return "edge " + std::to_string(e) + " covered " + std::to_string(flown.count(e)) + " times";
  for (int e : flown)
    if (!left.count(e)) return "edge " + std::to_string(e) + " was already inspected";
  std::set<int> all(left);
  for (const auto& c : base.plan.coverage)
    if (c.t < t_now) all.insert(c.edge);
  if (static_cast<int>(all.size()) != base.instance.canal.edge_count()) return "some edge is neither done nor planned";
  return {};
}

}  // namespace testing_support
