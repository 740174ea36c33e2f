#pragma once

#include <string>

#include <json.hpp>

#include "canalplan/graph/canal_graph.hpp"
#include "canalplan/graph/road_graph.hpp"

namespace canalplan::cli {

struct Rendering {
  std::string dot;
  std::string svg;
};

// Colour i of the subgraph table (golden-angle hues, so any count stays
// distinct) and of the fixed UAV / car tables.
std::string subgraph_color(int i);
std::string uav_color(int i);
std::string car_color(int i);

// Node positions come from planar coordinates, so renders are stable for
// identical inputs.
Rendering render_partition(const graph::CanalGraph& canal, const nlohmann::json& partition);
// UAV paths coloured per UAV, car paths per car, comm links dashed.
Rendering render_plan(const graph::CanalGraph& canal, const graph::RoadGraph& road, const nlohmann::json& plan);
Rendering render_tour(const graph::RoadGraph& road, const nlohmann::json& tour, int office);

// Picks the renderer from the artifact's keys; UsageError when unknown.
Rendering render_artifact(const graph::CanalGraph& canal, const graph::RoadGraph& road, int office,
                          const nlohmann::json& artifact);

}  // namespace canalplan::cli
