#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "canalplan/graph/canal_graph.hpp"
#include "canalplan/graph/road_graph.hpp"

namespace canalplan::graph {

// Graph files share one schema:
//   {"nodes": [{"id": str, "lat": num, "lon": num}],
//    "edges": [{"from": str, "to": str, "weight_m": num?, "oneway": bool?}]}
// weight_m defaults to the planar distance between the endpoints. "oneway"
// is accepted in road files only.

CanalGraph parse_canal_graph(const std::string& text, const std::string& source = "<canal>");
RoadGraph parse_road_graph(const std::string& text, const std::string& source = "<road>");

CanalGraph read_canal_graph(const std::filesystem::path& path);
RoadGraph read_road_graph(const std::filesystem::path& path);

struct GraphPair {
  CanalGraph canal;
  RoadGraph road;
};

GraphPair ingest_graphs(const std::filesystem::path& canal_file,
                        const std::filesystem::path& road_file);

nlohmann::json to_json(const CanalGraph& g);
nlohmann::json to_json(const RoadGraph& g);

std::string read_text_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames it into place.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace canalplan::graph
