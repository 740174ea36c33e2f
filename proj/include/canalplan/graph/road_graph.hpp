#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "canalplan/graph/geo.hpp"

namespace canalplan::graph {

struct RoadEdge {
  int from = 0;
  int to = 0;
  double length_m = 0.0;
  bool oneway = false;
};

struct Arc {
  int from = 0;
  int to = 0;
  double length_m = 0.0;
};

// Directed weighted road network. Two-way input edges become two arcs of
// equal length. Parallel arcs collapse to the shortest one.
class RoadGraph {
 public:
  RoadGraph() = default;

  static RoadGraph from_parts(std::vector<GeoNode> nodes,
                              std::span<const RoadEdge> edges);
  static RoadGraph from_arcs(std::vector<GeoNode> nodes, std::vector<Arc> arcs);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int arc_count() const { return static_cast<int>(arcs_.size()); }
  const std::vector<GeoNode>& nodes() const { return nodes_; }
  const GeoNode& node(int i) const { return nodes_[i]; }
  const std::vector<Arc>& arcs() const { return arcs_; }

  std::optional<int> index_of(const std::string& id) const;
  bool has_arc(int from, int to) const;

  // Arcs leaving `node`, ordered by head index.
  std::span<const Arc> out_arcs(int node) const {
    return {arcs_.data() + offsets_[node], arcs_.data() + offsets_[node + 1]};
  }

  // Induced subgraph; `keep` lists node indices of this graph, and the result
  // orders nodes as they appear in this graph.
  RoadGraph induced(std::span<const int> keep) const;
  RoadGraph without_arcs(std::span<const std::pair<int, int>> removed) const;

  // Two-way pairs folded back into single edges (for serialization).
  std::vector<RoadEdge> edges() const;

 private:
  void index();

  std::vector<GeoNode> nodes_;
  std::vector<Arc> arcs_;  // sorted by (from, to)
  std::unordered_map<std::string, int> by_id_;
  std::vector<int> offsets_;
};

}  // namespace canalplan::graph
