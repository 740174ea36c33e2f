#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "canalplan/graph/geo.hpp"

namespace canalplan::graph {

struct CanalEdge {
  int a = 0;
  int b = 0;
  double weight_m = 0.0;
};

struct Incidence {
  int neighbor = 0;
  int edge = 0;
};

// Undirected weighted tree of canal segments; the domain UAVs fly over.
// Instances are immutable and always valid: construction throws ModelError
// on duplicate ids, bad coordinates, self-loops, duplicate edges, cycles or
// disconnected components.
class CanalGraph {
 public:
  CanalGraph() = default;

  static CanalGraph from_parts(std::vector<GeoNode> nodes,
                               std::vector<CanalEdge> edges);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  const std::vector<GeoNode>& nodes() const { return nodes_; }
  const GeoNode& node(int i) const { return nodes_[i]; }
  const std::vector<CanalEdge>& edges() const { return edges_; }
  const CanalEdge& edge(int e) const { return edges_[e]; }

  std::optional<int> index_of(const std::string& id) const;
  // Edge joining two node indices, in either orientation.
  std::optional<int> edge_between(int a, int b) const;

  std::span<const Incidence> incident(int node) const {
    return {incidence_.data() + offsets_[node],
            incidence_.data() + offsets_[node + 1]};
  }
  int degree(int node) const { return offsets_[node + 1] - offsets_[node]; }

  double total_weight() const;
  std::vector<int> leaves() const;

  // Tree spanned by the given edges. Node order follows this graph's order.
  // Throws ModelError if the edges do not form a connected subtree.
  CanalGraph edge_subgraph(std::span<const int> edge_indices) const;

 private:
  void index();

  std::vector<GeoNode> nodes_;
  std::vector<CanalEdge> edges_;
  std::unordered_map<std::string, int> by_id_;
  std::vector<int> offsets_;
  std::vector<Incidence> incidence_;
};

// Subdivides every edge of weight w into ceil(w / target_m) equal pieces,
// inserting interpolated nodes named "<a>~<b>#<k>". Total weight and the
// leaf set are preserved.
CanalGraph normalize_canal_edges(const CanalGraph& g, double target_m);

}  // namespace canalplan::graph
