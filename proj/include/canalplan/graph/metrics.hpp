#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "canalplan/graph/canal_graph.hpp"
#include "canalplan/graph/road_graph.hpp"

namespace canalplan::graph {

// Row-major 0/1 matrix. Shared representation for adjacency and
// transmission matrices.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(int rows, int cols) : rows_(rows), cols_(cols), bits_(static_cast<size_t>(rows) * cols, 0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool operator()(int r, int c) const { return bits_[static_cast<size_t>(r) * cols_ + c] != 0; }
  void set(int r, int c, bool v = true) { bits_[static_cast<size_t>(r) * cols_ + c] = v ? 1 : 0; }
  std::vector<int> row_support(int r) const;
  std::vector<int> col_support(int c) const;
  int count() const;

  bool operator==(const BitMatrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// A(i,j) = 1 iff an arc i -> j exists, or i == j when self loops are on.
struct AdjacencyMatrix {
  BitMatrix bits;
  bool self_loops = false;
};

AdjacencyMatrix canal_adjacency(const CanalGraph& g, bool self_loops);
// `hops` > 1 replaces each arc relation by reachability within that many
// arcs (always including self loops for hops > 1).
AdjacencyMatrix road_adjacency(const RoadGraph& g, bool self_loops, int hops = 1);

// R(i,j) = 1 iff road node i is within range_m of canal node j.
struct TransmissionMatrix {
  BitMatrix bits;  // road x canal
  double range_m = 0.0;
};

TransmissionMatrix transmission_matrix(const RoadGraph& road, const CanalGraph& canal,
                                       double range_m);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct ShortestPathTree {
  int source = 0;
  std::vector<double> distance;  // kUnreachable when no path
  std::vector<int> parent;       // -1 at the source and unreachable nodes

  // Node sequence source .. target, empty if unreachable.
  std::vector<int> path_to(int target) const;
};

ShortestPathTree dijkstra(const RoadGraph& g, int source);

// d(i, j) over the given source/target road node indices.
struct DistanceTable {
  std::vector<int> sources;
  std::vector<int> targets;
  std::vector<double> values;  // sources.size() x targets.size()

  double operator()(int i, int j) const { return values[static_cast<size_t>(i) * targets.size() + j]; }
};

DistanceTable shortest_path_matrix(const RoadGraph& g, std::span<const int> sources,
                                   std::span<const int> targets);

// Strongly connected components (Tarjan). Component ids are dense; returns
// one id per node.
std::vector<int> strongly_connected_components(const RoadGraph& g);

// Induced road subgraph on nodes within range_m + margin_m of any of the
// canal nodes, restricted to its largest strongly connected component (ties:
// the component holding the lowest node index). Throws CoverageError when no
// road node is in range.
RoadGraph trim_road_subgraph(const RoadGraph& road, std::span<const GeoNode> canal_nodes,
                             double range_m, double margin_m);

}  // namespace canalplan::graph
