#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "canalplan/bqp/model.hpp"
#include "canalplan/graph/canal_graph.hpp"
#include "canalplan/solver/solve.hpp"

namespace canalplan::partition {

// Auto runs the exact tree split whenever it applies and falls back to the
// binary program otherwise. Program always goes through branch and bound
// (the dense LP makes that slow beyond a few hundred variables).
enum class PartitionEngine { Auto, TreeSplit, Program };

struct PartitionSpec {
  int K = 1;                  // UAVs
  int M = 1;                  // edges per battery charge
  int size_lower_bound = 0;   // 0 means K
  int max_subgraphs = 0;      // 0 means the edge count
  double time_limit_s = 600;  // per probed S
  PartitionEngine engine = PartitionEngine::Auto;
  bool use_tree_start = true; // seed each probe with the tree split below

  int lower() const { return size_lower_bound > 0 ? size_lower_bound : K; }
  int upper() const { return K * M; }
};

struct Subgraph {
  std::vector<int> edges;  // canal edge indices, ascending
  std::vector<int> nodes;  // canal node indices, ascending
};

struct Partition {
  int S = 0;
  std::vector<int> edge_subgraph;  // edge -> subgraph
  std::vector<Subgraph> subgraphs;
  std::int64_t objective = 0;      // sum over subgraphs of node count squared
};

int initial_subgraph_count(int edge_count, int K, int M);

// Variable layout shared by both program forms: x(s,i) first, then w(s,e),
// then (size-indexed form only) u(s,n) for node counts n in [L+1, U+1].
class PartitionProgram {
 public:
  const bqp::BinaryProgram& program() const { return program_; }
  int S() const { return S_; }
  bqp::VarId x(int s, int i) const { return {static_cast<std::uint32_t>(s * nodes_ + i)}; }
  bqp::VarId w(int s, int e) const {
    return {static_cast<std::uint32_t>(S_ * nodes_ + s * edges_ + e)};
  }
  bool size_indexed() const { return size_hi_ >= size_lo_; }

  std::vector<std::uint8_t> encode(const graph::CanalGraph& g, std::span<const int> edge_subgraph) const;
  // Edge -> subgraph from a feasible assignment.
  std::vector<int> decode(std::span<const std::uint8_t> assignment) const;

 private:
  friend PartitionProgram build_partition_program(const graph::CanalGraph&, int, const PartitionSpec&);
  friend PartitionProgram build_size_indexed_program(const graph::CanalGraph&, int, const PartitionSpec&);

  bqp::BinaryProgram program_;
  int S_ = 0;
  int nodes_ = 0;
  int edges_ = 0;
  int size_lo_ = 1;  // node-count range of the u block
  int size_hi_ = 0;
};

// The partition program as stated: objective sum_s (sum_i x_si)^2 and rows
//   E  rows  sum_s w_se = 1
//   2S rows  L <= sum_e w_se  and  sum_e w_se <= U
//   S  rows  sum_i x_si - sum_e w_se = 1
//   SE rows  x_si + x_sj - 2 w_se >= 0
// with S(N+E) variables. The objective is quadratic; linearize to solve.
PartitionProgram build_partition_program(const graph::CanalGraph& canal, int S, const PartitionSpec& spec);

// Equivalent linear program used by partition_canal. Each subgraph gets a
// one-hot size indicator u(s,n) with sum_i x_si = sum_n n u(s,n), so
// (sum_i x_si)^2 becomes sum_n n^2 u(s,n) exactly on binary points. Rows
// w(s,e) <= sum_{e'<e} w(s-1,e') order subgraphs by their lowest edge, which
// removes relabelings of the same partition. Same feasible partitions, same
// objective values.
PartitionProgram build_size_indexed_program(const graph::CanalGraph& canal, int S, const PartitionSpec& spec);

// Exact dynamic program over the rooted tree: a split into exactly S
// connected pieces with L..U edges each that minimises sum (edges+1)^2, ties
// broken towards fewer branch points inside pieces. nullopt when no split
// exists, or when a node has more than 12 children (not attempted, see
// tree_split_applies).
std::optional<std::vector<int>> tree_split(const graph::CanalGraph& canal, int S, int L, int U);
bool tree_split_applies(const graph::CanalGraph& canal);

// Subgraph lists from an edge assignment; subgraphs are numbered by their
// lowest edge index.
Partition make_partition(const graph::CanalGraph& canal, std::span<const int> edge_subgraph);

// Independent structural check (coverage, size bounds, connectivity by
// traversal, node sets). Throws PartitionError naming the violation.
void verify_partition(const graph::CanalGraph& canal, const Partition& p, int L, int U);

struct Probe {
  int S = 0;
  solver::SolveStatus status = solver::SolveStatus::Infeasible;
  bool undecided = false;  // timed out without a feasible point
  bool start_found = false;
  bool by_tree_split = false;  // decided without the solver
  std::int64_t nodes = 0;
  double seconds = 0.0;
};

struct PartitionResult {
  Partition partition;
  std::vector<Probe> probes;
};

// Searches S = initial count, initial+1, ... up to spec.max_subgraphs and
// returns the first feasible S with its optimal partition. Throws
// PartitionError when no S in range is feasible.
PartitionResult partition_canal(const graph::CanalGraph& canal, const PartitionSpec& spec,
                                solver::SolveConfig base = {});

nlohmann::json to_json(const graph::CanalGraph& canal, const Partition& p);
// Throws ParseError on schema problems and PartitionError on unknown edges.
Partition partition_from_json(const graph::CanalGraph& canal, const nlohmann::json& j);

}  // namespace canalplan::partition
