#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "canalplan/bqp/model.hpp"
#include "canalplan/graph/metrics.hpp"
#include "canalplan/graph/road_graph.hpp"
#include "canalplan/plan/fleet_plan.hpp"
#include "canalplan/solver/solve.hpp"

namespace canalplan::route {

// Minimum-cost perfect matching of leave slots (rows) to start slots
// (columns) of a K x K table; kUnreachable marks missing paths.
struct Matching {
  double cost = 0.0;
  std::vector<int> to;  // to[i] = start slot taken by leave slot i
};

// Solved as the assignment binary program (costs quantised to millimetres).
// Throws RoutingError when every perfect matching uses an unreachable pair.
Matching transfer_cost(std::span<const double> d, int K, const solver::SolveConfig& cfg = {});

// One start and one leave road node per car, as full-road indices.
struct Endpoints {
  std::vector<int> start;
  std::vector<int> leave;
};

// Car positions at t = 0 and t = T, mapped from the plan's trimmed road to
// `road` by node id.
Endpoints endpoints_of(const plan::PlanningInstance& inst, const plan::FleetPlan& plan, const graph::RoadGraph& road);

// Index 0 is the office, 1..S the subgraphs. Entries are metres rounded to
// the millimetre; the diagonal is zero.
class QMatrix {
 public:
  QMatrix() = default;
  explicit QMatrix(int size) : n_(size), q_(static_cast<size_t>(size) * size, 0.0), match_(q_.size()) {}

  int size() const { return n_; }
  int subgraphs() const { return n_ - 1; }
  double operator()(int a, int b) const { return q_[idx(a, b)]; }
  double& at(int a, int b) { return q_[idx(a, b)]; }
  const std::vector<int>& matching(int a, int b) const { return match_[idx(a, b)]; }
  std::vector<int>& matching_at(int a, int b) { return match_[idx(a, b)]; }

 private:
  size_t idx(int a, int b) const { return static_cast<size_t>(a) * n_ + b; }
  int n_ = 0;
  std::vector<double> q_;
  std::vector<std::vector<int>> match_;
};

// Q(A,B) = transfer_cost from A's leave nodes to B's start nodes; the office
// is start = leave = office node for every car. Entries are independent and
// computed on up to `jobs` threads. Errors name the pair (A,B).
QMatrix build_q_matrix(const graph::RoadGraph& road, std::span<const Endpoints> endpoints, int office,
                       int jobs = 1, const solver::SolveConfig& cfg = {});

// Position-indexed tour program: x(s,p) = subgraph s at position p
// (both 1..S), objective Q(0,first) + sum Q(s,s') x(s,p) x(s',p+1)
// + Q(last,0). Variables x(s,p) are numbered (s-1)*S + (p-1).
bqp::BinaryProgram build_atsp_program(const QMatrix& Q);

// Linearized form: one auxiliary z(s,p,s',p+1) per consecutive pair, tied
// to x by linking rows sum_{s' != s} z(s,p,s',p+1) = x(s,p) and the mirror
// for position p+1 instead of McCormick rows.
bqp::LinearizedProgram atsp_solving_form(const bqp::BinaryProgram& program, int S);

struct Tour {
  std::vector<int> order;  // subgraph indices 1..S
  double length = 0.0;
  // false when the solver stopped on its time or node limit; the order is
  // then the best found and lower_bound the proven bound
  bool optimal = true;
  double lower_bound = 0.0;
  std::int64_t nodes = 0;  // branch-and-bound nodes
};

// Subset dynamic program; throws UsageError for S > 20.
Tour held_karp(const QMatrix& Q);

struct CarLeg {
  int car = 0;             // physical car, numbered by its slot at the office
  std::vector<int> path;   // full-road node indices
};

struct Leg {
  int from = 0;  // 0 = office
  int to = 0;
  double cost = 0.0;      // Q entry
  double makespan = 0.0;  // longest single car path
  std::vector<CarLeg> cars;
};

struct TourPlan {
  std::vector<int> order;  // subgraph indices 1..S
  double total = 0.0;
  bool optimal = true;
  double lower_bound = 0.0;
  std::int64_t nodes = 0;
  std::vector<Leg> legs;
};

// Solves the tour program and, for S <= 12, checks the optimum against
// held_karp (SolverError on disagreement).
Tour solve_tour(const QMatrix& Q, const solver::SolveConfig& cfg = {});

// solve_tour plus concrete car legs following the matchings stored in Q.
TourPlan solve_atsp(const QMatrix& Q, const graph::RoadGraph& road, std::span<const Endpoints> endpoints, int office,
                    const solver::SolveConfig& cfg = {});

// Tour length from Q alone; throws RoutingError on an invalid order.
double tour_length(const QMatrix& Q, std::span<const int> order);

// "order" lists 0-based subgraph indices (plan_<s> numbering).
nlohmann::json to_json(const graph::RoadGraph& road, const TourPlan& tour);

}  // namespace canalplan::route
