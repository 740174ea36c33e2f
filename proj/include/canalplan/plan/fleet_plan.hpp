#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "canalplan/bqp/model.hpp"
#include "canalplan/graph/canal_graph.hpp"
#include "canalplan/graph/metrics.hpp"
#include "canalplan/graph/road_graph.hpp"
#include "canalplan/solver/solve.hpp"

namespace canalplan::plan {

// One partition cell with its fleet. Node and edge indices are local to
// `canal` and `road`.
struct PlanningInstance {
  graph::CanalGraph canal;
  graph::RoadGraph road;
  graph::TransmissionMatrix R;  // road x canal
  int K = 1;
  int K_car = 1;
  int M = 1;
  int car_hops_per_step = 1;
  // Edges that still need inspection; empty means all. Other edges remain
  // flyable.
  std::vector<int> required_edges;
  // Fixed start nodes; empty vectors mean free, -1 entries leave one vehicle free.
  std::vector<int> uav_starts;
  std::vector<int> car_starts;
  std::vector<std::string> uav_ids;  // default u0, u1, ...
  std::vector<std::string> car_ids;  // default car0, ...

  std::vector<int> required() const;
  std::string uav_id(int k) const;
  std::string car_id(int c) const;
  // Throws UsageError on malformed fields and PlanningError when a canal node
  // has no road node in range (no car could ever reach a UAV there).
  void validate() const;
};

// Trims the road network around the cell and builds R.
PlanningInstance make_instance(graph::CanalGraph canal_sub, const graph::RoadGraph& road, double range_m,
                               double margin_m, int K, int K_car, int M, int car_hops_per_step = 1);

int initial_horizon(int edge_count, int K);
// Lower start, ceil(N_s / (K M)), counting the battery; kept for comparison runs.
int battery_initial_horizon(int edge_count, int K, int M);

// Variable order: x(k,t,i) for t in 0..T, y(c,t,r) for t in 0..T,
// w(q,k,t,d) for required edge q, start step t in 0..T-1 and direction
// d in {0,1} (lower index first, then reverse), omega(k,t,c) for t in 1..T.
class PlanProgram {
 public:
  const bqp::BinaryProgram& program() const { return program_; }
  int T() const { return T_; }
  int K() const { return K_; }
  int N() const { return N_; }
  const std::vector<int>& required_edges() const { return required_; }

  bqp::VarId x(int k, int t, int i) const { return id((k * (T_ + 1) + t) * N_ + i); }
  bqp::VarId y(int c, int t, int r) const { return id(y0_ + (c * (T_ + 1) + t) * Nr_ + r); }
  bqp::VarId w(int q, int k, int t, int d) const { return id(w0_ + ((q * K_ + k) * T_ + t) * 2 + d); }
  bqp::VarId omega(int k, int t, int c) const { return id(o0_ + (k * T_ + (t - 1)) * Kc_ + c); }

 private:
  friend PlanProgram build_plan_program(const PlanningInstance&, int);
  static bqp::VarId id(int i) { return {static_cast<std::uint32_t>(i)}; }

  bqp::BinaryProgram program_;
  std::vector<int> required_;
  int T_ = 0, K_ = 0, Kc_ = 0, N_ = 0, Nr_ = 0;
  int y0_ = 0, w0_ = 0, o0_ = 0;
};

// Objective sum (x_{k,t+1,i} - x_{k,t,i})^2 in folded form, with rows
//   cover       sum_{k,t,d} w = 1                         per required edge
//   fwd / bwd   x_{k,t,i} + x_{k,t+1,j} - 2 w >= 0         (and mirrored)
//   comm        y_{c,t,r} - sum_j R(r,j) x_{k,t,j} + omega <= 1
//   link        sum_c omega_{k,t,c} >= 1                   K T rows
//   one_x/one_y one node per vehicle per step
//   step_x      x_{k,t+1,i} <= sum_{j ~ i} x_{k,t,j}       (self loops included)
//   step_y      y_{c,t+1,r} <= sum_{r' -> r} y_{c,t,r'}
//   pin_*       fixed starts, when given
PlanProgram build_plan_program(const PlanningInstance& inst, int T);

// Linearized form handed to the solver: products become auxiliaries and
// each (k,t) gets sum_i z(x_{k,t,i} x_{k,t+1,i}) + sum_{q,d} w_{q,k,t,d} <= 1,
// since covering an edge means leaving the node. Same integer optimum.
bqp::LinearizedProgram solving_form(const PlanProgram& p);

struct Coverage {
  int edge = 0;  // local canal edge
  int uav = 0;
  int t = 0;     // start step
  int dir = 1;   // 1: lower node index to higher, 2: reverse
};

struct CommLink {
  int uav = 0;
  int t = 0;
  int car = 0;
};

struct FleetPlan {
  int T = 0;
  std::vector<std::vector<int>> uav_paths;  // T+1 canal nodes each
  std::vector<std::vector<int>> car_paths;  // T+1 road nodes each
  std::vector<Coverage> coverage;
  std::vector<CommLink> comm;               // t in 1..T
  // Car in range at takeoff and landing; rendering only, -1 when none.
  std::vector<int> launch_car;
  std::vector<int> landing_car;
  std::int64_t objective = 0;               // 2 x total UAV moves
};

FleetPlan decode_plan(const PlanningInstance& inst, const PlanProgram& p, std::span<const std::uint8_t> assignment);

// Walks the plan against the instance without looking at solver output.
// Throws PlanningError naming the first violation.
void verify_plan(const PlanningInstance& inst, const FleetPlan& plan);

// Depth-first construction: UAVs walk paths that inspect a new edge on every
// move (idling otherwise), cars are chosen among all their walks so that
// every UAV is in range at t = 1..T. Returns the first plan found, whose
// objective then equals the 2 x edges lower bound; nullopt when the search
// fails or the budget (in search steps) runs out.
std::optional<FleetPlan> construct_plan(const PlanningInstance& inst, int T, std::int64_t budget = 2000000);

// Solver assignment for `plan` in the solving form of `p`.
std::vector<std::uint8_t> encode_plan(const PlanProgram& p, const bqp::LinearizedProgram& lin, const FleetPlan& plan);

struct PlanOptions {
  int max_T = std::numeric_limits<int>::max();
  bool battery_horizon = false;
  // Seed each horizon with construct_plan (when it finds something).
  bool construct_start = true;
  std::int64_t construct_budget = 2000000;
  solver::SolveConfig solve;
};

struct HorizonProbe {
  int T = 0;
  solver::SolveStatus status = solver::SolveStatus::Infeasible;
  bool has_solution = false;
  std::int64_t nodes = 0;
  double seconds = 0.0;
};

struct PlanResult {
  FleetPlan plan;
  std::vector<HorizonProbe> probes;
};

// Tries T = initial horizon .. min(M, max_T) and returns the first feasible
// horizon with its optimal plan. Throws PlanningError when none is feasible.
PlanResult plan_subgraph(const PlanningInstance& inst, const PlanOptions& opts = {});

struct ReplanEvents {
  std::vector<int> inspected_edges;                  // local canal edges
  std::vector<std::pair<int, int>> removed_arcs;     // local road node pairs
  std::vector<int> failed_uavs;                      // indices into the instance fleet
  std::vector<int> delayed_cars;                     // closes the car's next planned arc
};

// New instance for the rest of the mission: edges covered before t_now plus
// the listed ones are dropped from the requirement, closures are applied,
// failed UAVs leave the fleet, battery becomes M - t_now and every vehicle
// starts where the previous plan had it at t_now.
PlanningInstance replan_instance(const PlanningInstance& inst, const FleetPlan& previous, int t_now,
                                 const ReplanEvents& events);

PlanResult replan(const PlanningInstance& inst, const FleetPlan& previous, int t_now, const ReplanEvents& events,
                  const PlanOptions& opts = {});

nlohmann::json to_json(const PlanningInstance& inst, const FleetPlan& plan);
// Throws ParseError on schema problems and PlanningError on unknown ids.
FleetPlan plan_from_json(const PlanningInstance& inst, const nlohmann::json& j);

}  // namespace canalplan::plan
