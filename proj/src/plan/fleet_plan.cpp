#include "canalplan/plan/fleet_plan.hpp"

#include <algorithm>
#include <bit>
#include <optional>
#include <chrono>
#include <map>
#include <set>

#include "canalplan/error.hpp"

namespace canalplan::plan {

using bqp::ProgramBuilder;
using bqp::Relation;
using bqp::Term;
using bqp::VarId;

std::vector<int> PlanningInstance::required() const {
  if (!required_edges.empty()) return required_edges;
  std::vector<int> all(canal.edge_count());
  for (int e = 0; e < canal.edge_count(); ++e) all[e] = e;
  return all;
}

std::string PlanningInstance::uav_id(int k) const {
  return k < static_cast<int>(uav_ids.size()) ? uav_ids[k] : "u" + std::to_string(k);
}

std::string PlanningInstance::car_id(int c) const {
  return c < static_cast<int>(car_ids.size()) ? car_ids[c] : "car" + std::to_string(c);
}

void PlanningInstance::validate() const {
  if (K < 1 || K_car < 1 || M < 1 || car_hops_per_step < 1)
    throw UsageError("planning: K, K_car, M and carHopsPerStep must be at least 1");
  if (canal.edge_count() < 1) throw UsageError("planning: subgraph has no edges");
  if (R.bits.rows() != road.node_count() || R.bits.cols() != canal.node_count())
    throw UsageError("planning: transmission matrix does not match the graphs");
  if (!uav_starts.empty() && static_cast<int>(uav_starts.size()) != K)
    throw UsageError("planning: uav start list must have K entries");
  if (!car_starts.empty() && static_cast<int>(car_starts.size()) != K_car)
    throw UsageError("planning: car start list must have K_car entries");
  for (int s : uav_starts)
    if (s < -1 || s >= canal.node_count()) throw UsageError("planning: uav start out of range");
  for (int s : car_starts)
    if (s < -1 || s >= road.node_count()) throw UsageError("planning: car start out of range");
  std::set<int> seen;
  for (int e : required_edges) {
    if (e < 0 || e >= canal.edge_count() || !seen.insert(e).second)
      throw UsageError("planning: bad required edge list");
  }
  for (int i = 0; i < canal.node_count(); ++i) {
    if (R.bits.col_support(i).empty())
      throw PlanningError("planning: canal node " + canal.node(i).id + " has no road node within " +
                          std::to_string(R.range_m) + " m");
  }
}

PlanningInstance make_instance(graph::CanalGraph canal_sub, const graph::RoadGraph& road, double range_m,
                               double margin_m, int K, int K_car, int M, int car_hops_per_step) {
  PlanningInstance inst;
  inst.road = graph::trim_road_subgraph(road, canal_sub.nodes(), range_m, margin_m);
  inst.R = graph::transmission_matrix(inst.road, canal_sub, range_m);
  inst.canal = std::move(canal_sub);
  inst.K = K;
  inst.K_car = K_car;
  inst.M = M;
  inst.car_hops_per_step = car_hops_per_step;
  return inst;
}

int initial_horizon(int edge_count, int K) {
  if (edge_count < 1 || K < 1) throw UsageError("initial_horizon: need edges and K >= 1");
  return (edge_count + K - 1) / K;
}

int battery_initial_horizon(int edge_count, int K, int M) {
  if (edge_count < 1 || K < 1 || M < 1) throw UsageError("initial_horizon: need edges, K and M >= 1");
  return (edge_count + K * M - 1) / (K * M);
}

PlanProgram build_plan_program(const PlanningInstance& inst, int T) {
  inst.validate();
  if (T < 1) throw UsageError("planning: horizon must be at least 1");
  PlanProgram p;
  p.T_ = T;
  p.K_ = inst.K;
  p.Kc_ = inst.K_car;
  p.N_ = inst.canal.node_count();
  p.Nr_ = inst.road.node_count();
  p.required_ = inst.required();
  const int K = p.K_, Kc = p.Kc_, N = p.N_, Nr = p.Nr_;
  const int Q = static_cast<int>(p.required_.size());

  ProgramBuilder b;
  for (int k = 0; k < K; ++k)
    for (int t = 0; t <= T; ++t)
      for (int i = 0; i < N; ++i) b.add_var({"x", {k, t, i}});
  p.y0_ = b.var_count();
  for (int c = 0; c < Kc; ++c)
    for (int t = 0; t <= T; ++t)
      for (int r = 0; r < Nr; ++r) b.add_var({"y", {c, t, r}});
  p.w0_ = b.var_count();
  for (int q = 0; q < Q; ++q)
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < T; ++t)
        for (int d = 1; d <= 2; ++d) b.add_var({"w", {p.required_[q], k, t, d}});
  p.o0_ = b.var_count();
  for (int k = 0; k < K; ++k)
    for (int t = 1; t <= T; ++t)
      for (int c = 0; c < Kc; ++c) b.add_var({"omega", {k, t, c}});

  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < N; ++i) {
        b.add_linear(p.x(k, t + 1, i), 1);
        b.add_linear(p.x(k, t, i), 1);
        b.add_quadratic(p.x(k, t, i), p.x(k, t + 1, i), -2);
      }
    }
  }

  const auto tag = [](std::string s, std::initializer_list<int> ix) {
    for (int v : ix) s += "_" + std::to_string(v);
    return s;
  };

  for (int q = 0; q < Q; ++q) {
    std::vector<Term> t;
    for (int k = 0; k < K; ++k)
      for (int s = 0; s < T; ++s)
        for (int d = 0; d < 2; ++d) t.push_back({p.w(q, k, s, d), 1});
    b.add_constraint(std::move(t), Relation::Equal, 1, tag("cover", {p.required_[q]}));
  }
  for (int q = 0; q < Q; ++q) {
    const auto& e = inst.canal.edge(p.required_[q]);
    const int i = std::min(e.a, e.b);
    const int j = std::max(e.a, e.b);
    for (int k = 0; k < K; ++k) {
      for (int t = 0; t < T; ++t) {
        b.add_constraint({{p.x(k, t, i), 1}, {p.x(k, t + 1, j), 1}, {p.w(q, k, t, 0), -2}}, Relation::GreaterEqual, 0,
                         tag("fwd", {q, k, t}));
        b.add_constraint({{p.x(k, t, j), 1}, {p.x(k, t + 1, i), 1}, {p.w(q, k, t, 1), -2}}, Relation::GreaterEqual, 0,
                         tag("bwd", {q, k, t}));
      }
    }
  }
  for (int k = 0; k < K; ++k) {
    for (int t = 1; t <= T; ++t) {
      for (int c = 0; c < Kc; ++c) {
        for (int r = 0; r < Nr; ++r) {
          std::vector<Term> terms{{p.y(c, t, r), 1}, {p.omega(k, t, c), 1}};
          for (int j : inst.R.bits.row_support(r)) terms.push_back({p.x(k, t, j), -1});
          b.add_constraint(std::move(terms), Relation::LessEqual, 1, tag("comm", {k, t, c, r}));
        }
      }
      std::vector<Term> link;
      for (int c = 0; c < Kc; ++c) link.push_back({p.omega(k, t, c), 1});
      b.add_constraint(std::move(link), Relation::GreaterEqual, 1, tag("link", {k, t}));
    }
  }
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t <= T; ++t) {
      std::vector<Term> terms;
      for (int i = 0; i < N; ++i) terms.push_back({p.x(k, t, i), 1});
      b.add_constraint(std::move(terms), Relation::Equal, 1, tag("one_x", {k, t}));
    }
  }
  for (int c = 0; c < Kc; ++c) {
    for (int t = 0; t <= T; ++t) {
      std::vector<Term> terms;
      for (int r = 0; r < Nr; ++r) terms.push_back({p.y(c, t, r), 1});
      b.add_constraint(std::move(terms), Relation::Equal, 1, tag("one_y", {c, t}));
    }
  }

  const auto A = graph::canal_adjacency(inst.canal, true);
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < N; ++i) {
        std::vector<Term> terms{{p.x(k, t + 1, i), 1}};
        for (int j : A.bits.row_support(i)) terms.push_back({p.x(k, t, j), -1});
        b.add_constraint(std::move(terms), Relation::LessEqual, 0, tag("step_x", {k, t, i}));
      }
    }
  }
  // predecessors of r: nodes with an arc (or hop path) into r
  const auto Ar = graph::road_adjacency(inst.road, true, inst.car_hops_per_step);
  for (int c = 0; c < Kc; ++c) {
    for (int t = 0; t < T; ++t) {
      for (int r = 0; r < Nr; ++r) {
        std::vector<Term> terms{{p.y(c, t + 1, r), 1}};
        for (int j : Ar.bits.col_support(r)) terms.push_back({p.y(c, t, j), -1});
        b.add_constraint(std::move(terms), Relation::LessEqual, 0, tag("step_y", {c, t, r}));
      }
    }
  }
  for (int k = 0; k < static_cast<int>(inst.uav_starts.size()); ++k)
    if (inst.uav_starts[k] >= 0) b.add_constraint({{p.x(k, 0, inst.uav_starts[k]), 1}}, Relation::Equal, 1, tag("pin_uav", {k}));
  for (int c = 0; c < static_cast<int>(inst.car_starts.size()); ++c)
    if (inst.car_starts[c] >= 0) b.add_constraint({{p.y(c, 0, inst.car_starts[c]), 1}}, Relation::Equal, 1, tag("pin_car", {c}));

  p.program_ = std::move(b).build();
  return p;
}

bqp::LinearizedProgram solving_form(const PlanProgram& p) {
  bqp::LinearizedProgram lin = bqp::linearize(p.program());
  std::map<std::pair<std::uint32_t, std::uint32_t>, VarId> z;
  for (const auto& pr : lin.products) z[{pr.a.index, pr.b.index}] = pr.z;
  const int Q = static_cast<int>(p.required_edges().size());
  const int K = p.K();
  const int N = p.N();
  ProgramBuilder b(lin.program);
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < p.T(); ++t) {
      std::vector<Term> terms;
      for (int i = 0; i < N; ++i) {
        auto it = z.find({p.x(k, t, i).index, p.x(k, t + 1, i).index});
        if (it != z.end()) terms.push_back({it->second, 1});
      }
      for (int q = 0; q < Q; ++q)
        for (int d = 0; d < 2; ++d) terms.push_back({p.w(q, k, t, d), 1});
      b.add_constraint(std::move(terms), Relation::LessEqual, 1,
                       "move_" + std::to_string(k) + "_" + std::to_string(t));
    }
  }
  lin.program = std::move(b).build();
  return lin;
}

namespace {

// A car "in range" of a UAV node, preferring the lowest car index.
int car_in_range(const PlanningInstance& inst, const FleetPlan& plan, int t, int canal_node) {
  for (int c = 0; c < static_cast<int>(plan.car_paths.size()); ++c) {
    const auto& path = plan.car_paths[c];
    if (t < static_cast<int>(path.size()) && path[t] >= 0 && path[t] < inst.road.node_count() &&
        inst.R.bits(path[t], canal_node))
      return c;
  }
  return -1;
}

}  // namespace

FleetPlan decode_plan(const PlanningInstance& inst, const PlanProgram& p, std::span<const std::uint8_t> a) {
  FleetPlan plan;
  const int T = p.T();
  plan.T = T;
  const int N = inst.canal.node_count();
  const int Nr = inst.road.node_count();
  plan.uav_paths.assign(inst.K, std::vector<int>(T + 1, -1));
  plan.car_paths.assign(inst.K_car, std::vector<int>(T + 1, -1));
  for (int k = 0; k < inst.K; ++k)
    for (int t = 0; t <= T; ++t)
      for (int i = 0; i < N; ++i)
        if (a[p.x(k, t, i).index]) plan.uav_paths[k][t] = i;
  for (int c = 0; c < inst.K_car; ++c)
    for (int t = 0; t <= T; ++t)
      for (int r = 0; r < Nr; ++r)
        if (a[p.y(c, t, r).index]) plan.car_paths[c][t] = r;
  const auto& req = p.required_edges();
  for (int q = 0; q < static_cast<int>(req.size()); ++q)
    for (int k = 0; k < inst.K; ++k)
      for (int t = 0; t < T; ++t)
        for (int d = 0; d < 2; ++d)
          if (a[p.w(q, k, t, d).index]) plan.coverage.push_back({req[q], k, t, d + 1});
  std::sort(plan.coverage.begin(), plan.coverage.end(),
            [](const Coverage& l, const Coverage& r) { return std::tie(l.t, l.uav, l.edge) < std::tie(r.t, r.uav, r.edge); });
  for (int k = 0; k < inst.K; ++k) {
    for (int t = 1; t <= T; ++t) {
      for (int c = 0; c < inst.K_car; ++c) {
        if (a[p.omega(k, t, c).index]) {
          plan.comm.push_back({k, t, c});
          break;
        }
      }
    }
  }
  for (int k = 0; k < inst.K; ++k) {
    for (int t = 0; t < T; ++t) plan.objective += plan.uav_paths[k][t] != plan.uav_paths[k][t + 1] ? 2 : 0;
    plan.launch_car.push_back(car_in_range(inst, plan, 0, plan.uav_paths[k][0]));
    plan.landing_car.push_back(car_in_range(inst, plan, T, plan.uav_paths[k][T]));
  }
  return plan;
}

void verify_plan(const PlanningInstance& inst, const FleetPlan& plan) {
  const int T = plan.T;
  const auto fail = [](const std::string& what) { throw PlanningError("plan check: " + what); };
  if (T < 1 || T > inst.M) fail("horizon " + std::to_string(T) + " outside [1, M=" + std::to_string(inst.M) + "]");
  if (static_cast<int>(plan.uav_paths.size()) != inst.K) fail("wrong number of UAV paths");
  if (static_cast<int>(plan.car_paths.size()) != inst.K_car) fail("wrong number of car paths");
  std::int64_t moves = 0;
  for (int k = 0; k < inst.K; ++k) {
    const auto& path = plan.uav_paths[k];
    if (static_cast<int>(path.size()) != T + 1) fail(inst.uav_id(k) + " path length");
    for (int v : path)
      if (v < 0 || v >= inst.canal.node_count()) fail(inst.uav_id(k) + " leaves the subgraph");
    for (int t = 0; t < T; ++t) {
      if (path[t] == path[t + 1]) continue;
      if (!inst.canal.edge_between(path[t], path[t + 1]))
        fail(inst.uav_id(k) + " jumps between non-adjacent nodes at t=" + std::to_string(t));
      ++moves;
    }
    if (k < static_cast<int>(inst.uav_starts.size()) && inst.uav_starts[k] >= 0 && path[0] != inst.uav_starts[k])
      fail(inst.uav_id(k) + " does not start at its fixed node");
  }
  // Reachability for cars: BFS within car_hops_per_step arcs.
  const auto within_hops = [&](int from, int to) {
    if (from == to) return true;
    std::vector<int> frontier{from};
    std::vector<char> seen(inst.road.node_count(), 0);
    seen[from] = 1;
    for (int h = 0; h < inst.car_hops_per_step; ++h) {
      std::vector<int> next;
      for (int v : frontier)
        for (const auto& arc : inst.road.out_arcs(v)) {
          if (arc.to == to) return true;
          if (!seen[arc.to]) {
            seen[arc.to] = 1;
            next.push_back(arc.to);
          }
        }
      frontier = std::move(next);
    }
    return false;
  };
  for (int c = 0; c < inst.K_car; ++c) {
    const auto& path = plan.car_paths[c];
    if (static_cast<int>(path.size()) != T + 1) fail(inst.car_id(c) + " path length");
    for (int v : path)
      if (v < 0 || v >= inst.road.node_count()) fail(inst.car_id(c) + " leaves the road subgraph");
    for (int t = 0; t < T; ++t)
      if (!within_hops(path[t], path[t + 1])) fail(inst.car_id(c) + " has no road connection at t=" + std::to_string(t));
    if (c < static_cast<int>(inst.car_starts.size()) && inst.car_starts[c] >= 0 && path[0] != inst.car_starts[c])
      fail(inst.car_id(c) + " does not start at its fixed node");
  }

  std::vector<int> covered(inst.canal.edge_count(), 0);
  std::set<std::pair<int, int>> used_steps;
  for (const auto& cov : plan.coverage) {
    if (cov.edge < 0 || cov.edge >= inst.canal.edge_count() || cov.uav < 0 || cov.uav >= inst.K || cov.t < 0 ||
        cov.t >= T || (cov.dir != 1 && cov.dir != 2))
      fail("malformed coverage entry");
    const auto& e = inst.canal.edge(cov.edge);
    const int lo = std::min(e.a, e.b);
    const int hi = std::max(e.a, e.b);
    const int from = cov.dir == 1 ? lo : hi;
    const int to = cov.dir == 1 ? hi : lo;
    const auto& path = plan.uav_paths[cov.uav];
    if (path[cov.t] != from || path[cov.t + 1] != to)
      fail("edge " + std::to_string(cov.edge) + " credited to " + inst.uav_id(cov.uav) + " at t=" +
           std::to_string(cov.t) + " but the UAV does not fly it");
    if (!used_steps.insert({cov.uav, cov.t}).second) fail("one UAV step credited twice");
    ++covered[cov.edge];
  }
  const auto req = inst.required();
  std::vector<char> is_req(inst.canal.edge_count(), 0);
  for (int e : req) is_req[e] = 1;
  for (int e = 0; e < inst.canal.edge_count(); ++e) {
    if (is_req[e] && covered[e] != 1)
      fail("edge " + std::to_string(e) + " covered " + std::to_string(covered[e]) + " times");
    if (!is_req[e] && covered[e] != 0) fail("edge " + std::to_string(e) + " was already inspected");
  }

  std::map<std::pair<int, int>, int> link;
  for (const auto& l : plan.comm) {
    if (l.uav < 0 || l.uav >= inst.K || l.car < 0 || l.car >= inst.K_car || l.t < 1 || l.t > T)
      fail("malformed comm link");
    link[{l.uav, l.t}] = l.car;
  }
  for (int k = 0; k < inst.K; ++k) {
    for (int t = 1; t <= T; ++t) {
      auto it = link.find({k, t});
      if (it == link.end()) fail(inst.uav_id(k) + " has no car link at t=" + std::to_string(t));
      if (!inst.R.bits(plan.car_paths[it->second][t], plan.uav_paths[k][t]))
        fail(inst.uav_id(k) + " out of range of " + inst.car_id(it->second) + " at t=" + std::to_string(t));
    }
  }
  if (plan.objective != 2 * moves)
    fail("objective " + std::to_string(plan.objective) + " is not twice the " + std::to_string(moves) + " moves");
}

namespace {

class Constructor {
 public:
  Constructor(const PlanningInstance& inst, int T, std::int64_t budget)
      : inst_(inst), T_(T), budget_(budget), K_(inst.K), N_(inst.canal.node_count()) {}

  std::optional<FleetPlan> run() {
    if (K_ * T_ > 64) return std::nullopt;
    if (!enumerate_car_walks()) return std::nullopt;
    required_.assign(inst_.canal.edge_count(), 0);
    for (int e : inst_.required()) required_[e] = 1;
    left_ = static_cast<int>(inst_.required().size());
    if (left_ > K_ * T_) return std::nullopt;
    paths_.assign(K_, std::vector<int>(T_ + 1, -1));
    cover_.clear();
    if (!start_uav(0)) return std::nullopt;
    return finish();
  }

 private:
  bool spend() { return --budget_ >= 0; }

  bool pinned_uav(int k) const {
    return k < static_cast<int>(inst_.uav_starts.size()) && inst_.uav_starts[k] >= 0;
  }

  bool enumerate_car_walks() {
    constexpr std::size_t kMaxWalks = 200000;
    const auto Ar = graph::road_adjacency(inst_.road, true, inst_.car_hops_per_step);
    std::vector<std::vector<int>> next(inst_.road.node_count());
    for (int r = 0; r < inst_.road.node_count(); ++r) next[r] = Ar.bits.row_support(r);
    walks_.assign(inst_.K_car, {});
    std::map<int, int> cached;  // start pin -> car index already holding those walks
    for (int c = 0; c < inst_.K_car; ++c) {
      const int pin = c < static_cast<int>(inst_.car_starts.size()) ? inst_.car_starts[c] : -1;
      if (auto it = cached.find(pin); it != cached.end()) {
        walks_[c] = walks_[it->second];
        continue;
      }
      std::vector<int> walk(T_ + 1);
      std::vector<std::vector<int>>& out = walks_[c];
      bool overflow = false;
      const auto grow = [&](auto&& self, int t) -> void {
        if (overflow) return;
        if (t == T_) {
          if (out.size() >= kMaxWalks) {
            overflow = true;
            return;
          }
          out.push_back(walk);
          return;
        }
        for (int r : next[walk[t]]) {
          walk[t + 1] = r;
          self(self, t + 1);
        }
      };
      for (int r = 0; r < inst_.road.node_count(); ++r) {
        if (pin >= 0 && r != pin) continue;
        walk[0] = r;
        grow(grow, 0);
      }
      if (overflow) return false;
      cached[pin] = c;
    }
    return true;
  }

  // Walk masks over (uav, t) pairs for t in 1..T; the cars must jointly cover
  // every pair.
  std::optional<std::vector<int>> match_cars() {
    const std::uint64_t full = K_ * T_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << (K_ * T_)) - 1;
    std::vector<std::vector<std::pair<std::uint64_t, int>>> options(inst_.K_car);
    for (int c = 0; c < inst_.K_car; ++c) {
      std::map<std::uint64_t, int> best;
      for (int w = 0; w < static_cast<int>(walks_[c].size()); ++w) {
        if (!spend()) return std::nullopt;
        std::uint64_t m = 0;
        for (int k = 0; k < K_; ++k)
          for (int t = 1; t <= T_; ++t)
            if (inst_.R.bits(walks_[c][w][t], paths_[k][t])) m |= std::uint64_t{1} << (k * T_ + t - 1);
        best.emplace(m, w);
      }
      // drop masks contained in another
      for (const auto& [m, w] : best) {
        bool dominated = false;
        for (const auto& [o, _] : best)
          if (o != m && (o & m) == m) {
            dominated = true;
            break;
          }
        if (!dominated) options[c].push_back({m, w});
      }
      std::sort(options[c].begin(), options[c].end(), [](const auto& a, const auto& b) {
        return std::popcount(a.first) > std::popcount(b.first);
      });
    }
    std::vector<int> pick(inst_.K_car, -1);
    const auto search = [&](auto&& self, int c, std::uint64_t have) -> bool {
      if (c == inst_.K_car) return have == full;
      for (const auto& [m, w] : options[c]) {
        if (!spend()) return false;
        pick[c] = w;
        if (self(self, c + 1, have | m)) return true;
      }
      return false;
    };
    if (!search(search, 0, 0)) return std::nullopt;
    return pick;
  }

  bool start_uav(int k) {
    if (k == K_) {
      if (left_ > 0) return false;
      if (auto cars = match_cars()) {
        cars_ = *cars;
        return true;
      }
      return false;
    }
    if (left_ > (K_ - k) * T_) return false;
    std::vector<int> starts;
    if (pinned_uav(k)) {
      starts.push_back(inst_.uav_starts[k]);
    } else {
      // ends of the uncovered forest first, then inner nodes, then the rest
      const int lo = k > 0 && !pinned_uav(k - 1) ? paths_[k - 1][0] : 0;
      std::vector<std::pair<int, int>> ranked;
      for (int v = lo; v < N_; ++v) {
        int open = 0;
        for (const auto& inc : inst_.canal.incident(v)) open += required_[inc.edge];
        ranked.push_back({open == 1 ? 0 : open > 1 ? 1 : 2, v});
      }
      std::sort(ranked.begin(), ranked.end());
      for (auto [_, v] : ranked) starts.push_back(v);
    }
    for (int v : starts) {
      if (!spend()) return false;
      paths_[k][0] = v;
      if (step(k, 0)) return true;
    }
    return false;
  }

  bool step(int k, int t) {
    if (t == T_) return start_uav(k + 1);
    const int v = paths_[k][t];
    for (const auto& inc : inst_.canal.incident(v)) {
      if (!required_[inc.edge]) continue;
      if (!spend()) return false;
      required_[inc.edge] = 0;
      --left_;
      paths_[k][t + 1] = inc.neighbor;
      cover_.push_back({inc.edge, k, t, v < inc.neighbor ? 1 : 2});
      if (step(k, t + 1)) return true;
      cover_.pop_back();
      ++left_;
      required_[inc.edge] = 1;
    }
    paths_[k][t + 1] = v;
    return step(k, t + 1);
  }

  FleetPlan finish() const {
    FleetPlan plan;
    plan.T = T_;
    plan.uav_paths = paths_;
    for (int c = 0; c < inst_.K_car; ++c) plan.car_paths.push_back(walks_[c][cars_[c]]);
    plan.coverage = cover_;
    std::sort(plan.coverage.begin(), plan.coverage.end(), [](const Coverage& l, const Coverage& r) {
      return std::tie(l.t, l.uav, l.edge) < std::tie(r.t, r.uav, r.edge);
    });
    for (int k = 0; k < K_; ++k) {
      for (int t = 1; t <= T_; ++t) plan.comm.push_back({k, t, car_in_range(inst_, plan, t, paths_[k][t])});
      for (int t = 0; t < T_; ++t) plan.objective += paths_[k][t] != paths_[k][t + 1] ? 2 : 0;
      plan.launch_car.push_back(car_in_range(inst_, plan, 0, paths_[k][0]));
      plan.landing_car.push_back(car_in_range(inst_, plan, T_, paths_[k][T_]));
    }
    return plan;
  }

  const PlanningInstance& inst_;
  int T_;
  std::int64_t budget_;
  int K_, N_;
  std::vector<std::vector<std::vector<int>>> walks_;  // per car
  std::vector<char> required_;                         // still uncovered
  int left_ = 0;
  std::vector<std::vector<int>> paths_;
  std::vector<Coverage> cover_;
  std::vector<int> cars_;
};

}  // namespace

std::optional<FleetPlan> construct_plan(const PlanningInstance& inst, int T, std::int64_t budget) {
  inst.validate();
  if (T < 1) throw UsageError("planning: horizon must be at least 1");
  return Constructor(inst, T, budget).run();
}

std::vector<std::uint8_t> encode_plan(const PlanProgram& p, const bqp::LinearizedProgram& lin, const FleetPlan& plan) {
  if (plan.T != p.T()) throw UsageError("encode_plan: horizon mismatch");
  std::vector<std::uint8_t> a(lin.program.var_count(), 0);
  for (int k = 0; k < static_cast<int>(plan.uav_paths.size()); ++k)
    for (int t = 0; t <= plan.T; ++t) a[p.x(k, t, plan.uav_paths[k][t]).index] = 1;
  for (int c = 0; c < static_cast<int>(plan.car_paths.size()); ++c)
    for (int t = 0; t <= plan.T; ++t) a[p.y(c, t, plan.car_paths[c][t]).index] = 1;
  const auto& req = p.required_edges();
  for (const Coverage& cv : plan.coverage) {
    const auto q = std::find(req.begin(), req.end(), cv.edge) - req.begin();
    if (q == static_cast<std::ptrdiff_t>(req.size())) throw UsageError("encode_plan: edge is not required");
    a[p.w(static_cast<int>(q), cv.uav, cv.t, cv.dir - 1).index] = 1;
  }
  for (const CommLink& l : plan.comm)
    if (l.car >= 0) a[p.omega(l.uav, l.t, l.car).index] = 1;
  for (const bqp::Product& pr : lin.products) a[pr.z.index] = a[pr.a.index] & a[pr.b.index];
  return a;
}

PlanResult plan_subgraph(const PlanningInstance& inst, const PlanOptions& opts) {
  inst.validate();
  const int Ns = static_cast<int>(inst.required().size());
  if (Ns == 0) throw UsageError("planning: nothing left to inspect");
  const int T0 = opts.battery_horizon ? battery_initial_horizon(Ns, inst.K, inst.M) : initial_horizon(Ns, inst.K);
  const int cap = std::min(inst.M, opts.max_T);
  PlanResult result;
  bool timed_out = false;
  for (int T = T0; T <= cap; ++T) {
    const auto t0 = std::chrono::steady_clock::now();
    const PlanProgram p = build_plan_program(inst, T);
    const auto lin = solving_form(p);
    solver::SolveConfig cfg = opts.solve;
    if (opts.construct_start && !cfg.warm_start) {
      if (auto start = construct_plan(inst, T, opts.construct_budget)) cfg.warm_start = encode_plan(p, lin, *start);
    }
    const auto r = solver::solve(lin.program, cfg);
    HorizonProbe probe;
    probe.T = T;
    probe.status = r.status;
    probe.has_solution = r.has_solution;
    probe.nodes = r.stats.nodes;
    probe.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.probes.push_back(probe);
    if (r.status == solver::SolveStatus::TimedOut && !r.has_solution) timed_out = true;
    if (r.has_solution) {
      result.plan = decode_plan(inst, p, r.assignment);
      verify_plan(inst, result.plan);
      return result;
    }
  }
  std::string msg = "subgraph exceeds fleet battery budget: no feasible plan with T <= " + std::to_string(cap) + " (" +
                    std::to_string(Ns) + " edges, " + std::to_string(inst.K) + " UAVs, " + std::to_string(inst.K_car) +
                    " cars)";
  if (T0 > cap) msg += "; the minimum horizon " + std::to_string(T0) + " already exceeds the cap";
  if (timed_out) msg += "; some horizons timed out undecided";
  throw PlanningError(msg);
}

PlanningInstance replan_instance(const PlanningInstance& inst, const FleetPlan& previous, int t_now,
                                 const ReplanEvents& events) {
  inst.validate();
  if (t_now < 0 || t_now > previous.T) throw UsageError("replan: t_now outside [0, T]");
  if (static_cast<int>(previous.uav_paths.size()) != inst.K || static_cast<int>(previous.car_paths.size()) != inst.K_car)
    throw UsageError("replan: previous plan does not match the instance fleet");

  PlanningInstance next = inst;
  std::set<int> done;
  for (const auto& c : previous.coverage)
    if (c.t < t_now) done.insert(c.edge);
  for (int e : events.inspected_edges) {
    if (e < 0 || e >= inst.canal.edge_count()) throw UsageError("replan: inspected edge out of range");
    done.insert(e);
  }
  next.required_edges.clear();
  for (int e : inst.required())
    if (!done.count(e)) next.required_edges.push_back(e);

  std::vector<std::pair<int, int>> closed = events.removed_arcs;
  for (int c : events.delayed_cars) {
    if (c < 0 || c >= inst.K_car) throw UsageError("replan: delayed car out of range");
    if (t_now < previous.T) {
      const int from = previous.car_paths[c][t_now];
      const int to = previous.car_paths[c][t_now + 1];
      if (from != to) closed.push_back({from, to});
    }
  }
  for (const auto& [a, b] : closed)
    if (a < 0 || b < 0 || a >= inst.road.node_count() || b >= inst.road.node_count())
      throw UsageError("replan: removed arc out of range");
  if (!closed.empty()) next.road = inst.road.without_arcs(closed);

  std::set<int> failed(events.failed_uavs.begin(), events.failed_uavs.end());
  for (int k : failed)
    if (k < 0 || k >= inst.K) throw UsageError("replan: failed UAV out of range");
  next.uav_starts.clear();
  next.uav_ids.clear();
  for (int k = 0; k < inst.K; ++k) {
    if (failed.count(k)) continue;
    next.uav_starts.push_back(previous.uav_paths[k][t_now]);
    next.uav_ids.push_back(inst.uav_id(k));
  }
  next.K = static_cast<int>(next.uav_starts.size());
  next.car_starts.clear();
  next.car_ids.clear();
  for (int c = 0; c < inst.K_car; ++c) {
    next.car_starts.push_back(previous.car_paths[c][t_now]);
    next.car_ids.push_back(inst.car_id(c));
  }
  next.M = inst.M - t_now;

  // After closures, every canal node a UAV must stand on still needs some
  // car able to drive within range of it.
  if (!closed.empty() && !next.required_edges.empty()) {
    std::vector<char> reach(next.road.node_count(), 0);
    std::vector<int> stack;
    for (int c : next.car_starts)
      if (c >= 0 && !reach[c]) reach[c] = 1, stack.push_back(c);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const graph::Arc& a : next.road.out_arcs(v))
        if (!reach[a.to]) reach[a.to] = 1, stack.push_back(a.to);
    }
    std::set<int> needed(next.uav_starts.begin(), next.uav_starts.end());
    for (int e : next.required_edges) {
      needed.insert(inst.canal.edge(e).a);
      needed.insert(inst.canal.edge(e).b);
    }
    for (int v : needed) {
      const auto cover = next.R.bits.col_support(v);
      if (std::none_of(cover.begin(), cover.end(), [&](int r) { return reach[r] != 0; }))
        throw PlanningError("replan: the road closures leave no car able to reach radio range of canal node " +
                            inst.canal.node(v).id + "; reopen one of the closed arcs or add a car on that side");
    }
  }

  if (next.K == 0 && !next.required_edges.empty())
    throw PlanningError("replan: every UAV failed with " + std::to_string(next.required_edges.size()) +
                        " edges still uninspected");
  if (next.M < 1 && !next.required_edges.empty())
    throw PlanningError("replan: battery exhausted with edges still uninspected");
  return next;
}

PlanResult replan(const PlanningInstance& inst, const FleetPlan& previous, int t_now, const ReplanEvents& events,
                  const PlanOptions& opts) {
  const PlanningInstance next = replan_instance(inst, previous, t_now, events);
  if (next.required_edges.empty()) throw UsageError("replan: every edge is already inspected");
  return plan_subgraph(next, opts);
}

nlohmann::json to_json(const PlanningInstance& inst, const FleetPlan& plan) {
  using nlohmann::json;
  json uavs = json::array();
  for (int k = 0; k < static_cast<int>(plan.uav_paths.size()); ++k) {
    json path = json::array();
    for (int v : plan.uav_paths[k]) path.push_back(inst.canal.node(v).id);
    uavs.push_back({{"id", inst.uav_id(k)}, {"path", std::move(path)}});
  }
  json cars = json::array();
  for (int c = 0; c < static_cast<int>(plan.car_paths.size()); ++c) {
    json path = json::array();
    for (int v : plan.car_paths[c]) path.push_back(inst.road.node(v).id);
    cars.push_back({{"id", inst.car_id(c)}, {"path", std::move(path)}});
  }
  json coverage = json::array();
  for (const auto& c : plan.coverage) {
    const auto& e = inst.canal.edge(c.edge);
    coverage.push_back({{"edge", {inst.canal.node(std::min(e.a, e.b)).id, inst.canal.node(std::max(e.a, e.b)).id}},
                        {"uav", inst.uav_id(c.uav)},
                        {"t", c.t},
                        {"dir", c.dir}});
  }
  json comm = json::array();
  for (const auto& l : plan.comm) comm.push_back({{"uav", inst.uav_id(l.uav)}, {"t", l.t}, {"car", inst.car_id(l.car)}});
  return {{"T", plan.T},       {"uavs", std::move(uavs)}, {"cars", std::move(cars)},
          {"coverage", std::move(coverage)}, {"comm", std::move(comm)}, {"objective", plan.objective}};
}

FleetPlan plan_from_json(const PlanningInstance& inst, const nlohmann::json& j) {
  const std::string src = "<plan>";
  const auto need = [&](const nlohmann::json& obj, const char* field, auto check, const std::string& where) {
    if (!obj.is_object() || !obj.contains(field) || !check(obj[field]))
      throw ParseError(src, 0, where.empty() ? field : where + "." + field, "missing or wrong type");
    return obj[field];
  };
  const auto is_int = [](const nlohmann::json& v) { return v.is_number_integer(); };
  const auto is_arr = [](const nlohmann::json& v) { return v.is_array(); };
  const auto is_str = [](const nlohmann::json& v) { return v.is_string(); };

  FleetPlan plan;
  plan.T = need(j, "T", is_int, "").get<int>();
  std::map<std::string, int> uav_ix, car_ix;
  for (int k = 0; k < inst.K; ++k) uav_ix[inst.uav_id(k)] = k;
  for (int c = 0; c < inst.K_car; ++c) car_ix[inst.car_id(c)] = c;
  const auto lookup = [](const std::map<std::string, int>& m, const std::string& id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw PlanningError(std::string("plan: unknown ") + what + " '" + id + "'");
    return it->second;
  };

  plan.uav_paths.assign(inst.K, {});
  for (const auto& u : need(j, "uavs", is_arr, "")) {
    const int k = lookup(uav_ix, need(u, "id", is_str, "uavs[]").get<std::string>(), "UAV");
    for (const auto& v : need(u, "path", is_arr, "uavs[]")) {
      if (!v.is_string()) throw ParseError(src, 0, "uavs[].path", "expected node ids");
      const auto i = inst.canal.index_of(v.get<std::string>());
      if (!i) throw PlanningError("plan: unknown canal node '" + v.get<std::string>() + "'");
      plan.uav_paths[k].push_back(*i);
    }
  }
  plan.car_paths.assign(inst.K_car, {});
  for (const auto& c : need(j, "cars", is_arr, "")) {
    const int ci = lookup(car_ix, need(c, "id", is_str, "cars[]").get<std::string>(), "car");
    for (const auto& v : need(c, "path", is_arr, "cars[]")) {
      if (!v.is_string()) throw ParseError(src, 0, "cars[].path", "expected node ids");
      const auto r = inst.road.index_of(v.get<std::string>());
      if (!r) throw PlanningError("plan: unknown road node '" + v.get<std::string>() + "'");
      plan.car_paths[ci].push_back(*r);
    }
  }
  for (const auto& c : need(j, "coverage", is_arr, "")) {
    const auto& ends = need(c, "edge", is_arr, "coverage[]");
    if (ends.size() != 2 || !ends[0].is_string() || !ends[1].is_string())
      throw ParseError(src, 0, "coverage[].edge", "expected [from, to]");
    const auto a = inst.canal.index_of(ends[0].get<std::string>());
    const auto b = inst.canal.index_of(ends[1].get<std::string>());
    const auto e = a && b ? inst.canal.edge_between(*a, *b) : std::nullopt;
    if (!e) throw PlanningError("plan: unknown canal edge " + ends.dump());
    plan.coverage.push_back({*e, lookup(uav_ix, need(c, "uav", is_str, "coverage[]").get<std::string>(), "UAV"),
                             need(c, "t", is_int, "coverage[]").get<int>(), need(c, "dir", is_int, "coverage[]").get<int>()});
  }
  for (const auto& l : need(j, "comm", is_arr, "")) {
    plan.comm.push_back({lookup(uav_ix, need(l, "uav", is_str, "comm[]").get<std::string>(), "UAV"),
                         need(l, "t", is_int, "comm[]").get<int>(),
                         lookup(car_ix, need(l, "car", is_str, "comm[]").get<std::string>(), "car")});
  }
  if (!j.contains("objective") || !j["objective"].is_number()) throw ParseError(src, 0, "objective", "missing or not a number");
  plan.objective = j["objective"].get<std::int64_t>();
  for (int k = 0; k < inst.K; ++k) {
    if (static_cast<int>(plan.uav_paths[k].size()) != plan.T + 1) continue;
    plan.launch_car.push_back(car_in_range(inst, plan, 0, plan.uav_paths[k][0]));
    plan.landing_car.push_back(car_in_range(inst, plan, plan.T, plan.uav_paths[k][plan.T]));
  }
  return plan;
}

}  // namespace canalplan::plan
