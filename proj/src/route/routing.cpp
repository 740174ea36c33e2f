#include "canalplan/route/routing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "canalplan/error.hpp"

namespace canalplan::route {

using bqp::ProgramBuilder;
using bqp::Rational;
using bqp::Relation;
using bqp::Term;
using bqp::VarId;
using graph::kUnreachable;

namespace {

double to_mm(double metres) { return bqp::to_double(bqp::rational_from_double(metres)); }

std::string place_name(int a) { return a == 0 ? "office" : "subgraph " + std::to_string(a - 1); }

}  // namespace

Matching transfer_cost(std::span<const double> d, int K, const solver::SolveConfig& cfg) {
  if (K < 1 || static_cast<int>(d.size()) != K * K) throw UsageError("transfer_cost: table must be K x K with K >= 1");
  ProgramBuilder b;
  std::vector<std::vector<Term>> rows(K), cols(K);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      const double v = d[static_cast<size_t>(i) * K + j];
      if (!std::isfinite(v)) continue;
      if (v < 0) throw UsageError("transfer_cost: negative distance");
      const VarId x = b.add_var({"a", {i, j}});
      b.add_linear(x, bqp::rational_from_double(v));
      rows[i].push_back({x, 1});
      cols[j].push_back({x, 1});
      pairs.push_back({i, j});
    }
  }
  for (int i = 0; i < K; ++i) b.add_constraint(std::move(rows[i]), Relation::Equal, 1, "leave_" + std::to_string(i));
  for (int j = 0; j < K; ++j) b.add_constraint(std::move(cols[j]), Relation::Equal, 1, "start_" + std::to_string(j));
  const bqp::BinaryProgram p = std::move(b).build();
  const auto r = solver::solve(p, cfg);
  if (!r.has_solution) {
    if (r.status == solver::SolveStatus::TimedOut) throw SolverError("transfer_cost: timed out");
    throw RoutingError("subgraphs not road-connected: no car matching uses only reachable pairs");
  }
  Matching m;
  m.to.assign(K, -1);
  for (size_t v = 0; v < pairs.size(); ++v) {
    if (!r.assignment[v]) continue;
    m.to[pairs[v].first] = pairs[v].second;
    m.cost += to_mm(d[static_cast<size_t>(pairs[v].first) * K + pairs[v].second]);
  }
  return m;
}

Endpoints endpoints_of(const plan::PlanningInstance& inst, const plan::FleetPlan& plan, const graph::RoadGraph& road) {
  Endpoints e;
  const auto full = [&](int local) {
    const std::string& id = inst.road.node(local).id;
    const auto i = road.index_of(id);
    if (!i) throw RoutingError("road node " + id + " of the plan is not in the road graph");
    return *i;
  };
  for (const auto& path : plan.car_paths) {
    e.start.push_back(full(path.front()));
    e.leave.push_back(full(path.back()));
  }
  return e;
}

QMatrix build_q_matrix(const graph::RoadGraph& road, std::span<const Endpoints> endpoints, int office, int jobs,
                       const solver::SolveConfig& cfg) {
  if (endpoints.empty()) throw UsageError("build_q_matrix: no subgraphs");
  if (office < 0 || office >= road.node_count()) throw UsageError("build_q_matrix: office is not a road node");
  const int Kc = static_cast<int>(endpoints[0].start.size());
  for (const Endpoints& e : endpoints)
    if (static_cast<int>(e.start.size()) != Kc || static_cast<int>(e.leave.size()) != Kc || Kc < 1)
      throw UsageError("build_q_matrix: every subgraph needs one start and one leave node per car");

  const int n = static_cast<int>(endpoints.size()) + 1;
  std::vector<Endpoints> place(n);
  place[0] = {std::vector<int>(Kc, office), std::vector<int>(Kc, office)};
  for (int s = 1; s < n; ++s) place[s] = endpoints[s - 1];

  std::map<int, graph::ShortestPathTree> trees;
  for (const Endpoints& e : place)
    for (int v : e.leave)
      if (!trees.count(v)) trees.emplace(v, graph::dijkstra(road, v));

  QMatrix Q(n);
  std::vector<std::pair<int, int>> work;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) work.push_back({a, b});

  std::atomic<size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  const auto worker = [&] {
    while (true) {
      const size_t w = next.fetch_add(1);
      if (w >= work.size()) return;
      const auto [a, b] = work[w];
      try {
        std::vector<double> d(static_cast<size_t>(Kc) * Kc);
        for (int i = 0; i < Kc; ++i)
          for (int j = 0; j < Kc; ++j) d[static_cast<size_t>(i) * Kc + j] = trees.at(place[a].leave[i]).distance[place[b].start[j]];
        const Matching m = transfer_cost(d, Kc, cfg);
        Q.at(a, b) = m.cost;
        Q.matching_at(a, b) = m.to;
      } catch (const Error& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          const std::string what = "Q(" + place_name(a) + ", " + place_name(b) + "): " + e.what();
          failure = dynamic_cast<const RoutingError*>(&e) ? std::make_exception_ptr(RoutingError(what))
                                                          : std::make_exception_ptr(SolverError(what));
        }
        next = work.size();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, std::max(1, static_cast<int>(work.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<int> identity(Kc);
  for (int i = 0; i < Kc; ++i) identity[i] = i;
  for (int a = 0; a < n; ++a) Q.matching_at(a, a) = identity;
  return Q;
}

bqp::BinaryProgram build_atsp_program(const QMatrix& Q) {
  const int S = Q.subgraphs();
  if (S < 1) throw UsageError("atsp: need at least one subgraph");
  for (int a = 0; a < Q.size(); ++a)
    for (int b = 0; b < Q.size(); ++b)
      if (!std::isfinite(Q(a, b))) throw UsageError("atsp: Q has a non-finite entry");
  ProgramBuilder b;
  const auto x = [S](int s, int p) { return VarId{static_cast<std::uint32_t>((s - 1) * S + (p - 1))}; };
  for (int s = 1; s <= S; ++s)
    for (int p = 1; p <= S; ++p) b.add_var({"x", {s, p}});
  for (int s = 1; s <= S; ++s) {
    b.add_linear(x(s, 1), bqp::rational_from_double(Q(0, s)));
    b.add_linear(x(s, S), bqp::rational_from_double(Q(s, 0)));
  }
  for (int p = 1; p < S; ++p)
    for (int s = 1; s <= S; ++s)
      for (int t = 1; t <= S; ++t)
        if (s != t) b.add_quadratic(x(s, p), x(t, p + 1), bqp::rational_from_double(Q(s, t)));
  for (int s = 1; s <= S; ++s) {
    std::vector<Term> row;
    for (int p = 1; p <= S; ++p) row.push_back({x(s, p), 1});
    b.add_constraint(std::move(row), Relation::Equal, 1, "visit_" + std::to_string(s));
  }
  for (int p = 1; p <= S; ++p) {
    std::vector<Term> row;
    for (int s = 1; s <= S; ++s) row.push_back({x(s, p), 1});
    b.add_constraint(std::move(row), Relation::Equal, 1, "position_" + std::to_string(p));
  }
  return std::move(b).build();
}

bqp::LinearizedProgram atsp_solving_form(const bqp::BinaryProgram& program, int S) {
  if (program.var_count() != S * S) throw UsageError("atsp: program does not have S x S position variables");
  const auto x = [S](int s, int p) { return VarId{static_cast<std::uint32_t>((s - 1) * S + (p - 1))}; };
  std::map<std::pair<std::uint32_t, std::uint32_t>, bqp::Rational> cost;
  for (const auto& q : program.objective().quadratic) cost[{q.first.index, q.second.index}] = q.coef;

  // Every consecutive pair gets an auxiliary, costed or not. The linking
  // rows make z exact at integral x, so no McCormick rows are needed:
  // with x(s,p) = x(t,p+1) = 1 every other z in row (s,p) and column
  // (t,p+1) is forced to zero and z(s,p,t,p+1) takes the whole unit.
  ProgramBuilder b;
  for (VarId v{0}; v.index < static_cast<std::uint32_t>(program.var_count()); ++v.index)
    b.add_var(program.label(v), program.kind(v));
  for (const auto& t : program.objective().linear) b.add_linear(t.var, t.coef);
  b.add_constant(program.objective().constant);
  for (const auto& row : program.constraints()) b.add_constraint(row.terms, row.relation, row.rhs, row.name);

  bqp::LinearizedProgram lin;
  std::map<std::pair<std::uint32_t, std::uint32_t>, VarId> z;
  for (int p = 1; p < S; ++p)
    for (int s = 1; s <= S; ++s)
      for (int t = 1; t <= S; ++t) {
        if (s == t) continue;
        const std::pair key{x(s, p).index, x(t, p + 1).index};
        const VarId w = b.add_var({"z", {s, p, t}}, bqp::VarKind::Auxiliary);
        if (auto it = cost.find({std::min(key.first, key.second), std::max(key.first, key.second)}); it != cost.end())
          b.add_linear(w, it->second);
        z[key] = w;
        lin.products.push_back({x(s, p), x(t, p + 1), w});
      }
  for (int p = 1; p < S; ++p)
    for (int s = 1; s <= S; ++s) {
      std::vector<Term> out{{x(s, p), -1}};
      std::vector<Term> in{{x(s, p + 1), -1}};
      for (int t = 1; t <= S; ++t) {
        if (t == s) continue;
        out.push_back({z.at({x(s, p).index, x(t, p + 1).index}), 1});
        in.push_back({z.at({x(t, p).index, x(s, p + 1).index}), 1});
      }
      b.add_constraint(std::move(out), Relation::Equal, 0, "next_" + std::to_string(s) + "_" + std::to_string(p));
      b.add_constraint(std::move(in), Relation::Equal, 0, "prev_" + std::to_string(s) + "_" + std::to_string(p + 1));
    }
  lin.program = std::move(b).build();
  return lin;
}

double tour_length(const QMatrix& Q, std::span<const int> order) {
  const int S = Q.subgraphs();
  std::vector<char> seen(S + 1, 0);
  if (static_cast<int>(order.size()) != S) throw RoutingError("tour does not visit every subgraph");
  for (int s : order) {
    if (s < 1 || s > S || seen[s]) throw RoutingError("tour visits a subgraph twice or an unknown one");
    seen[s] = 1;
  }
  double len = Q(0, order.front()) + Q(order.back(), 0);
  for (size_t i = 0; i + 1 < order.size(); ++i) len += Q(order[i], order[i + 1]);
  return len;
}

Tour held_karp(const QMatrix& Q) {
  const int S = Q.subgraphs();
  if (S < 1) throw UsageError("held_karp: need at least one subgraph");
  if (S > 20) throw UsageError("held_karp: at most 20 subgraphs");
  const size_t full = (size_t{1} << S) - 1;
  constexpr double kNone = std::numeric_limits<double>::infinity();
  std::vector<double> dp((full + 1) * S, kNone);
  std::vector<int> from((full + 1) * S, -1);
  for (int j = 0; j < S; ++j) dp[(size_t{1} << j) * S + j] = Q(0, j + 1);
  for (size_t mask = 1; mask <= full; ++mask) {
    for (int j = 0; j < S; ++j) {
      const double here = dp[mask * S + j];
      if (!(mask >> j & 1) || here == kNone) continue;
      for (int k = 0; k < S; ++k) {
        if (mask >> k & 1) continue;
        const size_t next = mask | (size_t{1} << k);
        const double v = here + Q(j + 1, k + 1);
        if (v < dp[next * S + k]) {
          dp[next * S + k] = v;
          from[next * S + k] = j;
        }
      }
    }
  }
  Tour best;
  best.length = kNone;
  int last = -1;
  for (int j = 0; j < S; ++j) {
    const double v = dp[full * S + j] + Q(j + 1, 0);
    if (v < best.length) {
      best.length = v;
      last = j;
    }
  }
  size_t mask = full;
  while (last >= 0) {
    best.order.push_back(last + 1);
    const int prev = from[mask * S + last];
    mask &= ~(size_t{1} << last);
    last = prev;
  }
  std::reverse(best.order.begin(), best.order.end());
  best.lower_bound = best.length;
  return best;
}

namespace {

std::int64_t millimetres(double metres) { return std::llround(metres * 1000.0); }

// Nearest neighbour from the office; only a first incumbent.
std::vector<int> greedy_order(const QMatrix& Q) {
  const int S = Q.subgraphs();
  std::vector<char> used(S + 1, 0);
  std::vector<int> order;
  int at = 0;
  for (int step = 0; step < S; ++step) {
    int pick = -1;
    for (int s = 1; s <= S; ++s)
      if (!used[s] && (pick < 0 || Q(at, s) < Q(at, pick))) pick = s;
    used[pick] = 1;
    order.push_back(pick);
    at = pick;
  }
  return order;
}

// Moves segments of 1..3 subgraphs to the best other place while that
// shortens the tour (segments keep their direction since Q is asymmetric).
std::vector<int> relocate_improve(const QMatrix& Q, std::vector<int> order) {
  const auto cost = [&](const std::vector<int>& o) { return millimetres(tour_length(Q, o)); };
  std::int64_t current = cost(order);
  for (bool improved = true; improved;) {
    improved = false;
    const int S = static_cast<int>(order.size());
    for (int len = 1; len <= 3 && !improved; ++len)
      for (int i = 0; i + len <= S && !improved; ++i) {
        std::vector<int> rest(order.begin(), order.begin() + i);
        rest.insert(rest.end(), order.begin() + i + len, order.end());
        for (int j = 0; j <= static_cast<int>(rest.size()); ++j) {
          if (j == i) continue;
          std::vector<int> cand(rest.begin(), rest.begin() + j);
          cand.insert(cand.end(), order.begin() + i, order.begin() + i + len);
          cand.insert(cand.end(), rest.begin() + j, rest.end());
          if (const std::int64_t c = cost(cand); c < current) {
            current = c;
            order = std::move(cand);
            improved = true;
            break;
          }
        }
      }
  }
  return order;
}

}  // namespace

Tour solve_tour(const QMatrix& Q, const solver::SolveConfig& cfg) {
  const int S = Q.subgraphs();
  const bqp::BinaryProgram program = build_atsp_program(Q);
  const bqp::LinearizedProgram lin = atsp_solving_form(program, S);

  solver::SolveConfig run = cfg;
  if (!run.warm_start) {
    std::vector<std::uint8_t> start(lin.program.var_count(), 0);
    const auto order = relocate_improve(Q, greedy_order(Q));
    for (int p = 1; p <= S; ++p) start[(order[p - 1] - 1) * S + (p - 1)] = 1;
    for (const auto& pr : lin.products) start[pr.z.index] = start[pr.a.index] & start[pr.b.index];
    run.warm_start = std::move(start);
  }
  const auto r = solver::solve(lin.program, run);
  if (!r.has_solution) throw SolverError("atsp: the tour program has no solution (" + solver::to_string(r.status) + ")");

  Tour tour;
  tour.order.assign(S, -1);
  for (int s = 1; s <= S; ++s)
    for (int p = 1; p <= S; ++p)
      if (r.assignment[(s - 1) * S + (p - 1)]) tour.order[p - 1] = s;
  tour.length = tour_length(Q, tour.order);
  tour.optimal = r.status == solver::SolveStatus::Optimal;
  tour.nodes = r.stats.nodes;
  tour.lower_bound = tour.optimal ? tour.length : std::min(tour.length, r.best_bound);
  if (tour.optimal && S <= 12) {
    const Tour hk = held_karp(Q);
    if (millimetres(hk.length) != millimetres(tour.length))
      throw SolverError("atsp: tour program optimum " + std::to_string(tour.length) + " m disagrees with the subset DP " +
                        std::to_string(hk.length) + " m");
  }
  return tour;
}

TourPlan solve_atsp(const QMatrix& Q, const graph::RoadGraph& road, std::span<const Endpoints> endpoints, int office,
                    const solver::SolveConfig& cfg) {
  if (static_cast<int>(endpoints.size()) != Q.subgraphs())
    throw UsageError("solve_atsp: endpoint list does not match Q");
  const Tour best = solve_tour(Q, cfg);
  TourPlan tour;
  tour.order = best.order;
  tour.total = best.length;
  tour.optimal = best.optimal;
  tour.lower_bound = best.lower_bound;
  tour.nodes = best.nodes;

  // physical car driving each plan slot, starting with car c in slot c
  const int Kc = static_cast<int>(Q.matching(0, 0).size());
  std::vector<int> car_in_slot(Kc);
  for (int c = 0; c < Kc; ++c) car_in_slot[c] = c;
  std::map<int, graph::ShortestPathTree> trees;
  const auto leave_of = [&](int a, int slot) { return a == 0 ? office : endpoints[a - 1].leave[slot]; };
  const auto start_of = [&](int b, int slot) { return b == 0 ? office : endpoints[b - 1].start[slot]; };
  std::vector<int> stops{0};
  stops.insert(stops.end(), tour.order.begin(), tour.order.end());
  stops.push_back(0);
  for (size_t i = 0; i + 1 < stops.size(); ++i) {
    const int a = stops[i], b = stops[i + 1];
    Leg leg;
    leg.from = a;
    leg.to = b;
    leg.cost = Q(a, b);
    const auto& m = Q.matching(a, b);
    std::vector<int> next_slot_car(Kc, -1);
    for (int slot = 0; slot < Kc; ++slot) {
      const int src = leave_of(a, slot);
      const int dst = start_of(b, m[slot]);
      auto it = trees.find(src);
      if (it == trees.end()) it = trees.emplace(src, graph::dijkstra(road, src)).first;
      CarLeg cl;
      cl.car = car_in_slot[slot];
      cl.path = it->second.path_to(dst);
      if (cl.path.empty()) throw RoutingError("no road path for " + place_name(a) + " -> " + place_name(b));
      leg.makespan = std::max(leg.makespan, it->second.distance[dst]);
      leg.cars.push_back(std::move(cl));
      next_slot_car[m[slot]] = car_in_slot[slot];
    }
    std::sort(leg.cars.begin(), leg.cars.end(), [](const CarLeg& l, const CarLeg& r) { return l.car < r.car; });
    car_in_slot = next_slot_car;
    tour.legs.push_back(std::move(leg));
  }
  return tour;
}

nlohmann::json to_json(const graph::RoadGraph& road, const TourPlan& tour) {
  const auto place = [](int a) -> nlohmann::json {
    if (a == 0) return "office";
    return a - 1;
  };
  nlohmann::json order = nlohmann::json::array();
  for (int s : tour.order) order.push_back(s - 1);
  nlohmann::json legs = nlohmann::json::array();
  for (const Leg& leg : tour.legs) {
    nlohmann::json cars = nlohmann::json::array();
    for (const CarLeg& c : leg.cars) {
      nlohmann::json path = nlohmann::json::array();
      for (int v : c.path) path.push_back(road.node(v).id);
      cars.push_back({{"car", "car" + std::to_string(c.car)}, {"path", std::move(path)}});
    }
    legs.push_back({{"fromSub", place(leg.from)},
                    {"toSub", place(leg.to)},
                    {"cost_m", leg.cost},
                    {"makespan_m", leg.makespan},
                    {"cars", std::move(cars)}});
  }
  return {{"order", std::move(order)},
          {"total_m", tour.total},
          {"optimal", tour.optimal},
          {"lower_bound_m", tour.lower_bound},
          {"legs", std::move(legs)}};
}

}  // namespace canalplan::route
