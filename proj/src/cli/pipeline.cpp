#include "canalplan/cli/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <set>
#include <thread>

#include "canalplan/error.hpp"

namespace canalplan::cli {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string edge_key(const std::string& a, const std::string& b) { return a < b ? a + "-" + b : b + "-" + a; }

}  // namespace

Workspace load_workspace(const RunConfig& cfg) {
  cfg.validate();
  Workspace ws;
  ws.cfg = cfg;
  ws.cfg.canal_file = std::filesystem::absolute(cfg.canal_file);
  ws.cfg.road_file = std::filesystem::absolute(cfg.road_file);
  ws.cfg.output_dir = std::filesystem::absolute(cfg.output_dir);
  graph::GraphPair raw = graph::ingest_graphs(cfg.canal_file, cfg.road_file);
  ws.graphs.canal = graph::normalize_canal_edges(raw.canal, cfg.w_c);
  ws.graphs.road = std::move(raw.road);
  const auto office = ws.graphs.road.index_of(cfg.office);
  if (!office) throw UsageError("config: office '" + cfg.office + "' is not a node of the road graph");
  ws.office = *office;
  return ws;
}

partition::PartitionResult run_partition(const Workspace& ws) {
  partition::PartitionSpec spec;
  spec.K = ws.cfg.K;
  spec.M = ws.cfg.M;
  spec.time_limit_s = ws.cfg.time_limit_s;
  return partition::partition_canal(ws.graphs.canal, spec);
}

plan::PlanningInstance subgraph_instance(const Workspace& ws, const partition::Partition& p, int s) {
  if (s < 0 || s >= p.S) throw UsageError("no subgraph " + std::to_string(s) + " in the partition");
  return plan::make_instance(ws.graphs.canal.edge_subgraph(p.subgraphs[s].edges), ws.graphs.road, ws.cfg.R_max,
                             ws.cfg.trim_margin, ws.cfg.K, ws.cfg.K_car, ws.cfg.M, ws.cfg.car_hops_per_step);
}

plan::PlanOptions plan_options(const RunConfig& cfg) {
  plan::PlanOptions o;
  o.battery_horizon = cfg.battery_horizon;
  o.solve.time_limit_s = cfg.time_limit_s;
  return o;
}

std::vector<SubgraphRun> run_planning(const Workspace& ws, const partition::Partition& p,
                                      const std::function<void(int, const SubgraphRun&)>& done) {
  std::vector<SubgraphRun> runs(p.S);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::exception_ptr error;
  int error_at = p.S;
  const auto worker = [&] {
    for (int s = next++; s < p.S && !failed; s = next++) {
      try {
        const auto t0 = Clock::now();
        SubgraphRun run;
        run.instance = subgraph_instance(ws, p, s);
        run.result = plan::plan_subgraph(run.instance, plan_options(ws.cfg));
        run.seconds = since(t0);
        runs[s] = std::move(run);
        if (done) {
          std::lock_guard lock(mu);
          done(s, runs[s]);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        // report the lowest failing subgraph, whatever the thread timing
        if (s < error_at) {
          error_at = s;
          error = std::current_exception();
        }
        failed = true;
      }
    }
  };
  const int threads = std::max(1, std::min(ws.cfg.jobs, p.S));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const PlanningError& e) {
      throw PlanningError("subgraph " + std::to_string(error_at) + ": " + e.what());
    }
  }
  return runs;
}

RoutingRun run_routing(const Workspace& ws, std::span<const SubgraphRun> plans) {
  std::vector<route::Endpoints> endpoints;
  for (const SubgraphRun& r : plans) endpoints.push_back(route::endpoints_of(r.instance, r.result.plan, ws.graphs.road));
  solver::SolveConfig cfg;
  cfg.time_limit_s = ws.cfg.time_limit_s;
  RoutingRun run;
  run.Q = route::build_q_matrix(ws.graphs.road, endpoints, ws.office, ws.cfg.jobs, cfg);
  run.tour = route::solve_atsp(run.Q, ws.graphs.road, endpoints, ws.office, cfg);
  return run;
}

CoverageSummary summarize_coverage(const graph::CanalGraph& canal, std::span<const json> plans) {
  CoverageSummary out;
  out.canal_edges = canal.edge_count();
  std::map<std::string, int> count;
  for (const auto& e : canal.edges()) count[edge_key(canal.node(e.a).id, canal.node(e.b).id)] = 0;
  for (const json& plan : plans) {
    if (!plan.contains("coverage") || !plan["coverage"].is_array())
      throw ParseError("<plan>", 0, "coverage", "missing or not an array");
    for (const json& c : plan["coverage"]) {
      const json& e = c.at("edge");
      const std::string key = edge_key(e.at(0).get<std::string>(), e.at(1).get<std::string>());
      auto it = count.find(key);
      if (it == count.end()) {
        out.unknown.push_back(key);
        continue;
      }
      ++it->second;
    }
  }
  for (const auto& [key, n] : count) {
    if (n == 0) out.missing.push_back(key);
    if (n > 1) out.duplicated.push_back(key);
    if (n > 0) ++out.covered;
  }
  return out;
}

double inspection_minutes(const RunConfig& cfg, std::span<const int> horizons) {
  int steps = 0;
  for (int T : horizons) steps += T;
  const int S = static_cast<int>(horizons.size());
  return cfg.unit_step_minutes * steps + cfg.transfer_minutes * (S - 1 + 2);
}

std::filesystem::path plan_file_name(int s) { return "plan_" + std::to_string(s) + ".json"; }

json read_json_file(const std::filesystem::path& file) {
  const std::string text = graph::read_text_file(file);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(file.string(), 0, "", e.what());
  }
}

void write_json_file(const std::filesystem::path& file, const json& j) {
  graph::write_text_file_atomic(file, j.dump(1) + "\n");
}

namespace {

json plan_artifact(const SubgraphRun& run, int s) {
  json j = plan::to_json(run.instance, run.result.plan);
  j["subgraph"] = s;
  return j;
}

json report_json(const PipelineResult& r, const CoverageSummary& cov) {
  std::vector<int> horizons;
  json planning = json::array();
  json probes = json::array();
  for (const SubgraphRun& run : r.plans) {
    horizons.push_back(run.result.plan.T);
    planning.push_back(run.seconds);
    json p = json::array();
    for (const auto& h : run.result.probes)
      p.push_back({{"T", h.T}, {"status", solver::to_string(h.status)}, {"nodes", h.nodes}});
    probes.push_back(std::move(p));
  }
  json partition_probes = json::array();
  for (const auto& p : r.partition.probes)
    partition_probes.push_back({{"S", p.S}, {"status", solver::to_string(p.status)}, {"nodes", p.nodes}});
  double planning_total = 0.0;
  for (double t : r.times.planning) planning_total += t;
  return {{"config", to_json(r.ws.cfg)},
          {"canalNodes", r.ws.graphs.canal.node_count()},
          {"canalEdges", r.ws.graphs.canal.edge_count()},
          {"roadNodes", r.ws.graphs.road.node_count()},
          {"S", r.partition.partition.S},
          {"horizons", horizons},
          {"stageSeconds",
           {{"partition", r.times.partition},
            {"planning", std::move(planning)},
            {"planningTotal", planning_total},
            {"routing", r.times.routing},
            {"total", r.times.total}}},
          {"coverage",
           {{"canalEdges", cov.canal_edges},
            {"covered", cov.covered},
            {"missing", cov.missing},
            {"duplicated", cov.duplicated},
            {"unknown", cov.unknown},
            {"exact", cov.exact()}}},
          {"tour",
           {{"total_m", r.routing.tour.total},
            {"optimal", r.routing.tour.optimal},
            {"nodes", r.routing.tour.nodes}}},
          {"solver", {{"partitionProbes", std::move(partition_probes)}, {"planningProbes", std::move(probes)}}},
          {"totalInspectionMinutes", inspection_minutes(r.ws.cfg, horizons)}};
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg, bool write, std::string* stage,
                            const std::function<void(const std::string&)>& log) {
  const auto t_all = Clock::now();
  const auto enter = [&](const char* name) {
    if (stage) *stage = name;
  };
  const auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  PipelineResult r;
  enter("ingest");
  r.ws = load_workspace(cfg);
  if (write) std::filesystem::create_directories(cfg.output_dir);
  say("canal " + std::to_string(r.ws.graphs.canal.node_count()) + " nodes / " +
      std::to_string(r.ws.graphs.canal.edge_count()) + " edges, road " + std::to_string(r.ws.graphs.road.node_count()) +
      " nodes");

  enter("partition");
  auto t0 = Clock::now();
  r.partition = run_partition(r.ws);
  r.times.partition = since(t0);
  if (write) write_json_file(cfg.output_dir / "partition.json", partition::to_json(r.ws.graphs.canal, r.partition.partition));
  say("partition: S = " + std::to_string(r.partition.partition.S));

  enter("planning");
  r.plans = run_planning(r.ws, r.partition.partition, [&](int s, const SubgraphRun& run) {
    if (write) write_json_file(cfg.output_dir / plan_file_name(s), plan_artifact(run, s));
    say("plan " + std::to_string(s) + ": " + std::to_string(run.instance.canal.edge_count()) + " edges, T = " +
        std::to_string(run.result.plan.T));
  });
  for (const SubgraphRun& run : r.plans) r.times.planning.push_back(run.seconds);

  enter("routing");
  t0 = Clock::now();
  r.routing = run_routing(r.ws, r.plans);
  r.times.routing = since(t0);
  if (write) write_json_file(cfg.output_dir / "tour.json", route::to_json(r.ws.graphs.road, r.routing.tour));
  say("route: " + std::to_string(r.routing.tour.total) + " m" + (r.routing.tour.optimal ? "" : " (time limit, not proven optimal)"));

  enter("report");
  r.times.total = since(t_all);
  std::vector<json> plan_json;
  for (int s = 0; s < static_cast<int>(r.plans.size()); ++s) plan_json.push_back(plan_artifact(r.plans[s], s));
  const CoverageSummary cov = summarize_coverage(r.ws.graphs.canal, plan_json);
  r.report = report_json(r, cov);
  if (write) write_json_file(cfg.output_dir / "report.json", r.report);
  if (!cov.exact())
    throw CoverageError("coverage is not exact: " + std::to_string(cov.missing.size()) + " missing, " +
                        std::to_string(cov.duplicated.size()) + " duplicated");
  return r;
}

partition::Partition read_partition(const Workspace& ws) {
  return partition::partition_from_json(ws.graphs.canal, read_json_file(ws.cfg.output_dir / "partition.json"));
}

plan::FleetPlan read_plan(const plan::PlanningInstance& inst, const std::filesystem::path& file) {
  return plan::plan_from_json(inst, read_json_file(file));
}

int plan_subgraph_index(const json& plan, const std::filesystem::path& file) {
  if (plan.contains("subgraph") && plan["subgraph"].is_number_integer()) return plan["subgraph"].get<int>();
  std::smatch m;
  const std::string name = file.filename().string();
  static const std::regex re(R"(plan_(\d+)(_.*)?\.json)");
  if (std::regex_match(name, m, re)) return std::stoi(m[1]);
  throw UsageError(file.string() + ": cannot tell which subgraph this plan belongs to");
}

bool Scenario::empty() const {
  return t_now == 0 && events.inspected_edges.empty() && events.removed_arcs.empty() && events.failed_uavs.empty() &&
         events.delayed_cars.empty();
}

Scenario scenario_from_json(const plan::PlanningInstance& inst, const json& j, std::uint64_t seed,
                            const std::string& source) {
  if (!j.is_object()) throw ParseError(source, 0, "", "expected an object");
  Scenario sc;
  if (j.contains("t_now")) {
    if (!j["t_now"].is_number_integer()) throw ParseError(source, 0, "t_now", "not an integer");
    sc.t_now = j["t_now"].get<int>();
  }
  if (!j.contains("events")) return sc;
  if (!j["events"].is_array()) throw ParseError(source, 0, "events", "not an array");
  std::mt19937_64 rng(seed);
  const auto str = [&](const json& v, const std::string& where) {
    if (!v.is_string()) throw ParseError(source, 0, where, "expected a string");
    return v.get<std::string>();
  };
  const auto pairs = [&](const json& ev, const char* key, const std::string& where) {
    if (!ev.contains(key) || !ev[key].is_array()) throw ParseError(source, 0, where + "." + key, "missing or not an array");
    std::vector<std::pair<std::string, std::string>> out;
    for (const json& p : ev[key]) {
      if (!p.is_array() || p.size() != 2) throw ParseError(source, 0, where + "." + key, "expected [id, id] pairs");
      out.emplace_back(str(p[0], where), str(p[1], where));
    }
    return out;
  };
  for (size_t i = 0; i < j["events"].size(); ++i) {
    const json& ev = j["events"][i];
    const std::string where = "events[" + std::to_string(i) + "]";
    if (!ev.is_object() || !ev.contains("type")) throw ParseError(source, 0, where + ".type", "missing");
    const std::string type = str(ev["type"], where + ".type");
    if (type == "edgesInspected") {
      for (const auto& [a, b] : pairs(ev, "edges", where)) {
        const auto ia = inst.canal.index_of(a), ib = inst.canal.index_of(b);
        const auto e = ia && ib ? inst.canal.edge_between(*ia, *ib) : std::nullopt;
        if (!e) throw UsageError(where + ": " + a + "-" + b + " is not an edge of this subgraph");
        sc.events.inspected_edges.push_back(*e);
      }
    } else if (type == "roadArcsRemoved") {
      const bool both = ev.value("bothWays", false);
      for (const auto& [a, b] : pairs(ev, "arcs", where)) {
        const auto ia = inst.road.index_of(a), ib = inst.road.index_of(b);
        if (!ia || !ib) throw UsageError(where + ": road arc " + a + " -> " + b + " is outside this subgraph's road network");
        sc.events.removed_arcs.push_back({*ia, *ib});
        if (both) sc.events.removed_arcs.push_back({*ib, *ia});
      }
    } else if (type == "uavFailed") {
      const std::string id = str(ev.value("uav", json()), where + ".uav");
      int k = -1;
      if (id == "random") {
        k = static_cast<int>(std::uniform_int_distribution<int>(0, inst.K - 1)(rng));
      } else {
        for (int u = 0; u < inst.K; ++u)
          if (inst.uav_id(u) == id) k = u;
      }
      if (k < 0) throw UsageError(where + ": no UAV '" + id + "'");
      sc.events.failed_uavs.push_back(k);
    } else if (type == "carDelayed") {
      const std::string id = str(ev.value("car", json()), where + ".car");
      int c = -1;
      for (int v = 0; v < inst.K_car; ++v)
        if (inst.car_id(v) == id) c = v;
      if (c < 0) throw UsageError(where + ": no car '" + id + "'");
      sc.events.delayed_cars.push_back(c);
    } else {
      throw ParseError(source, 0, where + ".type", "unknown event type '" + type + "'");
    }
  }
  return sc;
}

ReplanRun run_replan(const plan::PlanningInstance& inst, const plan::FleetPlan& previous, const Scenario& scenario,
                     const RunConfig& cfg) {
  const auto t0 = Clock::now();
  ReplanRun out;
  out.instance = plan::replan_instance(inst, previous, scenario.t_now, scenario.events);
  if (out.instance.required_edges.empty()) throw UsageError("replan: every edge is already inspected");
  plan::PlanResult r = plan::plan_subgraph(out.instance, plan_options(cfg));
  out.plan = std::move(r.plan);
  if (scenario.empty() && out.plan.T == previous.T && out.plan.objective == previous.objective) {
    plan::verify_plan(out.instance, previous);
    out.plan = previous;
    out.kept_previous = true;
  }
  out.seconds = since(t0);
  return out;
}

BenchRow bench_once(const RunConfig& cfg, const std::string& label) {
  const PipelineResult r = run_pipeline(cfg, false);
  BenchRow row;
  row.label = label;
  row.times = r.times;
  row.S = r.partition.partition.S;
  std::vector<int> horizons;
  for (const auto& p : r.partition.probes) row.partition_nodes += p.nodes;
  for (const SubgraphRun& run : r.plans) {
    horizons.push_back(run.result.plan.T);
    row.steps += run.result.plan.T;
    for (const auto& h : run.result.probes) row.planning_nodes += h.nodes;
  }
  row.routing_nodes = r.routing.tour.nodes;
  row.minutes = inspection_minutes(cfg, horizons);
  return row;
}

std::string format_bench(std::span<const BenchRow> rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %12s %12s %12s %12s %12s  %4s %5s %8s  %s\n", "run", "partition_s", "planning_s",
                "slowest_s", "routing_s", "total_s", "S", "sumT", "minutes", "nodes (partition/planning/routing)");
  out += buf;
  for (const BenchRow& r : rows) {
    double planning = 0.0, slowest = 0.0;
    for (double t : r.times.planning) planning += t, slowest = std::max(slowest, t);
    std::snprintf(buf, sizeof buf, "%-16s %12.3f %12.3f %12.3f %12.3f %12.3f  %4d %5d %8.0f  %lld/%lld/%lld\n",
                  r.label.c_str(), r.times.partition, planning, slowest, r.times.routing, r.times.total, r.S, r.steps,
                  r.minutes, static_cast<long long>(r.partition_nodes), static_cast<long long>(r.planning_nodes),
                  static_cast<long long>(r.routing_nodes));
    out += buf;
  }
  return out;
}

}  // namespace canalplan::cli
