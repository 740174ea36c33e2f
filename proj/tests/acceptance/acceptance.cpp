// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Budgets and sample sizes are fixed below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "canalplan/bqp/model.hpp"
#include "canalplan/cli/pipeline.hpp"
#include "canalplan/error.hpp"
#include "canalplan/graph/graph_io.hpp"
#include "canalplan/partition/partition.hpp"
#include "canalplan/plan/fleet_plan.hpp"
#include "canalplan/route/routing.hpp"
#include "canalplan/solver/solve.hpp"
#include "partition_oracle.hpp"
#include "plan_oracle.hpp"
#include "random_programs.hpp"
#include "replan_fixture.hpp"
#include "route_oracle.hpp"

namespace fs = std::filesystem;
using namespace canalplan;
using bqp::Rational;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kSolverPrograms = 100;
constexpr int kSolverMaxVars = 18;
constexpr int kSolverMaxRows = 30;
constexpr double kSolverSuiteSeconds = 120;
constexpr int kQuadraticObjectives = 50;
constexpr int kQuadraticMaxVars = 10;
constexpr int kPartitionTrees = 25;
constexpr int kPlanInstances = 20;
constexpr double kReplanBudgetSeconds = 3;   // above this: warning
constexpr double kReplanLimitSeconds = 10;   // above this: failure
constexpr int kTransferTables = 50;
constexpr int kTourInstances = 25;
constexpr int kTourMaxSubgraphs = 10;
constexpr double kRoutingSuiteSeconds = 60;
constexpr double kPipelineSeconds = 30 * 60;

const fs::path kData = CANALPLAN_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> warnings;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

long long mm(double metres) { return std::llround(metres * 1000.0); }

std::vector<std::uint8_t> bits_of(std::uint32_t mask, int n) {
  std::vector<std::uint8_t> x(n);
  for (int i = 0; i < n; ++i) x[i] = (mask >> i) & 1u;
  return x;
}

// Minimum of the (possibly quadratic) objective over feasible points.
std::optional<Rational> enumerate_directly(const bqp::BinaryProgram& p) {
  std::optional<Rational> best;
  const int n = p.var_count();
  for (std::uint32_t m = 0; m < (1u << n); ++m) {
    const auto x = bits_of(m, n);
    bool ok = true;
    for (const auto& c : p.constraints()) ok = ok && c.satisfied_by(x);
    if (!ok) continue;
    const Rational v = p.objective().value(x);
    if (!best || v < *best) best = v;
  }
  return best;
}

bqp::BinaryProgram random_quadratic(std::mt19937& rng) {
  using namespace bqp;
  const int n = 1 + static_cast<int>(rng() % kQuadraticMaxVars);
  std::uniform_int_distribution<int> coef(-6, 6);
  ProgramBuilder b;
  for (int i = 0; i < n; ++i) b.add_var({"x", {i}});
  const auto v = [](int i) { return VarId{static_cast<std::uint32_t>(i)}; };
  for (int i = 0; i < n; ++i) {
    b.add_linear(v(i), coef(rng));
    for (int j = i; j < n; ++j)
      if (rng() % 3 == 0) b.add_quadratic(v(i), v(j), Rational(coef(rng), 1 + rng() % 2));
  }
  b.add_constant(coef(rng));
  const int rows = static_cast<int>(rng() % 4);
  for (int r = 0; r < rows; ++r) {
    std::vector<Term> terms;
    int total = 0;
    for (int i = 0; i < n; ++i)
      if (rng() % 2) {
        const int c = 1 + static_cast<int>(rng() % 3);
        terms.push_back({v(i), c});
        total += c;
      }
    if (terms.empty()) continue;
    b.add_constraint(std::move(terms), rng() % 2 ? Relation::LessEqual : Relation::GreaterEqual, total / 2);
  }
  return std::move(b).build();
}

Outcome solver_exactness() {
  Outcome o;
  std::mt19937 rng(20240601);
  const auto t0 = Clock::now();
  int agree = 0;
  for (int i = 0; i < kSolverPrograms; ++i) {
    const auto p = testing_support::random_binary_program(rng, kSolverMaxVars, kSolverMaxRows);
    const auto e = solver::enumerate(p);
    const auto s = solver::solve(p);
    if (s.status == e.status && (s.status != solver::SolveStatus::Optimal || s.objective == e.objective))
      ++agree;
    else if (o.pass)
      o.pass = false, o.detail = "program " + std::to_string(i) + " disagrees; ";
  }
  const double secs = since(t0);
  if (secs >= kSolverSuiteSeconds) o.pass = false;
  o.detail += std::to_string(agree) + "/" + std::to_string(kSolverPrograms) + " agree with enumeration in " +
              fmt("%.1f s", secs) + fmt(" (limit %.0f s)", kSolverSuiteSeconds);
  return o;
}

Outcome linearization_exactness() {
  Outcome o;
  std::mt19937 rng(777);
  int agree = 0;
  for (int i = 0; i < kQuadraticObjectives; ++i) {
    const auto p = random_quadratic(rng);
    const auto direct = enumerate_directly(p);
    const auto r = solver::solve(bqp::linearize(p).program);
    const bool same = direct ? r.status == solver::SolveStatus::Optimal && r.objective == *direct
                             : r.status == solver::SolveStatus::Infeasible;
    if (same)
      ++agree;
    else
      o.pass = false;
  }
  o.detail = std::to_string(agree) + "/" + std::to_string(kQuadraticObjectives) + " linearized optima equal direct enumeration";
  return o;
}

Outcome partition_correctness() {
  Outcome o;
  std::mt19937 rng(5150);
  int agree = 0;
  for (int i = 0; i < kPartitionTrees; ++i) {
    const int edges = 2 + static_cast<int>(rng() % 8);
    const auto g = testing_support::random_tree(edges + 1, rng);
    const int K = 1 + static_cast<int>(rng() % 3);
    const int M = 1 + static_cast<int>(rng() % 3);
    const auto oracle = testing_support::enumerate_partitions(g, K, K * M);
    bool same = false;
    try {
      const auto r = partition::partition_canal(g, {.K = K, .M = M});
      same = !oracle.empty() && r.partition.S == oracle.begin()->first &&
             r.partition.objective == oracle.begin()->second;
    } catch (const PartitionError&) {
      same = oracle.empty();
    }
    if (same)
      ++agree;
    else
      o.pass = false;
  }
  o.detail = std::to_string(agree) + "/" + std::to_string(kPartitionTrees) + " trees match the enumerator";

  const auto ws = cli::load_workspace(cli::load_config(kData / "configs" / "fleet_4_2.json"));
  const auto& canal = ws.graphs.canal;
  const auto part = cli::run_partition(ws).partition;
  std::vector<int> seen(canal.edge_count(), 0);
  int lo = canal.edge_count(), hi = 0;
  bool connected = true;
  for (const auto& sg : part.subgraphs) {
    for (int e : sg.edges) ++seen[e];
    lo = std::min(lo, static_cast<int>(sg.edges.size()));
    hi = std::max(hi, static_cast<int>(sg.edges.size()));
    connected = connected && !sg.edges.empty() && testing_support::block_connected(canal, sg.edges);
  }
  const bool once = std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; });
  const bool ok = canal.edge_count() == 77 && (part.S == 7 || part.S == 8) && lo >= 4 && hi <= 12 && once && connected;
  if (!ok) o.pass = false;
  o.detail += "; bundled map: S = " + std::to_string(part.S) + ", edges per subgraph " + std::to_string(lo) + ".." +
              std::to_string(hi) + (once ? ", each edge once" : ", EDGE ASSIGNMENT BROKEN") +
              (connected ? ", connected" : ", DISCONNECTED BLOCK");
  return o;
}

Outcome plan_oracle_equivalence() {
  Outcome o;
  std::mt19937 rng(4242);
  int agree = 0, infeasible = 0;
  for (int i = 0; i < kPlanInstances; ++i) {
    const auto inst = testing_support::random_small_instance(rng);
    std::optional<int> T_min;
    std::int64_t best = 0;
    for (int T = 1; T <= inst.M && !T_min; ++T)
      if (const auto b = testing_support::brute_force(inst, T)) T_min = T, best = *b;
    bool same = false;
    try {
      const auto r = plan::plan_subgraph(inst);
      const std::string check = testing_support::walk_check(inst, r.plan);
      same = T_min && r.plan.T == *T_min && r.plan.objective == best && check.empty();
    } catch (const PlanningError&) {
      same = !T_min;
      ++infeasible;
    }
    if (same)
      ++agree;
    else
      o.pass = false;
  }
  o.detail = std::to_string(agree) + "/" + std::to_string(kPlanInstances) +
             " instances match joint-walk search and pass the walk checker (" + std::to_string(infeasible) +
             " infeasible)";
  return o;
}

Outcome replanning() {
  Outcome o;
  const auto base = testing_support::plan_bundled_subgraph("subgraph.json");
  const auto spare = testing_support::plan_bundled_subgraph("subgraph_m5.json");
  struct Case {
    const char* scenario;
    const testing_support::BaseRun* run;
  };
  for (const Case& c : {Case{"edges_done.json", &base}, Case{"road_closure.json", &base},
                        Case{"uav_failure.json", &spare}}) {
    std::string verdict;
    double secs = 0.0;
    try {
      const auto sc = cli::scenario_from_json(c.run->instance, cli::read_json_file(testing_support::replan_dir() / c.scenario),
                                              c.run->ws.cfg.seed);
      const auto t0 = Clock::now();
      const auto r = cli::run_replan(c.run->instance, c.run->plan, sc, c.run->ws.cfg);
      secs = since(t0);
      verdict = testing_support::walk_check(r.instance, r.plan);
      if (verdict.empty()) verdict = testing_support::exact_remaining_coverage(*c.run, r, sc.t_now);
      if (verdict.empty() && secs > kReplanLimitSeconds) verdict = "took " + fmt("%.2f s", secs);
      if (secs > kReplanBudgetSeconds)
        o.warnings.push_back(std::string(c.scenario) + " re-plan took " + fmt("%.2f s", secs) +
                             fmt(", over the %.0f s budget", kReplanBudgetSeconds));
    } catch (const std::exception& e) {
      verdict = e.what();
    }
    if (!verdict.empty()) o.pass = false;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + c.scenario + " " +
                (verdict.empty() ? fmt("ok %.2f s", secs) : "FAILED: " + verdict);
  }
  return o;
}

Outcome routing() {
  Outcome o;
  std::mt19937 rng(90210);
  const auto t0 = Clock::now();
  int tables = 0;
  for (int i = 0; i < kTransferTables; ++i) {
    const int K = 1 + static_cast<int>(rng() % 5);
    const auto d = testing_support::random_table(K, rng);
    const double expected = testing_support::best_permutation(d, K);
    bool same = false;
    try {
      const double cost = route::transfer_cost(d, K).cost;
      same = std::isfinite(expected) && mm(cost) == mm(expected);
    } catch (const RoutingError&) {
      same = !std::isfinite(expected);
    }
    tables += same;
  }
  int tours = 0;
  for (int i = 0; i < kTourInstances; ++i) {
    const int S = 2 + i % (kTourMaxSubgraphs - 1);
    const auto Q = testing_support::random_q(S, rng);
    try {
      const auto t = route::solve_tour(Q);
      tours += t.optimal && mm(t.length) == mm(route::held_karp(Q).length);
    } catch (const std::exception&) {
    }
  }
  const double secs = since(t0);
  o.pass = tables == kTransferTables && tours == kTourInstances && secs < kRoutingSuiteSeconds;
  o.detail = std::to_string(tables) + "/" + std::to_string(kTransferTables) + " transfer tables, " +
             std::to_string(tours) + "/" + std::to_string(kTourInstances) + " tours equal the subset DP, " +
             fmt("%.1f s", secs) + fmt(" (limit %.0f s)", kRoutingSuiteSeconds);
  return o;
}

struct CliRun {
  int exit_code = -1;
  double seconds = 0.0;
  fs::path out;
};

CliRun run_pipeline_binary(const std::string& config, const fs::path& out) {
  fs::remove_all(out);
  const std::string cmd = std::string(CANALPLAN_BIN) + " pipeline --config " + (kData / "configs" / config).string() +
                          " --output " + out.string() + " >" + (out.string() + ".log") + " 2>&1";
  const auto t0 = Clock::now();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, since(t0), out};
}

const fs::path& scratch() {
  static const fs::path dir = fs::temp_directory_path() / ("canalplan_acceptance_" + std::to_string(::getpid()));
  return dir;
}

Outcome end_to_end() {
  Outcome o;
  const CliRun run = run_pipeline_binary("fleet_4_2.json", scratch() / "fleet_4_2");
  if (run.exit_code != 0) {
    o.pass = false;
    o.detail = "exit code " + std::to_string(run.exit_code);
    return o;
  }
  const auto canal = graph::read_canal_graph(kData / "sample_canal.json");
  std::vector<nlohmann::json> plans;
  for (const auto& f : fs::directory_iterator(run.out))
    if (f.path().filename().string().rfind("plan_", 0) == 0) plans.push_back(cli::read_json_file(f.path()));
  const auto cov = cli::summarize_coverage(canal, plans);
  o.pass = canal.node_count() == 78 && canal.edge_count() == 77 && cov.exact() &&
           cov.covered == canal.edge_count() && run.seconds < kPipelineSeconds;
  o.detail = "exit 0, " + std::to_string(plans.size()) + " plan files, " + std::to_string(cov.covered) + "/" +
             std::to_string(canal.edge_count()) + " edges, " + std::to_string(cov.duplicated.size()) +
             " duplicated, " + std::to_string(cov.missing.size()) + " missing, " + fmt("%.1f s", run.seconds) +
             fmt(" (limit %.0f s)", kPipelineSeconds);
  return o;
}

Outcome fleet_ordering() {
  Outcome o;
  std::vector<double> minutes;
  for (const char* cfg : {"fleet_1_1.json", "fleet_3_3.json", "fleet_4_2.json"}) {
    const fs::path out = scratch() / fs::path(cfg).stem();
    if (!fs::exists(out / "report.json")) {
      const CliRun run = run_pipeline_binary(cfg, out);
      if (run.exit_code != 0) {
        o.pass = false;
        o.detail = std::string(cfg) + " exit code " + std::to_string(run.exit_code);
        return o;
      }
    }
    minutes.push_back(cli::read_json_file(out / "report.json").at("totalInspectionMinutes").get<double>());
  }
  o.pass = minutes[0] > minutes[1] && minutes[1] > minutes[2];
  o.detail = fmt("(1,1) %.0f min", minutes[0]) + fmt(", (3,3) %.0f min", minutes[1]) +
             fmt(", (4,2) %.0f min", minutes[2]) + (o.pass ? ", strictly decreasing" : ", NOT strictly decreasing");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{{"solver exactness", solver_exactness},
                                        {"linearization exactness", linearization_exactness},
                                        {"partition correctness", partition_correctness},
                                        {"fleet-plan oracle equivalence", plan_oracle_equivalence},
                                        {"re-planning", replanning},
                                        {"routing", routing},
                                        {"end-to-end pipeline", end_to_end},
                                        {"fleet-size ordering", fleet_ordering}};
  fs::create_directories(scratch());
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s  %zu  %-30s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str(),
                since(t0));
    for (const auto& w : o.warnings) std::printf("WARN  %zu  %s\n", i + 1, w.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(scratch());
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
