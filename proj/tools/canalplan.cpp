// canalplan: partition a canal network, plan UAV/car inspections per
// subgraph, route the cars between subgraphs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "canalplan/cli/config.hpp"
#include "canalplan/cli/pipeline.hpp"
#include "canalplan/cli/render.hpp"
#include "canalplan/error.hpp"

namespace fs = std::filesystem;
using namespace canalplan;
using namespace canalplan::cli;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kInfeasible = 3, kIo = 4 };

struct Overrides {
  std::string config;
  std::optional<std::string> canal, road, output, office;
  std::optional<int> K, K_car, M, hops, jobs;
  std::optional<double> w_c, R_max, margin, unit, transfer, time_limit;
  std::optional<std::uint64_t> seed;
  bool battery_horizon = false;

  void add_to(CLI::App* cmd, bool config_required = true) {
    auto* c = cmd->add_option("--config,-c", config, "run configuration (JSON)");
    if (config_required) c->required();
    cmd->add_option("--canal", canal, "canal graph file");
    cmd->add_option("--road", road, "road graph file");
    cmd->add_option("--output,-o", output, "artifact directory");
    cmd->add_option("--office", office, "office road node id");
    cmd->add_option("--K", K, "UAVs");
    cmd->add_option("--K-car", K_car, "cars");
    cmd->add_option("--M", M, "battery life in edges");
    cmd->add_option("--w-c", w_c, "canal edge target length (m)");
    cmd->add_option("--R-max", R_max, "UAV-car communication range (m)");
    cmd->add_option("--margin", margin, "road trimming margin (m)");
    cmd->add_option("--car-hops", hops, "road arcs a car may drive per step");
    cmd->add_option("--unit-minutes", unit, "minutes per time step");
    cmd->add_option("--transfer-minutes", transfer, "minutes per inter-subgraph transfer");
    cmd->add_option("--time-limit", time_limit, "seconds per solver call");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--jobs,-j", jobs, "worker threads");
    cmd->add_flag("--battery-horizon", battery_horizon, "start the horizon search at ceil(N/(K M))");
  }

  RunConfig resolve() const {
    RunConfig c = load_config(config);
    if (canal) c.canal_file = *canal;
    if (road) c.road_file = *road;
    if (output) c.output_dir = *output;
    if (office) c.office = *office;
    if (K) c.K = *K;
    if (K_car) c.K_car = *K_car;
    if (M) c.M = *M;
    if (hops) c.car_hops_per_step = *hops;
    if (jobs) c.jobs = *jobs;
    if (w_c) c.w_c = *w_c;
    if (R_max) c.R_max = *R_max;
    if (margin) c.trim_margin = *margin;
    if (unit) c.unit_step_minutes = *unit;
    if (transfer) c.transfer_minutes = *transfer;
    if (time_limit) c.time_limit_s = *time_limit;
    if (seed) c.seed = *seed;
    if (battery_horizon) c.battery_horizon = true;
    c.validate();
    return c;
  }
};

void note(const std::string& msg) { std::cerr << "canalplan: " << msg << "\n"; }

int cmd_pipeline(const RunConfig& cfg, std::string& stage) {
  const PipelineResult r = run_pipeline(cfg, true, &stage, note);
  std::printf("S = %d, total inspection time %.0f min, %.2f s wall; artifacts in %s\n", r.partition.partition.S,
              r.report["totalInspectionMinutes"].get<double>(), r.times.total, cfg.output_dir.string().c_str());
  return kOk;
}

int cmd_partition(const RunConfig& cfg, std::string& stage) {
  stage = "ingest";
  const Workspace ws = load_workspace(cfg);
  stage = "partition";
  const auto r = run_partition(ws);
  fs::create_directories(cfg.output_dir);
  write_json_file(cfg.output_dir / "partition.json", partition::to_json(ws.graphs.canal, r.partition));
  std::printf("S = %d\n", r.partition.S);
  return kOk;
}

int cmd_plan(const RunConfig& cfg, std::optional<int> only, std::string& stage) {
  stage = "ingest";
  const Workspace ws = load_workspace(cfg);
  const partition::Partition p = read_partition(ws);
  stage = "planning";
  for (int s = 0; s < p.S; ++s) {
    if (only && *only != s) continue;
    const auto inst = subgraph_instance(ws, p, s);
    const auto r = plan::plan_subgraph(inst, plan_options(cfg));
    auto j = plan::to_json(inst, r.plan);
    j["subgraph"] = s;
    write_json_file(cfg.output_dir / plan_file_name(s), j);
    std::printf("plan %d: T = %d\n", s, r.plan.T);
  }
  return kOk;
}

int cmd_route(const RunConfig& cfg, std::string& stage) {
  stage = "ingest";
  const Workspace ws = load_workspace(cfg);
  const partition::Partition p = read_partition(ws);
  std::vector<SubgraphRun> plans(p.S);
  for (int s = 0; s < p.S; ++s) {
    plans[s].instance = subgraph_instance(ws, p, s);
    plans[s].result.plan = read_plan(plans[s].instance, cfg.output_dir / plan_file_name(s));
    plan::verify_plan(plans[s].instance, plans[s].result.plan);
  }
  stage = "routing";
  const RoutingRun r = run_routing(ws, plans);
  write_json_file(cfg.output_dir / "tour.json", route::to_json(ws.graphs.road, r.tour));
  std::printf("tour %.1f m%s\n", r.tour.total, r.tour.optimal ? "" : " (not proven optimal)");
  return kOk;
}

int cmd_replan(const RunConfig& cfg, const fs::path& plan_file, const fs::path& scenario_file,
               std::optional<fs::path> out, std::string& stage) {
  stage = "ingest";
  const Workspace ws = load_workspace(cfg);
  const nlohmann::json prev_json = read_json_file(plan_file);
  const int s = plan_subgraph_index(prev_json, plan_file);
  Workspace from = ws;
  if (!fs::exists(cfg.output_dir / "partition.json")) from.cfg.output_dir = plan_file.parent_path();
  const partition::Partition p = read_partition(from);
  const auto inst = subgraph_instance(ws, p, s);
  const plan::FleetPlan previous = plan::plan_from_json(inst, prev_json);
  plan::verify_plan(inst, previous);
  const Scenario sc = scenario_from_json(inst, read_json_file(scenario_file), cfg.seed, scenario_file.string());

  stage = "replan";
  const ReplanRun r = run_replan(inst, previous, sc, cfg);
  auto j = plan::to_json(r.instance, r.plan);
  j["subgraph"] = s;
  if (!r.kept_previous) j["replannedAt"] = sc.t_now;
  const fs::path target = out ? *out : plan_file.parent_path() / (plan_file.stem().string() + "_replan.json");
  write_json_file(target, r.kept_previous ? prev_json : j);
  note("re-plan took " + std::to_string(r.seconds) + " s" + (r.kept_previous ? " (previous plan kept)" : ""));
  if (r.seconds > 3.0) note("warning: re-plan exceeded the 3 s budget");
  std::printf("T = %d, objective %lld, %zu edges left; wrote %s\n", r.plan.T, static_cast<long long>(r.plan.objective),
              r.instance.required_edges.size(), target.string().c_str());
  return kOk;
}

// Graphs for rendering: explicit config, else the report.json written next
// to the artifact by the pipeline.
Workspace render_workspace(const Overrides& o, const fs::path& artifact) {
  if (!o.config.empty()) return load_workspace(o.resolve());
  const fs::path report = artifact.parent_path() / "report.json";
  if (!fs::exists(report))
    throw UsageError("render: no --config given and no report.json next to " + artifact.string());
  return load_workspace(config_from_json(read_json_file(report).at("config")));
}

int cmd_render(const Overrides& o, const std::vector<std::string>& artifacts, std::optional<fs::path> out_dir) {
  for (const std::string& a : artifacts) {
    const fs::path file(a);
    if (!fs::exists(file)) throw UsageError("render: missing artifact " + a);
    const Workspace ws = render_workspace(o, file);
    const Rendering r = render_artifact(ws.graphs.canal, ws.graphs.road, ws.office, read_json_file(file));
    const fs::path dir = out_dir ? *out_dir : file.parent_path();
    fs::create_directories(dir.empty() ? fs::path(".") : dir);
    graph::write_text_file_atomic(dir / (file.stem().string() + ".dot"), r.dot);
    graph::write_text_file_atomic(dir / (file.stem().string() + ".svg"), r.svg);
    std::printf("%s -> %s.{dot,svg}\n", a.c_str(), (dir / file.stem()).string().c_str());
  }
  return kOk;
}

int cmd_bench(const std::vector<RunConfig>& cfgs, const std::vector<std::string>& labels, int repeat) {
  std::vector<BenchRow> rows;
  for (size_t i = 0; i < cfgs.size(); ++i)
    for (int k = 0; k < repeat; ++k) {
      std::string label = labels[i];
      if (repeat > 1) label += " #" + std::to_string(k + 1);
      rows.push_back(bench_once(cfgs[i], label));
      note("bench " + label + " done");
    }
  std::fputs(format_bench(rows).c_str(), stdout);
  double slowest = 0.0;
  for (const BenchRow& r : rows)
    for (double t : r.times.planning) slowest = std::max(slowest, t);
  std::printf("slowest subgraph plan: %.3f s (reference point: 140 s)\n", slowest);
  return kOk;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kUsage;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e)) return kIo;
  if (dynamic_cast<const ModelError*>(&e) || dynamic_cast<const PartitionError*>(&e) ||
      dynamic_cast<const PlanningError*>(&e) || dynamic_cast<const RoutingError*>(&e) ||
      dynamic_cast<const CoverageError*>(&e))
    return kInfeasible;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kIo;
  return kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"canal inspection planning with UAVs and cars"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Overrides o_pipe, o_part, o_plan, o_route, o_replan, o_render;
  auto* pipe = app.add_subcommand("pipeline", "partition, plan every subgraph, route the cars");
  o_pipe.add_to(pipe);
  auto* part = app.add_subcommand("partition", "write partition.json");
  o_part.add_to(part);
  auto* plan_cmd = app.add_subcommand("plan", "plan subgraphs from partition.json");
  o_plan.add_to(plan_cmd);
  std::optional<int> only;
  plan_cmd->add_option("--subgraph", only, "plan only this subgraph");
  auto* route_cmd = app.add_subcommand("route", "route cars over existing plan files");
  o_route.add_to(route_cmd);

  auto* replan_cmd = app.add_subcommand("replan", "re-plan one subgraph after events");
  o_replan.add_to(replan_cmd);
  std::string plan_file, scenario_file;
  std::optional<std::string> replan_out;
  replan_cmd->add_option("--plan", plan_file, "plan file to revise")->required();
  replan_cmd->add_option("--scenario", scenario_file, "scenario JSON")->required();
  replan_cmd->add_option("--out", replan_out, "output plan file (default <plan>_replan.json)");

  auto* render_cmd = app.add_subcommand("render", "DOT and SVG renderings of artifacts");
  o_render.add_to(render_cmd, false);
  std::vector<std::string> artifacts;
  std::optional<std::string> render_dir;
  render_cmd->add_option("artifacts", artifacts, "partition, plan or tour JSON files")->required();
  render_cmd->add_option("--out-dir", render_dir, "directory for the renders (default: next to each artifact)");

  auto* bench_cmd = app.add_subcommand("bench", "stage timing table");
  std::vector<std::string> bench_configs;
  int repeat = 1;
  int bench_jobs = 1;
  bench_cmd->add_option("--config,-c", bench_configs, "run configuration(s)")->required();
  bench_cmd->add_option("--repeat", repeat, "runs per configuration")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--jobs,-j", bench_jobs, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  std::string stage = "setup";
  try {
    if (*pipe) return cmd_pipeline(o_pipe.resolve(), stage);
    if (*part) return cmd_partition(o_part.resolve(), stage);
    if (*plan_cmd) return cmd_plan(o_plan.resolve(), only, stage);
    if (*route_cmd) return cmd_route(o_route.resolve(), stage);
    if (*replan_cmd) {
      std::optional<fs::path> out;
      if (replan_out) out = *replan_out;
      return cmd_replan(o_replan.resolve(), plan_file, scenario_file, out, stage);
    }
    if (*render_cmd) {
      std::optional<fs::path> dir;
      if (render_dir) dir = *render_dir;
      return cmd_render(o_render, artifacts, dir);
    }
    if (*bench_cmd) {
      std::vector<RunConfig> cfgs;
      std::vector<std::string> labels;
      for (const std::string& f : bench_configs) {
        RunConfig c = load_config(f);
        c.jobs = bench_jobs;
        c.validate();
        labels.push_back("K=" + std::to_string(c.K) + ",Kc=" + std::to_string(c.K_car));
        cfgs.push_back(std::move(c));
      }
      return cmd_bench(cfgs, labels, repeat);
    }
  } catch (const std::exception& e) {
    std::cerr << "canalplan: " << stage << " stage failed: " << e.what() << "\n";
    return exit_code(e);
  }
  return kUsage;
}
