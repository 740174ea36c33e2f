#include "canalplan/cli/config.hpp"

#include <set>

#include "canalplan/error.hpp"
#include "canalplan/graph/graph_io.hpp"

namespace canalplan::cli {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : (base / path).lexically_normal();
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config: field '") + key + "' has the wrong type");
  }
}

}  // namespace

void RunConfig::validate() const {
  const auto fail = [](const std::string& f, const std::string& why) {
    throw UsageError("config: '" + f + "' " + why);
  };
  if (canal_file.empty()) fail("canal", "is required");
  if (road_file.empty()) fail("road", "is required");
  if (office.empty()) fail("office", "is required");
  if (K < 1) fail("K", "must be at least 1");
  if (K_car < 1) fail("K_car", "must be at least 1");
  if (M < 1) fail("M", "must be at least 1");
  if (car_hops_per_step < 1) fail("carHopsPerStep", "must be at least 1");
  if (jobs < 1) fail("jobs", "must be at least 1");
  if (!(w_c > 0)) fail("w_c", "must be positive");
  if (!(R_max > 0)) fail("R_max", "must be positive");
  if (!(trim_margin >= 0)) fail("trimMargin", "must not be negative");
  if (!(unit_step_minutes > 0)) fail("unitStepMinutes", "must be positive");
  if (!(transfer_minutes > 0)) fail("transferMinutes", "must be positive");
  if (!(time_limit_s > 0)) fail("timeLimit", "must be positive");
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw UsageError("config: expected a JSON object");
  static const std::set<std::string> known{"canal",  "road",           "output",          "K",
                                           "K_car",  "M",              "w_c",             "R_max",
                                           "trimMargin", "office",     "carHopsPerStep",  "unitStepMinutes",
                                           "transferMinutes", "timeLimit", "seed",        "jobs",
                                           "batteryHorizon"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw UsageError("config: unknown field '" + key + "'");

  RunConfig c;
  if (j.contains("canal")) c.canal_file = resolve(base_dir, field<std::string>(j, "canal"));
  if (j.contains("road")) c.road_file = resolve(base_dir, field<std::string>(j, "road"));
  if (j.contains("output")) c.output_dir = resolve(base_dir, field<std::string>(j, "output"));
  if (j.contains("K")) c.K = field<int>(j, "K");
  if (j.contains("K_car")) c.K_car = field<int>(j, "K_car");
  if (j.contains("M")) c.M = field<int>(j, "M");
  if (j.contains("w_c")) c.w_c = field<double>(j, "w_c");
  if (j.contains("R_max")) c.R_max = field<double>(j, "R_max");
  if (j.contains("trimMargin")) c.trim_margin = field<double>(j, "trimMargin");
  if (j.contains("office")) c.office = field<std::string>(j, "office");
  if (j.contains("carHopsPerStep")) c.car_hops_per_step = field<int>(j, "carHopsPerStep");
  if (j.contains("unitStepMinutes")) c.unit_step_minutes = field<double>(j, "unitStepMinutes");
  if (j.contains("transferMinutes")) c.transfer_minutes = field<double>(j, "transferMinutes");
  if (j.contains("timeLimit")) c.time_limit_s = field<double>(j, "timeLimit");
  if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed");
  if (j.contains("jobs")) c.jobs = field<int>(j, "jobs");
  if (j.contains("batteryHorizon")) c.battery_horizon = field<bool>(j, "batteryHorizon");
  return c;
}

json to_json(const RunConfig& c) {
  return {{"canal", c.canal_file.string()},
          {"road", c.road_file.string()},
          {"output", c.output_dir.string()},
          {"K", c.K},
          {"K_car", c.K_car},
          {"M", c.M},
          {"w_c", c.w_c},
          {"R_max", c.R_max},
          {"trimMargin", c.trim_margin},
          {"office", c.office},
          {"carHopsPerStep", c.car_hops_per_step},
          {"unitStepMinutes", c.unit_step_minutes},
          {"transferMinutes", c.transfer_minutes},
          {"timeLimit", c.time_limit_s},
          {"seed", c.seed},
          {"jobs", c.jobs},
          {"batteryHorizon", c.battery_horizon}};
}

RunConfig load_config(const std::filesystem::path& file) {
  const std::string text = graph::read_text_file(file);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(file.string(), 0, "", e.what());
  }
  return config_from_json(j, file.parent_path());
}

}  // namespace canalplan::cli
