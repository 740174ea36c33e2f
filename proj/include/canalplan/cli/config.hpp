#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace canalplan::cli {

// One pipeline run. JSON keys in parentheses; relative paths in a config
// file are resolved against the file's directory.
struct RunConfig {
  std::filesystem::path canal_file;        // "canal"
  std::filesystem::path road_file;         // "road"
  std::filesystem::path output_dir{"out"}; // "output"
  int K = 4;                               // "K"
  int K_car = 2;                           // "K_car"
  int M = 3;                               // "M"
  double w_c = 150.0;                      // "w_c", canal edge target length, m
  double R_max = 400.0;                    // "R_max", m
  double trim_margin = 100.0;              // "trimMargin", m
  std::string office;                      // "office", road node id
  int car_hops_per_step = 1;               // "carHopsPerStep"
  double unit_step_minutes = 10.0;         // "unitStepMinutes"
  double transfer_minutes = 10.0;          // "transferMinutes"
  double time_limit_s = 600.0;             // "timeLimit", per solver call
  std::uint64_t seed = 1;                  // "seed"
  int jobs = 1;                            // "jobs"
  bool battery_horizon = false;              // "batteryHorizon"

  // Throws UsageError naming the first bad field.
  void validate() const;
};

// Throws UsageError on unknown keys or wrong types.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const RunConfig& cfg);
// Reads and parses; IoError when unreadable, ParseError on bad JSON.
RunConfig load_config(const std::filesystem::path& file);

}  // namespace canalplan::cli
