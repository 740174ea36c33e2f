#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "canalplan/bqp/model.hpp"

namespace canalplan::solver {

enum class SolveStatus { Optimal, Infeasible, TimedOut };

std::string to_string(SolveStatus s);

enum class BranchRule {
  MostFractional,   // closest to 1/2, lowest index on ties
  FirstFractional,  // lowest index
};

// One processed node, reported through SolveConfig::trace.
struct NodeTrace {
  enum class Outcome { Branched, Integral, Infeasible, Pruned };
  std::int64_t id = 0;
  std::int64_t parent = -1;
  int depth = 0;
  double bound = 0.0;      // LP value at this node (+inf when infeasible)
  double incumbent = 0.0;  // objective of the best solution so far (+inf if none)
  Outcome outcome = Outcome::Branched;
  std::vector<std::pair<std::uint32_t, std::uint8_t>> fixings;
};

struct SolveConfig {
  double time_limit_s = 600.0;
  double integrality_tol = 1e-6;
  std::int64_t node_limit = std::numeric_limits<std::int64_t>::max();
  BranchRule branch_rule = BranchRule::MostFractional;
  // Depth-first search jumps to the best open bound every this many nodes.
  int restart_interval = 1000;
  // Candidate solution; adopted as the first incumbent if it is feasible.
  std::optional<std::vector<std::uint8_t>> warm_start;
  std::function<void(const NodeTrace&)> trace;
};

struct SolveStats {
  std::int64_t nodes = 0;
  std::int64_t lp_iterations = 0;
  double wall_seconds = 0.0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  bool has_solution = false;
  std::vector<std::uint8_t> assignment;
  bqp::Rational objective;
  // Lower bound proven when the search stopped (equals objective at optimality).
  double best_bound = -std::numeric_limits<double>::infinity();
  SolveStats stats;
};

// Exact branch-and-bound over the LP relaxation. Requires a linear objective
// (linearize first); throws UsageError otherwise. Ties between equal
// objectives keep the first incumbent found, and the search order is fixed, so
// results are deterministic. Auxiliary variables are relaxed, not branched.
SolveResult solve(const bqp::BinaryProgram& program, const SolveConfig& config = {});

// Brute force over all 2^n points; quadratic objectives are allowed.
// Throws UsageError when n > 25.
SolveResult enumerate(const bqp::BinaryProgram& program);

// LP relaxation value of a linear program (binaries and auxiliaries in
// [0,1]). nullopt when the relaxation is infeasible.
std::optional<double> lp_relaxation(const bqp::BinaryProgram& program);

// Swappable exact backend.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual SolveResult run(const bqp::BinaryProgram& program, const SolveConfig& config) = 0;
};

class BranchAndBoundBackend final : public Backend {
 public:
  std::string name() const override { return "branch-and-bound"; }
  SolveResult run(const bqp::BinaryProgram& program, const SolveConfig& config) override {
    return solve(program, config);
  }
};

class EnumerationBackend final : public Backend {
 public:
  std::string name() const override { return "enumeration"; }
  SolveResult run(const bqp::BinaryProgram& program, const SolveConfig&) override {
    return enumerate(program);
  }
};

}  // namespace canalplan::solver
