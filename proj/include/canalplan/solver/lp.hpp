#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace canalplan::solver {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// min cost'x  s.t.  row_lo <= A x <= row_hi,  col_lo <= x <= col_hi.
// Column bounds must be finite; row bounds may be infinite on one side.
struct LpProblem {
  int cols = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;  // sparse rows of A
  std::vector<double> row_lo;
  std::vector<double> row_hi;
  std::vector<double> col_lo;
  std::vector<double> col_hi;
  std::vector<double> cost;
};

enum class LpStatus {
  Optimal,
  Infeasible,
  // The (monotone) dual objective passed the cutoff before optimality.
  Cutoff,
  TimeLimit,
};

// Bounded-variable dual simplex on an explicit tableau.
//
// Every row gets a logical variable r = a.x bounded by [row_lo, row_hi]; the
// starting basis is all logicals with each column parked at the bound its
// cost prefers, which is dual feasible because columns are boxed. Bound
// changes keep dual feasibility (a nonbasic column just moves to the bound
// its reduced cost prefers), so branch-and-bound re-solves warm from the
// previous basis with dual simplex only.
//
// The tableau stores, for every basic variable, its expression in the
// nonbasic ones. Pivots touch only rows with a nonzero in the entering column
// and columns with a nonzero in the leaving row. Leaving rows are priced by
// infeasibility squared over the tableau row norm; the ratio test is a
// two-pass Harris test. After a run of degenerate pivots the method switches
// to the smallest-index rule (dual Bland), which cannot cycle.
//
// With perturbation > 0 every column cost c is shifted by up to
// perturbation * (1 + |c|) in the direction of its sign, which breaks the
// dual degeneracy that otherwise stalls the method on 0/1 programs with
// sparse objectives. objective() then reports a lower bound on the true LP
// value (the perturbed value minus the largest effect the shift can have);
// polish() removes the shift and finishes with primal simplex.
class DualSimplex {
 public:
  explicit DualSimplex(const LpProblem& problem, double perturbation = 0.0);

  int rows() const { return m_; }
  int cols() const { return n_; }

  void set_col_bounds(int col, double lo, double hi);
  double col_lo(int col) const { return lo_[col]; }
  double col_hi(int col) const { return hi_[col]; }

  LpStatus solve(double cutoff = kInf,
                 std::chrono::steady_clock::time_point deadline =
                     std::chrono::steady_clock::time_point::max());

  // Objective of the current basic solution. After Optimal this is the LP
  // optimum; after Cutoff it is a valid lower bound. Perturbed: a lower bound
  // in both cases.
  double objective() const { return objective_ - slack_; }

  // Restores the true costs and reoptimizes with primal simplex from the
  // current (primal feasible) basis. Call after an Optimal solve; later
  // solves run unperturbed.
  void polish();
  bool perturbed() const { return slack_ > 0.0 || !perturbation_.empty(); }
  double value(int col) const { return x_[col]; }
  std::span<const double> values() const { return {x_.data(), static_cast<size_t>(n_)}; }

  std::int64_t iterations() const { return iterations_; }
  std::int64_t refactorizations() const { return refactorizations_; }
  std::int64_t basis_resets() const { return basis_resets_; }

 private:
  double& at(int row, int col) { return tableau_[static_cast<size_t>(row) * n_ + col]; }
  double at(int row, int col) const { return tableau_[static_cast<size_t>(row) * n_ + col]; }

  void place_nonbasic(int col_slot, bool prefer_current);
  void move_nonbasic(int col_slot, double new_value);
  void recompute_primal();
  void recompute_duals();
  void recompute_objective();
  void recompute_weights();
  void recompute_slack();
  double primal_residual() const;
  // Returns false when the basis matrix is numerically singular.
  bool refactor();
  // All-logical basis; dual feasible for any bounds.
  void reset_basis();
  int choose_leaving(bool bland) const;
  int choose_entering(int row, double direction, bool bland) const;
  void pivot(int row, int col_slot, double target);

  int m_ = 0;
  int n_ = 0;
  const LpProblem* problem_ = nullptr;

  // Variables 0..n-1 are columns, n..n+m-1 row logicals.
  std::vector<double> lo_, hi_, cost_, x_;
  std::vector<int> head_;        // basic variable of each tableau row
  std::vector<int> nonbasic_;    // variable of each tableau column slot
  std::vector<int> slot_;        // row (basic) or column slot (nonbasic) of each variable
  std::vector<std::uint8_t> is_basic_;
  std::vector<double> tableau_;  // m x n
  std::vector<double> reduced_;  // per column slot
  std::vector<double> weight_;   // per row
  double objective_ = 0.0;
  std::vector<double> perturbation_;  // per column; empty when off
  double slack_ = 0.0;

  std::int64_t iterations_ = 0;
  std::int64_t refactorizations_ = 0;
  std::int64_t basis_resets_ = 0;
  std::int64_t since_refactor_ = 0;

  std::vector<int> scratch_row_;
  std::vector<int> scratch_col_;
  std::vector<double> scratch_vals_;
  mutable std::vector<int> scratch_cands_;
};

}  // namespace canalplan::solver
