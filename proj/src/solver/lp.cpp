#include "canalplan/solver/lp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "canalplan/error.hpp"

namespace canalplan::solver {

namespace {

constexpr double kPrimalTol = 1e-7;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kDropTol = 1e-12;
constexpr double kSoundPivot = 1e-7;
constexpr int kRefactorInterval = 1500;
constexpr int kRecomputeInterval = 400;
constexpr int kDegenerateRunForBland = 150;
constexpr int kDriftCheckInterval = 200;
constexpr int kMaxRebuilds = 4;
constexpr double kResidualTol = 1e-6;

}  // namespace

DualSimplex::DualSimplex(const LpProblem& problem, double perturbation) : problem_(&problem) {
  m_ = static_cast<int>(problem.rows.size());
  n_ = problem.cols;
  if (static_cast<int>(problem.col_lo.size()) != n_ || static_cast<int>(problem.col_hi.size()) != n_ ||
      static_cast<int>(problem.cost.size()) != n_ || static_cast<int>(problem.row_lo.size()) != m_ ||
      static_cast<int>(problem.row_hi.size()) != m_) {
    throw UsageError("LP dimensions are inconsistent");
  }
  const int total = n_ + m_;
  lo_.resize(total);
  hi_.resize(total);
  cost_.assign(total, 0.0);
  x_.assign(total, 0.0);
  for (int j = 0; j < n_; ++j) {
    if (!std::isfinite(problem.col_lo[j]) || !std::isfinite(problem.col_hi[j])) {
      throw UsageError("LP columns must be boxed");
    }
    lo_[j] = problem.col_lo[j];
    hi_[j] = problem.col_hi[j];
    cost_[j] = problem.cost[j];
  }
  for (int i = 0; i < m_; ++i) {
    if (!std::isfinite(problem.row_lo[i]) && !std::isfinite(problem.row_hi[i])) {
      throw UsageError("LP row " + std::to_string(i) + " is free");
    }
    lo_[n_ + i] = problem.row_lo[i];
    hi_[n_ + i] = problem.row_hi[i];
  }

  if (perturbation > 0.0) {
    // fixed seed: the solve path must not depend on anything but the input
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    perturbation_.resize(n_);
    for (int j = 0; j < n_; ++j) {
      const double c = cost_[j];
      perturbation_[j] = (c < 0.0 ? -1.0 : 1.0) * perturbation * (1.0 + std::abs(c)) * u(rng);
      cost_[j] += perturbation_[j];
    }
    recompute_slack();
  }

  head_.resize(m_);
  nonbasic_.resize(n_);
  slot_.resize(total);
  is_basic_.assign(total, 0);
  tableau_.assign(static_cast<size_t>(m_) * n_, 0.0);
  reset_basis();
  basis_resets_ = 0;
}

void DualSimplex::reset_basis() {
  ++basis_resets_;
  since_refactor_ = 0;
  std::fill(is_basic_.begin(), is_basic_.end(), 0);
  for (int i = 0; i < m_; ++i) {
    head_[i] = n_ + i;
    slot_[n_ + i] = i;
    is_basic_[n_ + i] = 1;
  }
  for (int k = 0; k < n_; ++k) {
    nonbasic_[k] = k;
    slot_[k] = k;
  }
  std::fill(tableau_.begin(), tableau_.end(), 0.0);
  for (int i = 0; i < m_; ++i) {
    for (const auto& [j, v] : problem_->rows[i]) at(i, j) += v;
  }
  reduced_.assign(cost_.begin(), cost_.begin() + n_);
  for (int k = 0; k < n_; ++k) {
    const int v = nonbasic_[k];
    x_[v] = reduced_[k] < 0.0 ? hi_[v] : lo_[v];
  }
  recompute_primal();
  recompute_objective();
  recompute_weights();
}

void DualSimplex::move_nonbasic(int k, double value) {
  const int v = nonbasic_[k];
  const double delta = value - x_[v];
  if (delta == 0.0) return;
  x_[v] = value;
  for (int i = 0; i < m_; ++i) {
    const double a = at(i, k);
    if (a != 0.0) x_[head_[i]] += a * delta;
  }
  objective_ += reduced_[k] * delta;
}

void DualSimplex::place_nonbasic(int k, bool prefer_current) {
  const int v = nonbasic_[k];
  const double lo = lo_[v];
  const double hi = hi_[v];
  const double d = reduced_[k];
  double target;
  if (lo == hi) {
    target = lo;
  } else if (d > kDualTol) {
    target = std::isfinite(lo) ? lo : hi;
  } else if (d < -kDualTol) {
    target = std::isfinite(hi) ? hi : lo;
  } else if (prefer_current && (x_[v] == lo || x_[v] == hi)) {
    target = x_[v];
  } else {
    target = std::isfinite(lo) ? lo : hi;
  }
  move_nonbasic(k, target);
}

void DualSimplex::set_col_bounds(int col, double lo, double hi) {
  if (col < 0 || col >= n_) throw UsageError("LP column out of range");
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
    throw UsageError("LP column bounds must be finite and ordered");
  }
  lo_[col] = lo;
  hi_[col] = hi;
  if (!is_basic_[col]) place_nonbasic(slot_[col], true);
  if (!perturbation_.empty()) recompute_slack();
}

void DualSimplex::recompute_slack() {
  double s = 0.0;
  for (int j = 0; j < n_; ++j) s += std::abs(perturbation_[j]) * std::max(std::abs(lo_[j]), std::abs(hi_[j]));
  slack_ = s;
}

void DualSimplex::polish() {
  if (perturbation_.empty()) return;
  for (int j = 0; j < n_; ++j) cost_[j] -= perturbation_[j];
  perturbation_.clear();
  slack_ = 0.0;
  recompute_duals();
  recompute_primal();
  recompute_objective();
  // Primal simplex with the smallest-index rule; the shift was tiny, so this
  // is usually a handful of pivots.
  constexpr std::int64_t kMaxPolish = 1000000;
  for (std::int64_t it = 0; it < kMaxPolish; ++it) {
    int q = -1;
    for (int k = 0; k < n_; ++k) {
      const int v = nonbasic_[k];
      if (lo_[v] == hi_[v]) continue;
      const bool up = x_[v] == lo_[v] ? reduced_[k] < -kDualTol : false;
      const bool down = x_[v] == hi_[v] ? reduced_[k] > kDualTol : false;
      if ((up || down) && (q < 0 || v < nonbasic_[q])) q = k;
    }
    if (q < 0) {
      recompute_primal();
      recompute_objective();
      return;
    }
    const int entering = nonbasic_[q];
    const double dir = x_[entering] == lo_[entering] ? 1.0 : -1.0;
    double best = hi_[entering] - lo_[entering];  // bound flip
    int leave = -1;
    double target = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double rate = at(i, q) * dir;
      if (std::abs(rate) < kPivotTol) continue;
      const int v = head_[i];
      const double bound = rate > 0.0 ? hi_[v] : lo_[v];
      if (!std::isfinite(bound)) continue;
      const double t = std::max(0.0, (bound - x_[v]) / rate);
      if (t < best - 1e-12 || (leave >= 0 && t <= best + 1e-12 && v < head_[leave])) {
        best = std::min(best, t);
        leave = i;
        target = bound;
      }
    }
    if (!std::isfinite(best)) throw SolverError("LP polish found an unbounded ray");
    if (leave < 0) {
      move_nonbasic(q, dir > 0.0 ? hi_[entering] : lo_[entering]);
    } else {
      pivot(leave, q, target);
    }
    ++iterations_;
  }
  throw SolverError("LP polish did not converge");
}

void DualSimplex::recompute_primal() {
  scratch_col_.clear();
  for (int k = 0; k < n_; ++k) {
    if (x_[nonbasic_[k]] != 0.0) scratch_col_.push_back(k);
  }
  for (int i = 0; i < m_; ++i) {
    double s = 0.0;
    const double* row = &tableau_[static_cast<size_t>(i) * n_];
    for (int k : scratch_col_) s += row[k] * x_[nonbasic_[k]];
    x_[head_[i]] = s;
  }
}

void DualSimplex::recompute_duals() {
  for (int k = 0; k < n_; ++k) reduced_[k] = cost_[nonbasic_[k]];
  for (int i = 0; i < m_; ++i) {
    const double c = cost_[head_[i]];
    if (c == 0.0) continue;
    const double* row = &tableau_[static_cast<size_t>(i) * n_];
    for (int k = 0; k < n_; ++k) reduced_[k] += c * row[k];
  }
}

void DualSimplex::recompute_objective() {
  double s = 0.0;
  for (int j = 0; j < n_; ++j) s += cost_[j] * x_[j];
  objective_ = s;
}

void DualSimplex::recompute_weights() {
  weight_.assign(m_, 1.0);
  for (int i = 0; i < m_; ++i) {
    const double* row = &tableau_[static_cast<size_t>(i) * n_];
    double s = 1.0;
    for (int k = 0; k < n_; ++k) s += row[k] * row[k];
    weight_[i] = s;
  }
}

double DualSimplex::primal_residual() const {
  double worst = 0.0;
  for (int i = 0; i < m_; ++i) {
    double s = 0.0;
    for (const auto& [j, v] : problem_->rows[i]) s += v * x_[j];
    worst = std::max(worst, std::abs(s - x_[n_ + i]));
  }
  return worst;
}

// Rebuilds the tableau from the original rows. With S the basic columns and
// R1 the rows whose logicals are nonbasic, A[R1,S] is square and nonsingular
// for any valid basis; everything else follows from it.
bool DualSimplex::refactor() {
  ++refactorizations_;
  since_refactor_ = 0;
  const auto& rows = problem_->rows;

  std::vector<int> basic_cols;   // structural basics
  std::vector<int> pos_in_s(n_, -1);
  for (int i = 0; i < m_; ++i) {
    if (head_[i] < n_) {
      pos_in_s[head_[i]] = static_cast<int>(basic_cols.size());
      basic_cols.push_back(head_[i]);
    }
  }
  std::vector<int> r1;
  for (int l = 0; l < m_; ++l) {
    if (!is_basic_[n_ + l]) r1.push_back(l);
  }
  const int k = static_cast<int>(basic_cols.size());
  if (static_cast<int>(r1.size()) != k) throw SolverError("LP basis bookkeeping is inconsistent");

  Eigen::MatrixXd x_s;  // k x n: basic columns in terms of the nonbasic slots
  if (k > 0) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(k, n_);
    for (int a = 0; a < k; ++a) {
      const int l = r1[a];
      for (const auto& [j, v] : rows[l]) {
        if (pos_in_s[j] >= 0) {
          m(a, pos_in_s[j]) += v;
        } else {
          rhs(a, slot_[j]) -= v;
        }
      }
      rhs(a, slot_[n_ + l]) += 1.0;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    const auto diag = lu.matrixLU().diagonal().cwiseAbs();
    const double largest = diag.maxCoeff();
    const double smallest = diag.minCoeff();
    if (!(smallest > 1e-11 * std::max(1.0, largest))) return false;
    x_s = lu.solve(rhs);
  }

  std::fill(tableau_.begin(), tableau_.end(), 0.0);
  for (int i = 0; i < m_; ++i) {
    const int v = head_[i];
    double* row = &tableau_[static_cast<size_t>(i) * n_];
    if (v < n_) {
      const int b = pos_in_s[v];
      for (int c = 0; c < n_; ++c) row[c] = x_s(b, c);
    } else {
      for (const auto& [j, a] : rows[v - n_]) {
        if (pos_in_s[j] >= 0) {
          const int b = pos_in_s[j];
          for (int c = 0; c < n_; ++c) row[c] += a * x_s(b, c);
        } else {
          row[slot_[j]] += a;
        }
      }
    }
    for (int c = 0; c < n_; ++c) {
      if (std::abs(row[c]) < kDropTol) row[c] = 0.0;
    }
  }
  recompute_duals();
  recompute_primal();
  for (int c = 0; c < n_; ++c) place_nonbasic(c, true);
  recompute_primal();
  recompute_objective();
  recompute_weights();
  return true;
}

int DualSimplex::choose_leaving(bool bland) const {
  int best = -1;
  double best_score = 0.0;
  for (int i = 0; i < m_; ++i) {
    const int v = head_[i];
    double infeas = 0.0;
    if (x_[v] < lo_[v] - kPrimalTol) {
      infeas = lo_[v] - x_[v];
    } else if (x_[v] > hi_[v] + kPrimalTol) {
      infeas = x_[v] - hi_[v];
    } else {
      continue;
    }
    if (bland) {
      if (best < 0 || v < head_[best]) best = i;
      continue;
    }
    const double score = infeas * infeas / weight_[i];
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

int DualSimplex::choose_entering(int r, double direction, bool bland) const {
  const double* row = &tableau_[static_cast<size_t>(r) * n_];
  double theta_max = kInf;
  scratch_cands_.clear();
  for (int k = 0; k < n_; ++k) {
    const double alpha = row[k];
    if (std::abs(alpha) < kPivotTol) continue;
    const int v = nonbasic_[k];
    if (lo_[v] == hi_[v]) continue;
    const double a = direction * alpha;
    const bool at_lo = x_[v] == lo_[v];
    if (at_lo ? a <= 0.0 : a >= 0.0) continue;
    scratch_cands_.push_back(k);
    const double slack = at_lo ? kDualTol : -kDualTol;
    theta_max = std::min(theta_max, std::max(0.0, (reduced_[k] + slack) / a));
  }
  int best = -1;
  if (bland) {
    // Smallest ratio, lowest index on ties; tiny pivots only as a last resort.
    bool sound = false;
    for (int k : scratch_cands_) sound = sound || std::abs(row[k]) >= kSoundPivot;
    double best_ratio = kInf;
    for (int k : scratch_cands_) {
      if (sound && std::abs(row[k]) < kSoundPivot) continue;
      const double ratio = std::max(0.0, reduced_[k] / (direction * row[k]));
      if (best < 0 || ratio < best_ratio - 1e-12 ||
          (ratio <= best_ratio + 1e-12 && nonbasic_[k] < nonbasic_[best])) {
        if (ratio < best_ratio) best_ratio = ratio;
        best = k;
      }
    }
    return best;
  }
  double best_alpha = 0.0;
  for (int k : scratch_cands_) {
    const double ratio = std::max(0.0, reduced_[k] / (direction * row[k]));
    if (ratio > theta_max) continue;
    const double mag = std::abs(row[k]);
    if (mag > best_alpha || (mag == best_alpha && nonbasic_[k] < nonbasic_[best])) {
      best_alpha = mag;
      best = k;
    }
  }
  return best;
}

void DualSimplex::pivot(int r, int q, double target) {
  const double alpha = at(r, q);
  const int leaving = head_[r];
  const int entering = nonbasic_[q];

  // Primal step: the entering column moves until the leaving row hits target.
  const double step = (target - x_[leaving]) / alpha;
  for (int i = 0; i < m_; ++i) {
    const double a = at(i, q);
    if (a != 0.0) x_[head_[i]] += a * step;
  }
  x_[entering] += step;
  objective_ += reduced_[q] * step;
  x_[leaving] = target;

  double* prow = &tableau_[static_cast<size_t>(r) * n_];
  scratch_row_.clear();
  scratch_vals_.clear();
  for (int k = 0; k < n_; ++k) {
    if (k != q && prow[k] != 0.0) {
      scratch_row_.push_back(k);
      scratch_vals_.push_back(prow[k] / alpha);
    }
  }
  const double dq = reduced_[q];
  for (size_t t = 0; t < scratch_row_.size(); ++t) reduced_[scratch_row_[t]] -= dq * scratch_vals_[t];
  reduced_[q] = dq / alpha;

  for (int i = 0; i < m_; ++i) {
    if (i == r) continue;
    double* row = &tableau_[static_cast<size_t>(i) * n_];
    const double f = row[q];
    if (f == 0.0) continue;
    double dw = 0.0;
    for (size_t t = 0; t < scratch_row_.size(); ++t) {
      const int k = scratch_row_[t];
      const double old = row[k];
      double now = old - f * scratch_vals_[t];
      if (std::abs(now) < kDropTol) now = 0.0;
      row[k] = now;
      dw += now * now - old * old;
    }
    const double nq = f / alpha;
    row[q] = nq;
    dw += nq * nq - f * f;
    weight_[i] = std::max(1.0, weight_[i] + dw);
  }
  double w = 1.0;
  for (size_t t = 0; t < scratch_row_.size(); ++t) {
    const double v = -scratch_vals_[t];
    prow[scratch_row_[t]] = v;
    w += v * v;
  }
  prow[q] = 1.0 / alpha;
  w += prow[q] * prow[q];
  weight_[r] = w;

  head_[r] = entering;
  nonbasic_[q] = leaving;
  slot_[entering] = r;
  slot_[leaving] = q;
  is_basic_[entering] = 1;
  is_basic_[leaving] = 0;
}

LpStatus DualSimplex::solve(double cutoff, std::chrono::steady_clock::time_point deadline) {
  bool bland = false;
  int degenerate_run = 0;
  int rebuilds = 0;
  std::int64_t local = 0;
  // A drifted tableau can make any claim (bound, optimality, infeasibility);
  // claims are only accepted on a tableau that reproduces the original rows.
  const auto drifted = [&] { return primal_residual() > kResidualTol; };
  const auto rebuild = [&] {
    ++rebuilds;
    if (!refactor()) reset_basis();
    bland = false;
    degenerate_run = 0;
  };
  while (true) {
    if ((local & 63) == 0 && std::chrono::steady_clock::now() >= deadline) return LpStatus::TimeLimit;
    if (since_refactor_ >= kRefactorInterval) {
      if (!refactor()) reset_basis();
    } else if (local > 0 && local % kRecomputeInterval == 0) {
      recompute_primal();
      recompute_objective();
    }
    if (local > 0 && local % kDriftCheckInterval == 0 && drifted()) rebuild();
    if (objective() > cutoff) {
      recompute_primal();
      recompute_objective();
      if (objective() > cutoff) {
        if (since_refactor_ > 0 && drifted() && rebuilds < kMaxRebuilds) {
          rebuild();
          continue;
        }
        return LpStatus::Cutoff;
      }
    }
    const int r = choose_leaving(bland);
    if (r < 0) {
      // Confirm against fresh values before claiming optimality.
      recompute_primal();
      recompute_objective();
      if (choose_leaving(bland) >= 0) continue;
      if (since_refactor_ > 0 && drifted() && rebuilds < kMaxRebuilds) {
        rebuild();
        continue;
      }
      return objective() > cutoff ? LpStatus::Cutoff : LpStatus::Optimal;
    }
    const int v = head_[r];
    const bool below = x_[v] < lo_[v];
    const double direction = below ? 1.0 : -1.0;
    const double target = below ? lo_[v] : hi_[v];
    const int q = choose_entering(r, direction, bland);
    if (q < 0) {
      if (since_refactor_ > 0 && rebuilds < kMaxRebuilds) {
        rebuild();
        continue;
      }
      return LpStatus::Infeasible;
    }
    const double before = objective_;
    pivot(r, q, target);
    ++iterations_;
    ++since_refactor_;
    ++local;
    if (objective_ - before <= 1e-12 * (1.0 + std::abs(before))) {
      if (++degenerate_run > kDegenerateRunForBland) bland = true;
    } else {
      degenerate_run = 0;
    }
  }
}

}  // namespace canalplan::solver
