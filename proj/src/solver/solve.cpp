#include "canalplan/solver/solve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <tuple>

#include <boost/integer/common_factor.hpp>

#include "canalplan/error.hpp"
#include "canalplan/solver/lp.hpp"

namespace canalplan::solver {

using bqp::BinaryProgram;
using bqp::Rational;
using bqp::Relation;
using bqp::VarKind;

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::TimedOut:
      return "timed_out";
  }
  return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct BuiltLp {
  LpProblem lp;
  bool trivially_infeasible = false;
};

BuiltLp build_lp(const BinaryProgram& p) {
  BuiltLp out;
  LpProblem& lp = out.lp;
  const int n = p.var_count();
  lp.cols = n;
  lp.col_lo.assign(n, 0.0);
  lp.col_hi.assign(n, 1.0);
  lp.cost.assign(n, 0.0);
  for (const bqp::Term& t : p.objective().linear) lp.cost[t.var.index] += bqp::to_double(t.coef);

  // Identical rows are dropped; empty rows are checked once here.
  using Key = std::tuple<std::vector<std::pair<std::uint32_t, Rational>>, int, Rational>;
  std::map<Key, int> seen;
  for (const bqp::LinearConstraint& c : p.constraints()) {
    if (c.terms.empty()) {
      const bool ok = c.relation == Relation::LessEqual  ? Rational(0) <= c.rhs
                      : c.relation == Relation::Equal    ? c.rhs == Rational(0)
                                                         : Rational(0) >= c.rhs;
      if (!ok) out.trivially_infeasible = true;
      continue;
    }
    Key key;
    for (const bqp::Term& t : c.terms) std::get<0>(key).emplace_back(t.var.index, t.coef);
    std::get<1>(key) = static_cast<int>(c.relation);
    std::get<2>(key) = c.rhs;
    if (!seen.emplace(std::move(key), 0).second) continue;
    std::vector<std::pair<int, double>> row;
    row.reserve(c.terms.size());
    for (const bqp::Term& t : c.terms) row.emplace_back(static_cast<int>(t.var.index), bqp::to_double(t.coef));
    lp.rows.push_back(std::move(row));
    const double rhs = bqp::to_double(c.rhs);
    lp.row_lo.push_back(c.relation == Relation::LessEqual ? -kInf : rhs);
    lp.row_hi.push_back(c.relation == Relation::GreaterEqual ? kInf : rhs);
  }
  return out;
}

// Largest g with every objective coefficient an integer multiple of g, so
// objective values differ by multiples of g (0 when the objective is constant).
Rational granularity(const BinaryProgram& p) {
  std::int64_t num = 0;
  std::int64_t den = 1;
  for (const bqp::Term& t : p.objective().linear) {
    if (t.coef == Rational(0)) continue;
    const std::int64_t a = std::abs(t.coef.numerator());
    const std::int64_t b = t.coef.denominator();
    const std::int64_t l = boost::integer::lcm(den, b);
    num = boost::integer::gcd(num * (l / den), a * (l / b));
    den = l;
  }
  return Rational(num, den);
}

struct Node {
  std::vector<std::pair<std::uint32_t, std::uint8_t>> fixings;
  double parent_bound = -kInf;
  int depth = 0;
  std::int64_t id = 0;
  std::int64_t parent = -1;
};

class BranchAndBound {
 public:
  BranchAndBound(const BinaryProgram& p, const SolveConfig& cfg)
      : p_(p), cfg_(cfg), built_(build_lp(p)), start_(Clock::now()) {
    const double limit = std::max(0.0, cfg.time_limit_s);
    deadline_ = limit > 1e9 ? Clock::time_point::max()
                            : start_ + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(limit));
    constant_ = bqp::to_double(p.objective().constant);
    gran_ = bqp::to_double(granularity(p));
    fixed_.assign(p.var_count(), -1);
    want_.assign(p.var_count(), -1);
  }

  SolveResult run() {
    SolveResult result;
    if (built_.trivially_infeasible) return finish(result, true);
    lp_.emplace(built_.lp, perturbation());
    if (cfg_.warm_start) offer(*cfg_.warm_start);

    std::vector<Node> open;
    open.push_back({{}, -kInf, 0, next_id_++, -1});
    std::int64_t processed = 0;
    bool stopped = false;
    while (!open.empty()) {
      if (processed >= cfg_.node_limit || Clock::now() >= deadline_) {
        stopped = true;
        break;
      }
      if (cfg_.restart_interval > 0 && processed > 0 && processed % cfg_.restart_interval == 0) {
        auto best = std::min_element(open.begin(), open.end(), [](const Node& a, const Node& b) {
          return a.parent_bound < b.parent_bound;
        });
        std::iter_swap(best, open.end() - 1);
      }
      Node node = std::move(open.back());
      open.pop_back();
      if (!process(node, open)) {
        open.push_back(std::move(node));
        stopped = true;
        break;
      }
      ++processed;
    }
    result.stats.nodes = processed;
    if (stopped) {
      double bound = has_incumbent_ ? incumbent_value_ : kInf;
      for (const Node& n : open) bound = std::min(bound, n.parent_bound);
      result.best_bound = bound;
    }
    return finish(result, !stopped);
  }

 private:
  SolveResult& finish(SolveResult& result, bool complete) {
    result.stats.wall_seconds = seconds_since(start_);
    result.stats.lp_iterations = lp_ ? lp_->iterations() : 0;
    result.has_solution = has_incumbent_;
    if (has_incumbent_) {
      result.assignment = incumbent_;
      result.objective = incumbent_exact_;
    }
    if (complete) {
      result.status = has_incumbent_ ? SolveStatus::Optimal : SolveStatus::Infeasible;
      result.best_bound = has_incumbent_ ? incumbent_value_ : kInf;
    } else {
      result.status = SolveStatus::TimedOut;
    }
    return result;
  }

  // Nodes whose bound exceeds this cannot hold a strictly better solution.
  double cutoff() const {
    if (!has_incumbent_) return kInf;
    const double tol = 1e-6 * std::max(1.0, std::abs(incumbent_value_));
    return gran_ > 0.0 ? incumbent_value_ - gran_ + tol : incumbent_value_ - tol;
  }

  bool offer(const std::vector<std::uint8_t>& assignment) {
    if (static_cast<int>(assignment.size()) != p_.var_count()) {
      throw UsageError("warm start has " + std::to_string(assignment.size()) + " entries, model has " +
                       std::to_string(p_.var_count()) + " variables");
    }
    const bqp::Evaluation ev = bqp::evaluate(p_, assignment);
    if (!ev.feasible) return false;
    if (has_incumbent_ && !(ev.objective < incumbent_exact_)) return false;
    has_incumbent_ = true;
    incumbent_ = assignment;
    incumbent_exact_ = ev.objective;
    incumbent_value_ = bqp::to_double(ev.objective);
    return true;
  }

  void apply(const Node& node) {
    for (const auto& [v, val] : node.fixings) want_[v] = static_cast<std::int8_t>(val);
    for (std::uint32_t v : fixed_list_) {
      if (want_[v] < 0) {
        lp_->set_col_bounds(static_cast<int>(v), 0.0, 1.0);
        fixed_[v] = -1;
      }
    }
    fixed_list_.clear();
    for (const auto& [v, val] : node.fixings) {
      if (fixed_[v] != static_cast<std::int8_t>(val)) {
        lp_->set_col_bounds(static_cast<int>(v), val, val);
        fixed_[v] = static_cast<std::int8_t>(val);
      }
      fixed_list_.push_back(v);
      want_[v] = -1;
    }
  }

  void report(const Node& node, double bound, NodeTrace::Outcome outcome) {
    if (!cfg_.trace) return;
    NodeTrace t;
    t.id = node.id;
    t.parent = node.parent;
    t.depth = node.depth;
    t.bound = bound;
    t.incumbent = has_incumbent_ ? incumbent_value_ : kInf;
    t.outcome = outcome;
    t.fixings = node.fixings;
    cfg_.trace(t);
  }

  // Returns false when the time limit interrupted the node's LP.
  bool process(Node& node, std::vector<Node>& open) {
    if (node.parent_bound > cutoff()) {
      report(node, node.parent_bound, NodeTrace::Outcome::Pruned);
      return true;
    }
    apply(node);
    const double lp_cut = cutoff() - constant_;
    const LpStatus status = lp_->solve(lp_cut, deadline_);
    if (status == LpStatus::TimeLimit) return false;
    if (status == LpStatus::Infeasible) {
      report(node, kInf, NodeTrace::Outcome::Infeasible);
      return true;
    }
    const double lp_value = lp_->objective() + constant_;
    const double bound = std::max(node.parent_bound, lp_value);
    if (status == LpStatus::Cutoff || bound > cutoff()) {
      report(node, lp_value, NodeTrace::Outcome::Pruned);
      return true;
    }

    const int n = p_.var_count();
    const auto x = lp_->values();
    int pick = -1;
    double pick_score = -1.0;
    for (int v = 0; v < n; ++v) {
      if (p_.kinds()[v] != VarKind::Binary) continue;
      const double f = x[v] - std::floor(x[v]);
      const double dist = std::min(f, 1.0 - f);
      if (dist <= cfg_.integrality_tol) continue;
      if (cfg_.branch_rule == BranchRule::FirstFractional) {
        pick = v;
        break;
      }
      if (dist > pick_score + 1e-12) {
        pick_score = dist;
        pick = v;
      }
    }

    if (pick < 0) {
      std::vector<std::uint8_t> a(n);
      for (int v = 0; v < n; ++v) a[v] = x[v] > 0.5 ? 1 : 0;
      offer(a);
      report(node, lp_value, NodeTrace::Outcome::Integral);
      return true;
    }

    report(node, lp_value, NodeTrace::Outcome::Branched);
    const std::uint8_t near = x[pick] >= 0.5 ? 1 : 0;
    for (std::uint8_t val : {static_cast<std::uint8_t>(1 - near), near}) {
      Node child;
      child.fixings = node.fixings;
      child.fixings.emplace_back(static_cast<std::uint32_t>(pick), val);
      child.parent_bound = bound;
      child.depth = node.depth + 1;
      child.id = next_id_++;
      child.parent = node.id;
      open.push_back(std::move(child));
    }
    return true;
  }

  // Only with a known objective granularity: then the perturbed optimum of an
  // integral node is within half a step of the true one and still optimal.
  double perturbation() const {
    if (!(gran_ > 0.0)) return 0.0;
    double scale = 0.0;
    for (double c : built_.lp.cost) scale += 1.0 + std::abs(c);
    return std::min(1e-6, gran_ / (8.0 * std::max(1.0, scale)));
  }

  const BinaryProgram& p_;
  const SolveConfig& cfg_;
  BuiltLp built_;
  std::optional<DualSimplex> lp_;
  Clock::time_point start_;
  Clock::time_point deadline_;
  double constant_ = 0.0;
  double gran_ = 0.0;

  std::vector<std::int8_t> fixed_;
  std::vector<std::int8_t> want_;
  std::vector<std::uint32_t> fixed_list_;

  bool has_incumbent_ = false;
  std::vector<std::uint8_t> incumbent_;
  Rational incumbent_exact_;
  double incumbent_value_ = kInf;
  std::int64_t next_id_ = 0;
};

}  // namespace

SolveResult solve(const BinaryProgram& program, const SolveConfig& config) {
  if (!program.is_linear()) {
    throw UsageError("solve requires a linear objective; linearize the program first");
  }
  BranchAndBound bb(program, config);
  return bb.run();
}

std::optional<double> lp_relaxation(const BinaryProgram& program) {
  if (!program.is_linear()) throw UsageError("lp_relaxation requires a linear objective");
  BuiltLp built = build_lp(program);
  if (built.trivially_infeasible) return std::nullopt;
  DualSimplex lp(built.lp, 1e-7);
  if (lp.solve() != LpStatus::Optimal) return std::nullopt;
  lp.polish();
  return lp.objective() + bqp::to_double(program.objective().constant);
}

SolveResult enumerate(const BinaryProgram& program) {
  const int n = program.var_count();
  if (n > 25) {
    throw UsageError("enumeration is limited to 25 variables (model has " + std::to_string(n) + ")");
  }
  const auto start = Clock::now();
  std::vector<Rational> linear(n);
  for (const bqp::Term& t : program.objective().linear) linear[t.var.index] += t.coef;
  std::vector<std::vector<std::pair<int, Rational>>> partners(n);
  for (const bqp::QuadTerm& q : program.objective().quadratic) {
    if (q.first == q.second) {
      linear[q.first.index] += q.coef;
    } else {
      partners[q.first.index].emplace_back(static_cast<int>(q.second.index), q.coef);
      partners[q.second.index].emplace_back(static_cast<int>(q.first.index), q.coef);
    }
  }
  const auto& rows = program.constraints();
  std::vector<std::vector<std::pair<int, Rational>>> in_rows(n);
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
    for (const bqp::Term& t : rows[r].terms) in_rows[t.var.index].emplace_back(r, t.coef);
  }
  auto ok = [&](int r, const Rational& act) {
    switch (rows[r].relation) {
      case Relation::LessEqual:
        return act <= rows[r].rhs;
      case Relation::Equal:
        return act == rows[r].rhs;
      case Relation::GreaterEqual:
        return act >= rows[r].rhs;
    }
    return false;
  };

  std::vector<std::uint8_t> x(n, 0);
  std::vector<Rational> activity(rows.size());
  int violated = 0;
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) violated += ok(r, activity[r]) ? 0 : 1;
  Rational value = program.objective().constant;

  SolveResult result;
  auto consider = [&] {
    if (violated == 0 && (!result.has_solution || value < result.objective)) {
      result.has_solution = true;
      result.objective = value;
      result.assignment = x;
    }
  };
  consider();
  const std::uint64_t points = std::uint64_t{1} << n;
  for (std::uint64_t i = 1; i < points; ++i) {
    const int v = __builtin_ctzll(i);
    const bool on = x[v] == 0;
    Rational delta = linear[v];
    for (const auto& [u, c] : partners[v]) {
      if (x[u]) delta += c;
    }
    value += on ? delta : -delta;
    x[v] = on ? 1 : 0;
    for (const auto& [r, c] : in_rows[v]) {
      const bool before = ok(r, activity[r]);
      activity[r] += on ? c : -c;
      const bool after = ok(r, activity[r]);
      violated += (before ? 0 : -1) + (after ? 0 : 1);
    }
    consider();
  }
  result.status = result.has_solution ? SolveStatus::Optimal : SolveStatus::Infeasible;
  result.best_bound = result.has_solution ? bqp::to_double(result.objective) : kInf;
  result.stats.nodes = static_cast<std::int64_t>(points);
  result.stats.wall_seconds = seconds_since(start);
  return result;
}

}  // namespace canalplan::solver
