#include "canalplan/bqp/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "canalplan/error.hpp"

namespace canalplan::bqp {

Rational rational_from_double(double value, std::int64_t denominator) {
  if (!std::isfinite(value)) throw UsageError("cannot represent a non-finite coefficient exactly");
  return Rational(std::llround(value * static_cast<double>(denominator)), denominator);
}

double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

std::string VarLabel::str() const {
  std::string s = kind + "[";
  for (size_t i = 0; i < subscripts.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(subscripts[i]);
  }
  return s + "]";
}

Rational LinearConstraint::activity(std::span<const std::uint8_t> assignment) const {
  Rational sum;
  for (const Term& t : terms) {
    if (assignment[t.var.index]) sum += t.coef;
  }
  return sum;
}

bool LinearConstraint::satisfied_by(std::span<const std::uint8_t> assignment) const {
  const Rational lhs = activity(assignment);
  switch (relation) {
    case Relation::LessEqual:
      return lhs <= rhs;
    case Relation::Equal:
      return lhs == rhs;
    case Relation::GreaterEqual:
      return lhs >= rhs;
  }
  return false;
}

Rational QuadraticObjective::value(std::span<const std::uint8_t> assignment) const {
  Rational sum = constant;
  for (const Term& t : linear) {
    if (assignment[t.var.index]) sum += t.coef;
  }
  for (const QuadTerm& q : quadratic) {
    if (assignment[q.first.index] && assignment[q.second.index]) sum += q.coef;
  }
  return sum;
}

ProgramBuilder::ProgramBuilder(const BinaryProgram& base) : program_(base) {}

VarId ProgramBuilder::add_var(VarLabel label, VarKind kind) {
  VarId id{static_cast<std::uint32_t>(program_.labels_.size())};
  program_.labels_.push_back(std::move(label));
  program_.kinds_.push_back(kind);
  return id;
}

void ProgramBuilder::check(VarId v) const {
  if (v.index >= program_.labels_.size()) {
    throw UsageError("variable index " + std::to_string(v.index) + " is not declared");
  }
}

void ProgramBuilder::add_constraint(std::vector<Term> terms, Relation relation, Rational rhs,
                                    std::string name) {
  for (const Term& t : terms) check(t.var);
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
  std::vector<Term> merged;
  for (const Term& t : terms) {
    if (!merged.empty() && merged.back().var == t.var) {
      merged.back().coef += t.coef;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const Term& t) { return t.coef == Rational(0); });
  if (name.empty()) name = "c" + std::to_string(program_.constraints_.size());
  program_.constraints_.push_back({std::move(merged), relation, rhs, std::move(name)});
}

void ProgramBuilder::add_linear(VarId v, Rational coef) {
  check(v);
  program_.objective_.linear.push_back({v, coef});
}

void ProgramBuilder::add_quadratic(VarId a, VarId b, Rational coef) {
  check(a);
  check(b);
  program_.objective_.quadratic.push_back({a, b, coef});
}

void ProgramBuilder::add_constant(Rational c) { program_.objective_.constant += c; }

void ProgramBuilder::set_objective(QuadraticObjective objective) {
  for (const Term& t : objective.linear) check(t.var);
  for (const QuadTerm& q : objective.quadratic) {
    check(q.first);
    check(q.second);
  }
  program_.objective_ = std::move(objective);
}

BinaryProgram ProgramBuilder::build() && {
  program_.objective_ = fold_binary_squares(program_.objective_);
  return std::move(program_);
}

QuadraticObjective fold_binary_squares(const QuadraticObjective& objective) {
  std::map<std::uint32_t, Rational> linear;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Rational> quadratic;
  for (const Term& t : objective.linear) linear[t.var.index] += t.coef;
  for (const QuadTerm& q : objective.quadratic) {
    if (q.first == q.second) {
      linear[q.first.index] += q.coef;
    } else {
      const auto key = std::minmax(q.first.index, q.second.index);
      quadratic[{key.first, key.second}] += q.coef;
    }
  }
  QuadraticObjective out;
  out.constant = objective.constant;
  for (const auto& [v, c] : linear) out.linear.push_back({VarId{v}, c});
  for (const auto& [key, c] : quadratic) out.quadratic.push_back({VarId{key.first}, VarId{key.second}, c});
  return out;
}

LinearizedProgram linearize(const BinaryProgram& program) {
  for (const QuadTerm& q : program.objective().quadratic) {
    if (q.first.index >= q.second.index) {
      throw UsageError("linearize requires a folded objective (first < second, no squares)");
    }
  }
  ProgramBuilder b(program);
  LinearizedProgram out;
  QuadraticObjective objective;
  objective.constant = program.objective().constant;
  objective.linear = program.objective().linear;
  out.products.reserve(program.objective().quadratic.size());
  for (const QuadTerm& q : program.objective().quadratic) {
    const VarId z = b.add_var({"z", {static_cast<int>(q.first.index), static_cast<int>(q.second.index)}},
                              VarKind::Auxiliary);
    const std::string tag = "mc[" + std::to_string(q.first.index) + "," + std::to_string(q.second.index) + "]";
    b.add_constraint({{z, 1}, {q.first, -1}}, Relation::LessEqual, 0, tag + "a");
    b.add_constraint({{z, 1}, {q.second, -1}}, Relation::LessEqual, 0, tag + "b");
    b.add_constraint({{q.first, 1}, {q.second, 1}, {z, -1}}, Relation::LessEqual, 1, tag + "c");
    objective.linear.push_back({z, q.coef});
    out.products.push_back({q.first, q.second, z});
  }
  b.set_objective(std::move(objective));
  out.program = std::move(b).build();
  return out;
}

int add_product_group_rows(LinearizedProgram& lp) {
  const BinaryProgram& p = lp.program;
  std::map<std::pair<std::uint32_t, std::uint32_t>, VarId> product_of;
  std::map<std::uint32_t, std::vector<std::uint32_t>> partners;
  for (const Product& pr : lp.products) {
    product_of[{pr.a.index, pr.b.index}] = pr.z;
    product_of[{pr.b.index, pr.a.index}] = pr.z;
    partners[pr.a.index].push_back(pr.b.index);
    partners[pr.b.index].push_back(pr.a.index);
  }

  // One-hot groups: equality rows with unit coefficients over binaries, rhs 1.
  std::vector<std::vector<std::uint32_t>> groups;
  std::map<std::uint32_t, std::vector<int>> groups_of;
  for (const LinearConstraint& c : p.constraints()) {
    if (c.relation != Relation::Equal || c.rhs != Rational(1) || c.terms.size() < 2) continue;
    bool unit = true;
    for (const Term& t : c.terms) {
      unit = unit && t.coef == Rational(1) && p.kind(t.var) == VarKind::Binary;
    }
    if (!unit) continue;
    std::vector<std::uint32_t> members;
    for (const Term& t : c.terms) members.push_back(t.var.index);
    for (std::uint32_t m : members) groups_of[m].push_back(static_cast<int>(groups.size()));
    groups.push_back(std::move(members));
  }

  ProgramBuilder b(p);
  std::set<std::pair<std::uint32_t, int>> done;
  int added = 0;
  for (const auto& [i, with] : partners) {
    std::set<int> candidate_groups;
    for (std::uint32_t j : with) {
      auto it = groups_of.find(j);
      if (it != groups_of.end()) candidate_groups.insert(it->second.begin(), it->second.end());
    }
    for (int g : candidate_groups) {
      if (!done.emplace(i, g).second) continue;
      std::vector<Term> terms{{VarId{i}, -1}};
      bool complete = true;
      for (std::uint32_t k : groups[g]) {
        if (k == i) {
          terms.push_back({VarId{i}, 1});
          continue;
        }
        auto it = product_of.find({i, k});
        if (it == product_of.end()) {
          complete = false;
          break;
        }
        terms.push_back({it->second, 1});
      }
      if (!complete) continue;
      b.add_constraint(std::move(terms), Relation::Equal, 0,
                       "rlt[" + std::to_string(i) + "," + std::to_string(g) + "]");
      ++added;
    }
  }
  lp.program = std::move(b).build();
  return added;
}

Evaluation evaluate(const BinaryProgram& program, std::span<const std::uint8_t> assignment) {
  if (static_cast<int>(assignment.size()) != program.var_count()) {
    throw UsageError("assignment has " + std::to_string(assignment.size()) + " entries, model has " +
                     std::to_string(program.var_count()) + " variables");
  }
  Evaluation ev;
  ev.objective = program.objective().value(assignment);
  for (int c = 0; c < program.constraint_count(); ++c) {
    if (!program.constraints()[c].satisfied_by(assignment)) {
      ev.feasible = false;
      ev.violated.push_back(c);
    }
  }
  return ev;
}

namespace {

std::string lp_name(const VarLabel& label) {
  std::string s = label.kind + "(";
  for (size_t i = 0; i < label.subscripts.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(label.subscripts[i]);
  }
  return s + ")";
}

void write_coef(std::ostream& out, const Rational& c, bool first, bool bare = false) {
  const double v = to_double(c);
  if (v < 0) {
    out << (first ? "-" : " - ");
  } else if (!first) {
    out << " + ";
  }
  if (std::abs(v) == 1.0 && !bare) return;
  std::ostringstream num;
  num.precision(12);
  num << std::abs(v);
  out << num.str() << (bare ? "" : " ");
}

}  // namespace

void write_lp_format(const BinaryProgram& program, std::ostream& out) {
  out << "\\ " << program.var_count() << " variables, " << program.constraint_count()
      << " constraints\n";
  out << "minimize\n obj: ";
  bool first = true;
  for (const Term& t : program.objective().linear) {
    write_coef(out, t.coef, first);
    out << lp_name(program.label(t.var));
    first = false;
  }
  if (!program.objective().quadratic.empty()) {
    out << (first ? "[ " : " + [ ");
    bool qfirst = true;
    for (const QuadTerm& q : program.objective().quadratic) {
      write_coef(out, q.coef * 2, qfirst);
      out << lp_name(program.label(q.first)) << " * " << lp_name(program.label(q.second));
      qfirst = false;
    }
    out << " ] / 2";
    first = false;
  }
  if (program.objective().constant != Rational(0) || first) {
    write_coef(out, program.objective().constant, first, true);
  }
  out << "\nsubject to\n";
  for (const LinearConstraint& c : program.constraints()) {
    out << " " << c.name << ": ";
    bool cf = true;
    for (const Term& t : c.terms) {
      write_coef(out, t.coef, cf);
      out << lp_name(program.label(t.var));
      cf = false;
    }
    if (cf) out << "0 ";
    out << (c.relation == Relation::LessEqual ? " <= " : c.relation == Relation::Equal ? " = " : " >= ");
    out << to_double(c.rhs) << "\n";
  }
  bool any_aux = false;
  for (int v = 0; v < program.var_count(); ++v) {
    if (program.kinds()[v] == VarKind::Auxiliary) {
      if (!any_aux) out << "bounds\n";
      any_aux = true;
      out << " 0 <= " << lp_name(program.labels()[v]) << " <= 1\n";
    }
  }
  out << "binary\n";
  int on_line = 0;
  for (int v = 0; v < program.var_count(); ++v) {
    if (program.kinds()[v] != VarKind::Binary) continue;
    out << (on_line == 0 ? " " : " ") << lp_name(program.labels()[v]);
    if (++on_line == 8) {
      out << "\n";
      on_line = 0;
    }
  }
  if (on_line) out << "\n";
  out << "end\n";
}

}  // namespace canalplan::bqp
