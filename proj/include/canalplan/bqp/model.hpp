#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace canalplan::bqp {

using Rational = boost::rational<std::int64_t>;

// Nearest multiple of 1/denominator. Model coefficients that come from
// measured lengths are quantised this way (millimetres by default).
Rational rational_from_double(double value, std::int64_t denominator = 1000);
double to_double(const Rational& r);
std::string to_string(const Rational& r);

struct VarId {
  std::uint32_t index = 0;
  auto operator<=>(const VarId&) const = default;
};

// Structured variable tag, e.g. kind "x" with subscripts {k, t, i}.
struct VarLabel {
  std::string kind;
  std::vector<int> subscripts;

  std::string str() const;  // "x[0,2,5]"
  bool operator==(const VarLabel&) const = default;
};

enum class VarKind {
  Binary,
  // Product placeholder introduced by linearization: relaxed to [0,1] and
  // never branched on, since it is integral whenever the binaries are.
  Auxiliary,
};

struct Term {
  VarId var;
  Rational coef;
};

enum class Relation { LessEqual, Equal, GreaterEqual };

struct LinearConstraint {
  std::vector<Term> terms;  // sorted by variable, no duplicates
  Relation relation = Relation::Equal;
  Rational rhs;
  std::string name;

  Rational activity(std::span<const std::uint8_t> assignment) const;
  bool satisfied_by(std::span<const std::uint8_t> assignment) const;
};

struct QuadTerm {
  VarId first;  // first.index < second.index once folded
  VarId second;
  Rational coef;
};

// minimize constant + sum linear + sum quadratic
struct QuadraticObjective {
  std::vector<Term> linear;
  std::vector<QuadTerm> quadratic;
  Rational constant;

  Rational value(std::span<const std::uint8_t> assignment) const;
};

class BinaryProgram {
 public:
  int var_count() const { return static_cast<int>(labels_.size()); }
  int constraint_count() const { return static_cast<int>(constraints_.size()); }

  const VarLabel& label(VarId v) const { return labels_[v.index]; }
  VarKind kind(VarId v) const { return kinds_[v.index]; }
  const std::vector<VarLabel>& labels() const { return labels_; }
  const std::vector<VarKind>& kinds() const { return kinds_; }
  const QuadraticObjective& objective() const { return objective_; }
  const std::vector<LinearConstraint>& constraints() const { return constraints_; }

  bool is_linear() const { return objective_.quadratic.empty(); }

 private:
  friend class ProgramBuilder;

  std::vector<VarLabel> labels_;
  std::vector<VarKind> kinds_;
  QuadraticObjective objective_;
  std::vector<LinearConstraint> constraints_;
};

// Single-threaded model assembly. Terms on the same variable are merged;
// the objective is canonicalised with fold_binary_squares on build().
class ProgramBuilder {
 public:
  ProgramBuilder() = default;
  // Starts from an existing model (variables, objective and rows).
  explicit ProgramBuilder(const BinaryProgram& base);

  VarId add_var(VarLabel label, VarKind kind = VarKind::Binary);
  int var_count() const { return static_cast<int>(program_.labels_.size()); }

  void add_constraint(std::vector<Term> terms, Relation relation, Rational rhs,
                      std::string name = {});

  void add_linear(VarId v, Rational coef);
  void add_quadratic(VarId a, VarId b, Rational coef);
  void add_constant(Rational c);

  // Replaces the objective wholesale (used by transformations).
  void set_objective(QuadraticObjective objective);

  BinaryProgram build() &&;

 private:
  void check(VarId v) const;

  BinaryProgram program_;
};

// x*x == x on binaries: diagonal products move into the linear part, pairs
// are ordered (first < second) and merged, and terms are sorted. The value
// at every binary point is unchanged.
QuadraticObjective fold_binary_squares(const QuadraticObjective& objective);

struct Product {
  VarId a;
  VarId b;
  VarId z;
};

struct LinearizedProgram {
  BinaryProgram program;
  std::vector<Product> products;  // one per former quadratic term, in order
};

// Replaces each product a*b by a fresh auxiliary z with
//   z <= a,  z <= b,  z >= a + b - 1
// Variables keep their indices; auxiliaries are appended. Requires a folded
// objective (no diagonal terms); throws UsageError otherwise.
LinearizedProgram linearize(const BinaryProgram& program);

// Reformulation-linearization rows for one-hot groups: for an equality row
// sum_{k in G} x_k = 1 and a variable x_i whose products with every member of
// G exist, adds sum_k z_ik (+ x_i if i is in G) = x_i. Valid at every binary
// point, so the integer optimum is unchanged while the relaxation tightens.
// Returns the number of rows added.
int add_product_group_rows(LinearizedProgram& lp);

struct Evaluation {
  Rational objective;
  bool feasible = true;
  std::vector<int> violated;  // constraint indices
};

// Exact evaluation. Throws UsageError if the assignment length differs from
// the variable count.
Evaluation evaluate(const BinaryProgram& program, std::span<const std::uint8_t> assignment);

// Human-readable dump in CPLEX LP style (minimize / subject to / bounds /
// binary / end), one constraint per line.
void write_lp_format(const BinaryProgram& program, std::ostream& out);

}  // namespace canalplan::bqp
