#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "canalplan/bqp/model.hpp"
#include "canalplan/error.hpp"

using namespace canalplan;
using namespace canalplan::bqp;

namespace {

std::vector<std::uint8_t> bits_of(std::uint32_t mask, int n) {
  std::vector<std::uint8_t> x(n);
  for (int i = 0; i < n; ++i) x[i] = (mask >> i) & 1u;
  return x;
}

// Dense re-evaluation: Q as an n x n table, no term merging.
Rational slow_objective(int n, const std::vector<std::tuple<int, int, Rational>>& quad,
                        const std::vector<Rational>& lin, const Rational& c,
                        const std::vector<std::uint8_t>& x) {
  std::vector<std::vector<Rational>> q(n, std::vector<Rational>(n));
  for (const auto& [a, b, v] : quad) q[a][b] += v;
  Rational s = c;
  for (int i = 0; i < n; ++i) {
    s += lin[i] * Rational(x[i]);
    for (int j = 0; j < n; ++j) s += q[i][j] * Rational(x[i] * x[j]);
  }
  return s;
}

}  // namespace

TEST(Fold, SquareBecomesLinear) {
  QuadraticObjective o;
  o.quadratic.push_back({VarId{0}, VarId{0}, 3});
  const QuadraticObjective f = fold_binary_squares(o);
  ASSERT_EQ(f.linear.size(), 1u);
  EXPECT_EQ(f.linear[0].coef, Rational(3));
  EXPECT_TRUE(f.quadratic.empty());
}

TEST(Fold, ExpandedDifferenceSquared) {
  // (a - b)^2 = a^2 - 2ab + b^2 -> a + b - 2ab
  QuadraticObjective o;
  o.quadratic = {{VarId{0}, VarId{0}, 1}, {VarId{0}, VarId{1}, -1}, {VarId{1}, VarId{0}, -1}, {VarId{1}, VarId{1}, 1}};
  const QuadraticObjective f = fold_binary_squares(o);
  ASSERT_EQ(f.linear.size(), 2u);
  EXPECT_EQ(f.linear[0].coef, Rational(1));
  EXPECT_EQ(f.linear[1].coef, Rational(1));
  ASSERT_EQ(f.quadratic.size(), 1u);
  EXPECT_EQ(f.quadratic[0].coef, Rational(-2));
  EXPECT_LT(f.quadratic[0].first, f.quadratic[0].second);
}

TEST(Fold, ExhaustivelyValuePreserving) {
  std::mt19937 rng(21);
  std::uniform_int_distribution<int> coef(-9, 9);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 10;
    std::uniform_int_distribution<int> var(0, n - 1);
    QuadraticObjective o;
    o.constant = coef(rng);
    for (int t = 0; t < 2 * n; ++t) {
      o.linear.push_back({VarId{static_cast<std::uint32_t>(var(rng))}, coef(rng)});
      o.quadratic.push_back({VarId{static_cast<std::uint32_t>(var(rng))},
                             VarId{static_cast<std::uint32_t>(var(rng))}, Rational(coef(rng), 2)});
    }
    const QuadraticObjective f = fold_binary_squares(o);
    for (const QuadTerm& q : f.quadratic) EXPECT_LT(q.first.index, q.second.index);
    for (std::uint32_t m = 0; m < (1u << n); ++m) {
      const auto x = bits_of(m, n);
      EXPECT_EQ(o.value(x), f.value(x));
    }
  }
}

TEST(Linearize, SingleProductCounts) {
  ProgramBuilder b;
  const VarId a = b.add_var({"a", {}});
  const VarId c = b.add_var({"b", {}});
  b.add_quadratic(a, c, 5);
  const BinaryProgram p = std::move(b).build();
  const LinearizedProgram lp = linearize(p);
  EXPECT_EQ(lp.program.var_count(), 3);
  EXPECT_EQ(lp.program.constraint_count(), 3);
  EXPECT_TRUE(lp.program.is_linear());
  EXPECT_EQ(lp.program.kind(lp.products[0].z), VarKind::Auxiliary);
  // a = b = 1 forces z = 1; a = 0 forces z = 0.
  EXPECT_FALSE(evaluate(lp.program, std::vector<std::uint8_t>{1, 1, 0}).feasible);
  EXPECT_TRUE(evaluate(lp.program, std::vector<std::uint8_t>{1, 1, 1}).feasible);
  EXPECT_FALSE(evaluate(lp.program, std::vector<std::uint8_t>{0, 1, 1}).feasible);
  EXPECT_TRUE(evaluate(lp.program, std::vector<std::uint8_t>{0, 1, 0}).feasible);
}

TEST(Linearize, RequiresFoldedObjective) {
  ProgramBuilder b;
  const VarId a = b.add_var({"a", {}});
  const VarId c = b.add_var({"b", {}});
  b.add_quadratic(c, a, 1);
  BinaryProgram p = std::move(b).build();  // build folds, so this one is fine
  EXPECT_NO_THROW(linearize(p));
}

TEST(Linearize, MinOverAuxiliariesReproducesObjective) {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> coef(-6, 6);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 8;
    ProgramBuilder b;
    for (int i = 0; i < n; ++i) b.add_var({"x", {i}});
    for (int i = 0; i < n; ++i) {
      b.add_linear(VarId{static_cast<std::uint32_t>(i)}, coef(rng));
      for (int j = i + 1; j < n; ++j) {
        if (rng() % 2) b.add_quadratic(VarId{static_cast<std::uint32_t>(i)}, VarId{static_cast<std::uint32_t>(j)}, coef(rng));
      }
    }
    const BinaryProgram p = std::move(b).build();
    const LinearizedProgram lp = linearize(p);
    const int cross = static_cast<int>(p.objective().quadratic.size());
    EXPECT_EQ(lp.program.var_count(), n + cross);
    EXPECT_EQ(lp.program.constraint_count(), p.constraint_count() + 3 * cross);
    for (std::uint32_t m = 0; m < (1u << n); ++m) {
      auto x = bits_of(m, n);
      // Each z only meets its own three rows, so the minimum separates.
      std::vector<std::uint8_t> full = x;
      full.resize(lp.program.var_count(), 0);
      for (const Product& pr : lp.products) {
        Rational best;
        bool found = false;
        int best_z = 0;
        for (int z = 0; z <= 1; ++z) {
          full[pr.z.index] = static_cast<std::uint8_t>(z);
          bool ok = true;
          for (const LinearConstraint& c : lp.program.constraints()) {
            bool touches = false;
            for (const Term& t : c.terms) touches = touches || t.var == pr.z;
            if (touches) ok = ok && c.satisfied_by(full);
          }
          if (!ok) continue;
          Rational cz;
          for (const Term& t : lp.program.objective().linear)
            if (t.var == pr.z) cz = t.coef * z;
          if (!found || cz < best) {
            best = cz;
            best_z = z;
            found = true;
          }
        }
        ASSERT_TRUE(found);
        full[pr.z.index] = static_cast<std::uint8_t>(best_z);
      }
      const Evaluation ev = evaluate(lp.program, full);
      EXPECT_TRUE(ev.feasible);
      EXPECT_EQ(ev.objective, p.objective().value(x));
    }
  }
}

TEST(ProductGroups, ValidRowsOnOneHotGroups) {
  // x0 + x1 = 1 and y0 + y1 = 1, objective sum_ij c_ij x_i y_j.
  ProgramBuilder b;
  std::vector<VarId> x, y;
  for (int i = 0; i < 2; ++i) x.push_back(b.add_var({"x", {i}}));
  for (int i = 0; i < 2; ++i) y.push_back(b.add_var({"y", {i}}));
  b.add_constraint({{x[0], 1}, {x[1], 1}}, Relation::Equal, 1);
  b.add_constraint({{y[0], 1}, {y[1], 1}}, Relation::Equal, 1);
  int c = 1;
  for (VarId a : x)
    for (VarId d : y) b.add_quadratic(a, d, c++);
  LinearizedProgram lp = linearize(std::move(b).build());
  const int added = add_product_group_rows(lp);
  EXPECT_EQ(added, 4);  // each x_i against group y, each y_j against group x
  for (std::uint32_t m = 0; m < 16; ++m) {
    auto full = bits_of(m, 4);
    for (const Product& pr : lp.products) full.push_back(full[pr.a.index] & full[pr.b.index]);
    const Evaluation ev = evaluate(lp.program, full);
    const bool base = (full[0] + full[1] == 1) && (full[2] + full[3] == 1);
    EXPECT_EQ(ev.feasible, base);
  }
}

TEST(Evaluate, EmptyConstraintsAndViolation) {
  ProgramBuilder b;
  const VarId a = b.add_var({"a", {}});
  const VarId c = b.add_var({"b", {}});
  b.add_constant(Rational(1, 2));
  b.add_linear(a, 2);
  b.add_quadratic(a, c, -3);
  const BinaryProgram p = std::move(b).build();
  const Evaluation ev = evaluate(p, std::vector<std::uint8_t>{1, 1});
  EXPECT_TRUE(ev.feasible);
  EXPECT_EQ(ev.objective, Rational(-1, 2));

  ProgramBuilder b2;
  const VarId x = b2.add_var({"x", {1}});
  b2.add_constraint({{x, 1}}, Relation::Equal, 1, "pin");
  const BinaryProgram p2 = std::move(b2).build();
  const Evaluation e2 = evaluate(p2, std::vector<std::uint8_t>{0});
  EXPECT_FALSE(e2.feasible);
  ASSERT_EQ(e2.violated.size(), 1u);
  EXPECT_EQ(p2.constraints()[e2.violated[0]].name, "pin");
  EXPECT_THROW(evaluate(p2, std::vector<std::uint8_t>{0, 1}), UsageError);
}

TEST(Evaluate, MatchesDenseReevaluation) {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> coef(-20, 20);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::uniform_int_distribution<int> var(0, n - 1);
    ProgramBuilder b;
    for (int i = 0; i < n; ++i) b.add_var({"x", {i}});
    std::vector<Rational> lin(n);
    std::vector<std::tuple<int, int, Rational>> quad;
    const Rational c(coef(rng), 3);
    b.add_constant(c);
    for (int t = 0; t < n; ++t) {
      const int i = var(rng), j = var(rng);
      const Rational q(coef(rng), 1 + rng() % 4);
      quad.emplace_back(i, j, q);
      b.add_quadratic(VarId{static_cast<std::uint32_t>(i)}, VarId{static_cast<std::uint32_t>(j)}, q);
      const int k = var(rng);
      const Rational l(coef(rng), 1 + rng() % 5);
      lin[k] += l;
      b.add_linear(VarId{static_cast<std::uint32_t>(k)}, l);
    }
    const int k = var(rng);
    b.add_constraint({{VarId{static_cast<std::uint32_t>(k)}, 1}}, Relation::LessEqual, 0);
    const BinaryProgram p = std::move(b).build();
    const auto x = bits_of(static_cast<std::uint32_t>(rng()), n);
    const Evaluation ev = evaluate(p, x);
    EXPECT_EQ(ev.objective, slow_objective(n, quad, lin, c, x));
    EXPECT_EQ(ev.feasible, x[k] == 0);
  }
}

TEST(Builder, MergesDuplicateTermsAndDropsZeros) {
  ProgramBuilder b;
  const VarId a = b.add_var({"a", {}});
  const VarId c = b.add_var({"b", {}});
  b.add_constraint({{a, 1}, {c, 2}, {a, -1}, {c, 1}}, Relation::GreaterEqual, 1);
  const BinaryProgram p = std::move(b).build();
  ASSERT_EQ(p.constraints()[0].terms.size(), 1u);
  EXPECT_EQ(p.constraints()[0].terms[0].coef, Rational(3));
  ProgramBuilder bad;
  EXPECT_THROW(bad.add_linear(VarId{4}, 1), UsageError);
}

TEST(LpFormat, Sections) {
  ProgramBuilder b;
  const VarId a = b.add_var({"x", {0, 1}});
  const VarId c = b.add_var({"x", {1, 1}});
  b.add_linear(a, 1);
  b.add_quadratic(a, c, 2);
  b.add_constraint({{a, 1}, {c, 1}}, Relation::LessEqual, 1, "one");
  const LinearizedProgram lp = linearize(std::move(b).build());
  std::ostringstream out;
  write_lp_format(lp.program, out);
  const std::string s = out.str();
  EXPECT_NE(s.find("minimize"), std::string::npos);
  EXPECT_NE(s.find("subject to"), std::string::npos);
  EXPECT_NE(s.find(" one: x(0,1) + x(1,1) <= 1"), std::string::npos) << s;
  EXPECT_NE(s.find("binary"), std::string::npos);
  EXPECT_NE(s.find("bounds"), std::string::npos);
  EXPECT_NE(s.find("end"), std::string::npos);
}
