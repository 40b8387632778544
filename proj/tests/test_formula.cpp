#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include <ulpsolve/formula.hpp>
#include <ulpsolve/normalize.hpp>

#include "generators.hpp"
#include "oracles.hpp"

using namespace ulpsolve;

namespace {

constexpr auto B32 = FpFormat::Binary32;
constexpr auto B64 = FpFormat::Binary64;

Assignment assign(std::initializer_list<FpScalar> vs) { return Assignment{std::vector<FpScalar>(vs)}; }

bool same_value(FpScalar a, oracle::Value b) {
  if (a.is_nan()) return b.is_nan();
  if (a.format() == B32) return a.to_float() == b.f && std::signbit(a.to_float()) == std::signbit(b.f);
  return a.to_double() == b.d && std::signbit(a.to_double()) == std::signbit(b.d);
}

}  // namespace

TEST(Evaluator, Binary32RoundsEveryOperation) {
  // 16777216 + 1 is not representable in binary32; in double it would be.
  const auto x = term::var(0, B32);
  const auto t = term::sub(term::add(x, term::constant(1.0, B32)), x);
  const auto v = eval_term(t, assign({FpScalar::from_float(16777216.0f)}));
  EXPECT_EQ(v.to_float(), 0.0f);
}

TEST(Evaluator, SubnormalAndOverflow) {
  const auto x = term::var(0, B64);
  const auto tiny = eval_term(term::mul(x, x), assign({FpScalar::from_double(1e-160)}));
  EXPECT_EQ(tiny.to_double(), 1e-160 * 1e-160);
  EXPECT_TRUE(tiny.to_double() > 0.0);
  const auto huge = eval_term(term::mul(x, x), assign({FpScalar::from_double(1e200)}));
  EXPECT_TRUE(huge.is_inf());
}

TEST(Evaluator, NanPropagatesAndComparesFalse) {
  const auto x = term::var(0, B64);
  const auto zero = term::constant(0.0, B64);
  const auto nan_term = term::div(zero, zero);
  const auto a = assign({FpScalar::from_double(1.0)});
  EXPECT_TRUE(eval_term(nan_term, a).is_nan());
  for (auto op : {CmpOp::Eq, CmpOp::Le, CmpOp::Lt, CmpOp::Ge, CmpOp::Gt}) {
    EXPECT_FALSE(eval_atom(Atom::make(nan_term, x, op), a));
  }
}

TEST(Evaluator, NegFlipsSignOfZero) {
  const auto v = eval_term(term::neg(term::constant(0.0, B32)), assign({}));
  EXPECT_TRUE(v.sign());
  EXPECT_TRUE(v.is_zero());
}

TEST(Evaluator, FormatMismatchRejected) {
  EXPECT_THROW(term::add(term::var(0, B32), term::var(1, B64)), FormatMismatch);
  EXPECT_THROW(Atom::make(term::var(0, B32), term::var(1, B64), CmpOp::Eq), FormatMismatch);
}

TEST(Evaluator, IsModelChecksSize) {
  Formula f;
  f.variables = {{"x", B64}};
  EXPECT_THROW(is_model(f, assign({})), std::domain_error);
}

TEST(Evaluator, EmptyCnfIsTrue) {
  Formula f;
  EXPECT_TRUE(is_model(f, assign({})));
}

TEST(Evaluator, AgreesWithWideOracle) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 20000; ++i) {
    const auto vars = gen::variables(rng, 3);
    const auto a = gen::assignment(rng, vars);
    const auto fmt = gen::atom_format(rng, vars);
    const auto t = gen::term(rng, vars, fmt, 4);
    ASSERT_TRUE(same_value(eval_term(t, a), oracle::eval(t, a)));
  }
}

TEST(CompiledFormula, AgreesWithTreeEvaluator) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 3000; ++i) {
    const auto vars = gen::variables(rng, 4);
    const auto f = gen::cnf(rng, vars, 4, 3, 3);
    const auto a = gen::assignment(rng, vars);
    const CompiledFormula prog(f);
    std::vector<double> values;
    for (const auto& v : a.values) values.push_back(v.to_double());
    std::vector<double> slots(prog.slot_count());
    prog.run(values, slots);
    ASSERT_EQ(prog.holds(slots), is_model(f, a));
    std::size_t id = 0;
    for (const auto& clause : f.clauses) {
      for (const auto& atom : clause) {
        ASSERT_EQ(prog.atom_holds(static_cast<std::uint32_t>(id), slots), eval_atom(atom, a));
        ++id;
      }
    }
  }
}

TEST(CompiledFormula, SharesRepeatedSubterms) {
  const auto x = term::var(0, B64);
  const auto sq = term::mul(x, x);
  Formula f;
  f.variables = {{"x", B64}};
  f.clauses = {{Atom::make(sq, sq, CmpOp::Eq)}, {Atom::make(sq, x, CmpOp::Ge)}};
  const CompiledFormula prog(f);
  EXPECT_EQ(prog.slot_count(), 2u);  // x and x*x
}

TEST(CollectConstants, FiniteOnly) {
  Formula f;
  f.variables = {{"x", B64}};
  const auto x = term::var(0, B64);
  f.clauses = {{Atom::make(x, term::constant(2.5, B64), CmpOp::Lt),
                Atom::make(x, term::constant(INFINITY, B64), CmpOp::Lt)}};
  const auto cs = collect_constants(f);
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs.front(), 2.5);
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

Atom le(std::size_t i, std::size_t j) { return Atom::make(term::var(i, B64), term::var(j, B64), CmpOp::Le); }

std::vector<Variable> two_vars() { return {{"x", B64}, {"y", B64}}; }

}  // namespace

TEST(Normalize, NegatedLeBecomesGt) {
  const auto f = normalize(boolexpr::negate(boolexpr::atom(le(0, 1))), two_vars());
  ASSERT_EQ(f.clauses.size(), 1u);
  ASSERT_EQ(f.clauses[0].size(), 1u);
  EXPECT_EQ(f.clauses[0][0].op, CmpOp::Gt);
}

TEST(Normalize, NegatedEqSplitsIntoLtOrGt) {
  const auto eq = Atom::make(term::var(0, B64), term::var(1, B64), CmpOp::Eq);
  const auto f = normalize(boolexpr::negate(boolexpr::atom(eq)), two_vars());
  ASSERT_EQ(f.clauses.size(), 1u);
  ASSERT_EQ(f.clauses[0].size(), 2u);
  EXPECT_EQ(f.clauses[0][0].op, CmpOp::Lt);
  EXPECT_EQ(f.clauses[0][1].op, CmpOp::Gt);
}

TEST(Normalize, OtherNegations) {
  const std::pair<CmpOp, CmpOp> cases[] = {{CmpOp::Lt, CmpOp::Ge}, {CmpOp::Ge, CmpOp::Lt}, {CmpOp::Gt, CmpOp::Le}};
  for (auto [from, to] : cases) {
    const auto a = Atom::make(term::var(0, B64), term::var(1, B64), from);
    const auto f = normalize(boolexpr::negate(boolexpr::atom(a)), two_vars());
    EXPECT_EQ(f.clauses.at(0).at(0).op, to);
  }
}

TEST(Normalize, Constants) {
  EXPECT_TRUE(normalize(boolexpr::truth(true), two_vars()).clauses.empty());
  const auto f = normalize(boolexpr::truth(false), two_vars());
  ASSERT_EQ(f.clauses.size(), 1u);
  EXPECT_FALSE(is_model(f, assign({FpScalar::from_double(0), FpScalar::from_double(0)})));
  // (or false A) reduces to A
  const auto g = normalize(boolexpr::disj({boolexpr::truth(false), boolexpr::atom(le(0, 1))}), two_vars());
  ASSERT_EQ(g.clauses.size(), 1u);
  EXPECT_EQ(g.clauses[0].size(), 1u);
}

TEST(Normalize, DistributesAndOverOr) {
  // (a and b) or (c and d) -> 4 clauses
  const auto e = boolexpr::disj({boolexpr::conj({boolexpr::atom(le(0, 1)), boolexpr::atom(le(1, 0))}),
                                 boolexpr::conj({boolexpr::atom(le(0, 0)), boolexpr::atom(le(1, 1))})});
  const auto f = normalize(e, two_vars());
  EXPECT_TRUE(f.is_cnf());
  EXPECT_EQ(f.clauses.size(), 4u);
  for (const auto& c : f.clauses) EXPECT_EQ(c.size(), 2u);
}

TEST(Normalize, GuardFallsBackToNnf) {
  std::vector<BoolExpr> terms;
  for (int i = 0; i < 12; ++i) terms.push_back(boolexpr::conj({boolexpr::atom(le(0, 1)), boolexpr::atom(le(1, 0))}));
  const auto e = boolexpr::disj(terms);  // 2^12 clauses
  NormalizeOptions small;
  small.clause_guard = 1000;
  const auto f = normalize(e, two_vars(), small);
  EXPECT_FALSE(f.is_cnf());
  EXPECT_TRUE(f.clauses.empty());
  small.nnf_fallback = false;
  EXPECT_THROW(normalize(e, two_vars(), small), NormalizationError);
  const auto full = normalize(e, two_vars());
  EXPECT_TRUE(full.is_cnf());
  EXPECT_EQ(full.clauses.size(), 4096u);
}

namespace {

bool no_nan_atoms(const BoolExpr& e, const Assignment& a) {
  if (e->kind == BoolExprNode::Kind::Atom) {
    return !oracle::eval(e->atom.lhs, a).is_nan() && !oracle::eval(e->atom.rhs, a).is_nan();
  }
  for (const auto& c : e->children)
    if (!no_nan_atoms(c, a)) return false;
  return true;
}

}  // namespace

TEST(Normalize, PreservesTruthWhenNoComparisonIsUnordered) {
  // The rewrites assume totally ordered operands, so assignments at which
  // some compared side is NaN are excluded.
  std::mt19937_64 rng(99);
  int checked = 0;
  for (int i = 0; i < 4000; ++i) {
    const auto vars = gen::variables(rng, 3);
    const auto e = gen::bool_expr(rng, vars, 4, 2);
    NormalizeOptions opts;
    opts.clause_guard = gen::coin(rng) ? 10'000 : 4;
    const auto f = normalize(e, vars.list, opts);
    for (int k = 0; k < 5; ++k) {
      const auto a = gen::assignment(rng, vars);
      if (!no_nan_atoms(e, a)) continue;
      ++checked;
      ASSERT_EQ(is_model(f, a), boolexpr::eval(e, a));
      ASSERT_EQ(oracle::is_model(f, a), boolexpr::eval(e, a));
    }
  }
  EXPECT_GT(checked, 10000);
}
