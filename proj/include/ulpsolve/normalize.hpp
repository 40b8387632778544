#pragma once

// Boolean structure over atoms as produced by the parser, and its reduction
// to clause form.

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "formula.hpp"

namespace ulpsolve {

struct BoolExprNode;
using BoolExpr = std::shared_ptr<const BoolExprNode>;

struct BoolExprNode {
  enum class Kind : std::uint8_t { Atom, True, False, Not, And, Or };
  Kind kind;
  Atom atom;  // Atom only
  std::vector<BoolExpr> children;
};

namespace boolexpr {

inline BoolExpr atom(Atom a) {
  return std::make_shared<const BoolExprNode>(BoolExprNode{BoolExprNode::Kind::Atom, std::move(a), {}});
}
inline BoolExpr truth(bool v) {
  return std::make_shared<const BoolExprNode>(
      BoolExprNode{v ? BoolExprNode::Kind::True : BoolExprNode::Kind::False, {}, {}});
}
inline BoolExpr negate(BoolExpr e) {
  return std::make_shared<const BoolExprNode>(BoolExprNode{BoolExprNode::Kind::Not, {}, {std::move(e)}});
}
inline BoolExpr conj(std::vector<BoolExpr> cs) {
  return std::make_shared<const BoolExprNode>(BoolExprNode{BoolExprNode::Kind::And, {}, std::move(cs)});
}
inline BoolExpr disj(std::vector<BoolExpr> cs) {
  return std::make_shared<const BoolExprNode>(BoolExprNode{BoolExprNode::Kind::Or, {}, std::move(cs)});
}

/// Direct IEEE evaluation of an un-normalized tree.
inline bool eval(const BoolExpr& e, const Assignment& a) {
  using K = BoolExprNode::Kind;
  switch (e->kind) {
    case K::Atom: return eval_atom(e->atom, a);
    case K::True: return true;
    case K::False: return false;
    case K::Not: return !eval(e->children[0], a);
    case K::And:
      for (const auto& c : e->children)
        if (!eval(c, a)) return false;
      return true;
    case K::Or:
      for (const auto& c : e->children)
        if (eval(c, a)) return true;
      return false;
  }
  return false;
}

}  // namespace boolexpr

class NormalizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NormalizeOptions {
  /// Clause-count ceiling for distribution of AND over OR.
  std::size_t clause_guard = 10'000;
  /// Above the guard, keep the NNF tree instead of failing.
  bool nnf_fallback = true;
};

namespace detail {

/// NNF with constants folded away. Represented with NnfNode, plus a tri-state
/// for the constant cases.
struct NnfResult {
  enum class Const : std::uint8_t { None, True, False } constant = Const::None;
  Nnf node;
};

inline Nnf make_leaf(Atom a) {
  return std::make_shared<const NnfNode>(NnfNode{NnfNode::Kind::Leaf, std::move(a), {}});
}

inline NnfResult combine(NnfNode::Kind kind, std::vector<NnfResult> parts) {
  using C = NnfResult::Const;
  const C absorbing = kind == NnfNode::Kind::And ? C::False : C::True;
  const C neutral = kind == NnfNode::Kind::And ? C::True : C::False;
  std::vector<Nnf> children;
  for (auto& p : parts) {
    if (p.constant == absorbing) return {absorbing, nullptr};
    if (p.constant == neutral) continue;
    if (p.node->kind == kind) {
      children.insert(children.end(), p.node->children.begin(), p.node->children.end());
    } else {
      children.push_back(std::move(p.node));
    }
  }
  if (children.empty()) return {neutral, nullptr};
  if (children.size() == 1) return {C::None, children.front()};
  return {C::None, std::make_shared<const NnfNode>(NnfNode{kind, {}, std::move(children)})};
}

/// Negated atom under finite-only semantics. fp.eq negates to a disjunction.
inline NnfResult negate_atom(const Atom& a) {
  auto leaf = [&](CmpOp op) { return NnfResult{NnfResult::Const::None, make_leaf(Atom{a.lhs, a.rhs, op})}; };
  switch (a.op) {
    case CmpOp::Eq: return combine(NnfNode::Kind::Or, {leaf(CmpOp::Lt), leaf(CmpOp::Gt)});
    case CmpOp::Le: return leaf(CmpOp::Gt);
    case CmpOp::Lt: return leaf(CmpOp::Ge);
    case CmpOp::Ge: return leaf(CmpOp::Lt);
    case CmpOp::Gt: return leaf(CmpOp::Le);
  }
  return leaf(a.op);
}

inline NnfResult to_nnf(const BoolExpr& e, bool negated) {
  using K = BoolExprNode::Kind;
  using C = NnfResult::Const;
  switch (e->kind) {
    case K::Atom:
      return negated ? negate_atom(e->atom) : NnfResult{C::None, make_leaf(e->atom)};
    case K::True: return {negated ? C::False : C::True, nullptr};
    case K::False: return {negated ? C::True : C::False, nullptr};
    case K::Not: return to_nnf(e->children.at(0), !negated);
    case K::And:
    case K::Or: {
      const bool is_and = (e->kind == K::And) != negated;
      std::vector<NnfResult> parts;
      parts.reserve(e->children.size());
      for (const auto& c : e->children) parts.push_back(to_nnf(c, negated));
      return combine(is_and ? NnfNode::Kind::And : NnfNode::Kind::Or, std::move(parts));
    }
  }
  return {C::True, nullptr};
}

/// Clause form by distribution; returns false when the guard is exceeded.
inline bool distribute(const Nnf& n, std::size_t guard, std::vector<Clause>& out) {
  switch (n->kind) {
    case NnfNode::Kind::Leaf:
      out.push_back({n->atom});
      return true;
    case NnfNode::Kind::And:
      for (const auto& c : n->children) {
        if (!distribute(c, guard, out)) return false;
        if (out.size() > guard) return false;
      }
      return true;
    case NnfNode::Kind::Or: {
      std::vector<Clause> acc{Clause{}};
      for (const auto& c : n->children) {
        std::vector<Clause> part;
        if (!distribute(c, guard, part)) return false;
        if (acc.size() * part.size() > guard) return false;
        std::vector<Clause> next;
        next.reserve(acc.size() * part.size());
        for (const auto& a : acc) {
          for (const auto& p : part) {
            Clause merged = a;
            merged.insert(merged.end(), p.begin(), p.end());
            next.push_back(std::move(merged));
          }
        }
        acc = std::move(next);
      }
      out.insert(out.end(), acc.begin(), acc.end());
      return true;
    }
  }
  return false;
}

/// An atom that never holds: +0 < +0.
inline Atom false_atom() {
  const Term zero = term::constant(FpScalar::from_double(0.0));
  return Atom{zero, zero, CmpOp::Lt};
}

}  // namespace detail

/// Pushes negations into atoms, folds constants and reaches clause form.
///
/// Beyond `opts.clause_guard` clauses the NNF tree is kept as-is (or an error
/// is raised when the fallback is disabled).
inline Formula normalize(const BoolExpr& root, std::vector<Variable> variables,
                         const NormalizeOptions& opts = {}) {
  Formula f;
  f.variables = std::move(variables);
  auto nnf = detail::to_nnf(root, false);
  using C = detail::NnfResult::Const;
  if (nnf.constant == C::True) return f;
  if (nnf.constant == C::False) {
    f.clauses.push_back({detail::false_atom()});
    return f;
  }
  std::vector<Clause> clauses;
  if (detail::distribute(nnf.node, opts.clause_guard, clauses) && clauses.size() <= opts.clause_guard) {
    f.clauses = std::move(clauses);
    return f;
  }
  if (!opts.nnf_fallback) {
    throw NormalizationError("clause conversion exceeds " + std::to_string(opts.clause_guard) +
                             " clauses; enable NNF evaluation mode");
  }
  f.nnf = std::move(nnf.node);
  return f;
}

}  // namespace ulpsolve
