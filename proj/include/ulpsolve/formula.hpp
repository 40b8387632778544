#pragma once

// Typed QF_FP formula representation and bit-exact IEEE-754 evaluation.

#include <cfloat>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fp_lattice.hpp"

#if !defined(FLT_EVAL_METHOD) || FLT_EVAL_METHOD != 0
#error "bit-exact evaluation needs FLT_EVAL_METHOD == 0 (SSE2 or equivalent)"
#endif

namespace ulpsolve {

static_assert(std::numeric_limits<float>::is_iec559 && std::numeric_limits<double>::is_iec559);

enum class TermKind : std::uint8_t { Var, Const, Neg, Add, Sub, Mul, Div };

struct TermNode;
using Term = std::shared_ptr<const TermNode>;

/// Immutable expression node. Arithmetic nodes round with RNE in `format`.
struct TermNode {
  TermKind kind;
  FpFormat format;
  std::size_t var = 0;  // Var only
  FpScalar value;       // Const only
  Term lhs;             // Neg uses lhs only
  Term rhs;
};

class FormatMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace term {

inline Term var(std::size_t index, FpFormat fmt) {
  return std::make_shared<const TermNode>(TermNode{TermKind::Var, fmt, index, {}, nullptr, nullptr});
}

inline Term constant(FpScalar v) {
  return std::make_shared<const TermNode>(TermNode{TermKind::Const, v.format(), 0, v, nullptr, nullptr});
}

inline Term constant(double v, FpFormat fmt) { return constant(FpScalar::round_from(v, fmt)); }

inline Term neg(Term t) {
  const FpFormat fmt = t->format;
  return std::make_shared<const TermNode>(TermNode{TermKind::Neg, fmt, 0, {}, std::move(t), nullptr});
}

inline Term binary(TermKind kind, Term l, Term r) {
  if (l->format != r->format) throw FormatMismatch("operand formats differ");
  const FpFormat fmt = l->format;
  return std::make_shared<const TermNode>(TermNode{kind, fmt, 0, {}, std::move(l), std::move(r)});
}

inline Term add(Term l, Term r) { return binary(TermKind::Add, std::move(l), std::move(r)); }
inline Term sub(Term l, Term r) { return binary(TermKind::Sub, std::move(l), std::move(r)); }
inline Term mul(Term l, Term r) { return binary(TermKind::Mul, std::move(l), std::move(r)); }
inline Term div(Term l, Term r) { return binary(TermKind::Div, std::move(l), std::move(r)); }

}  // namespace term

struct Atom {
  Term lhs;
  Term rhs;
  CmpOp op;

  static Atom make(Term l, Term r, CmpOp op) {
    if (l->format != r->format) throw FormatMismatch("atom operand formats differ");
    return Atom{std::move(l), std::move(r), op};
  }
};

/// Disjunction of atoms. Never empty after normalization.
using Clause = std::vector<Atom>;

/// Negation-normal-form boolean tree; only used when clause conversion would
/// exceed the size guard.
struct NnfNode;
using Nnf = std::shared_ptr<const NnfNode>;

struct NnfNode {
  enum class Kind : std::uint8_t { Leaf, And, Or };
  Kind kind;
  Atom atom;  // Leaf only
  std::vector<Nnf> children;
};

struct Variable {
  std::string name;
  FpFormat format;
};

/// A normalized constraint: conjunction of clauses over declared variables.
///
/// Variable order is fixed at construction and defines the layout of every
/// assignment and search vector. When `nnf` is set the formula is the NNF
/// tree and `clauses` is empty.
struct Formula {
  std::vector<Variable> variables;
  std::vector<Clause> clauses;
  Nnf nnf;

  bool is_cnf() const noexcept { return nnf == nullptr; }
  std::size_t dimension() const noexcept { return variables.size(); }
};

/// Values aligned with Formula::variables; all finite.
struct Assignment {
  std::vector<FpScalar> values;

  std::size_t size() const noexcept { return values.size(); }
  const FpScalar& operator[](std::size_t i) const { return values[i]; }
};

inline bool is_finite_assignment(const Assignment& a) noexcept {
  for (const auto& v : a.values)
    if (!v.is_finite()) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

template <class T>
T apply_arith(TermKind kind, T a, T b) noexcept {
  switch (kind) {
    case TermKind::Add: return a + b;
    case TermKind::Sub: return a - b;
    case TermKind::Mul: return a * b;
    case TermKind::Div: return a / b;
    default: return a;
  }
}

/// Operates on values stored as double; binary32 values are exact in double,
/// and each binary32 operation is carried out in float.
inline double apply_in_format(TermKind kind, FpFormat fmt, double a, double b) noexcept {
  if (kind == TermKind::Neg) return -a;
  if (fmt == FpFormat::Binary32) {
    return static_cast<double>(apply_arith(kind, static_cast<float>(a), static_cast<float>(b)));
  }
  return apply_arith(kind, a, b);
}

}  // namespace detail

/// Exact IEEE-754 RNE value of `t` under assignment `a`.
inline FpScalar eval_term(const Term& t, const Assignment& a) {
  switch (t->kind) {
    case TermKind::Var:
      if (t->var >= a.size()) throw std::out_of_range("assignment does not cover variable");
      return a[t->var];
    case TermKind::Const:
      return t->value;
    case TermKind::Neg: {
      const FpScalar v = eval_term(t->lhs, a);
      return FpScalar::from_bits(v.bits() ^ sign_mask(v.format()), v.format());
    }
    default: {
      const double l = eval_term(t->lhs, a).to_double();
      const double r = eval_term(t->rhs, a).to_double();
      return FpScalar::round_from(detail::apply_in_format(t->kind, t->format, l, r), t->format);
    }
  }
}

inline bool eval_atom(const Atom& atom, const Assignment& a) {
  return ieee_compare(eval_term(atom.lhs, a), eval_term(atom.rhs, a), atom.op);
}

inline bool eval_nnf(const Nnf& n, const Assignment& a) {
  switch (n->kind) {
    case NnfNode::Kind::Leaf: return eval_atom(n->atom, a);
    case NnfNode::Kind::And:
      for (const auto& c : n->children)
        if (!eval_nnf(c, a)) return false;
      return true;
    case NnfNode::Kind::Or:
      for (const auto& c : n->children)
        if (eval_nnf(c, a)) return true;
      return false;
  }
  return false;
}

/// True iff every clause has an atom that holds under IEEE semantics at `a`.
inline bool is_model(const Formula& f, const Assignment& a) {
  if (a.size() != f.dimension()) throw std::domain_error("assignment size does not match formula");
  if (!f.is_cnf()) return eval_nnf(f.nnf, a);
  for (const auto& clause : f.clauses) {
    bool sat = false;
    for (const auto& atom : clause) {
      if (eval_atom(atom, a)) {
        sat = true;
        break;
      }
    }
    if (!sat) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Compiled evaluation

/// Flat program over every distinct term of a formula.
///
/// Objectives evaluate a formula thousands of times per second; walking
/// shared_ptr trees each time dominates the cost, so the term DAG is
/// lowered once into a tape of slots. Slot values are stored as double.
class CompiledFormula {
 public:
  struct Instr {
    TermKind kind;
    FpFormat format;
    std::uint32_t a;  // var index, or operand slot
    std::uint32_t b;
    double constant;
  };

  struct CompiledAtom {
    std::uint32_t lhs;
    std::uint32_t rhs;
    CmpOp op;
    FpFormat format;
  };

  /// Boolean structure in terms of atom ids. CNF formulas use `clauses`;
  /// NNF formulas use `nodes`, whose last entry is the root.
  struct BoolNode {
    NnfNode::Kind kind;
    std::uint32_t atom;
    std::vector<std::uint32_t> children;
  };

  explicit CompiledFormula(const Formula& f) : dimension_(f.dimension()) {
    formats_.reserve(f.variables.size());
    for (const auto& v : f.variables) formats_.push_back(v.format);
    if (f.is_cnf()) {
      clauses_.reserve(f.clauses.size());
      for (const auto& clause : f.clauses) {
        std::vector<std::uint32_t> ids;
        ids.reserve(clause.size());
        for (const auto& atom : clause) ids.push_back(add_atom(atom));
        clauses_.push_back(std::move(ids));
      }
    } else {
      lower_nnf(f.nnf);
    }
  }

  std::size_t dimension() const noexcept { return dimension_; }
  std::span<const FpFormat> formats() const noexcept { return formats_; }
  bool is_cnf() const noexcept { return nodes_.empty(); }
  std::span<const CompiledAtom> atoms() const noexcept { return atoms_; }
  std::span<const std::vector<std::uint32_t>> clauses() const noexcept { return clauses_; }
  std::span<const BoolNode> nodes() const noexcept { return nodes_; }
  std::size_t slot_count() const noexcept { return tape_.size(); }

  /// Runs the tape. `values` holds one double per variable, each already
  /// representable in that variable's format.
  void run(std::span<const double> values, std::span<double> slots) const noexcept {
    for (std::size_t i = 0; i < tape_.size(); ++i) {
      const Instr& in = tape_[i];
      switch (in.kind) {
        case TermKind::Var: slots[i] = values[in.a]; break;
        case TermKind::Const: slots[i] = in.constant; break;
        case TermKind::Neg: slots[i] = -slots[in.a]; break;
        default: slots[i] = detail::apply_in_format(in.kind, in.format, slots[in.a], slots[in.b]); break;
      }
    }
  }

  static FpScalar slot_value(double v, FpFormat fmt) noexcept { return FpScalar::round_from(v, fmt); }

  bool atom_holds(std::uint32_t id, std::span<const double> slots) const noexcept {
    const auto& at = atoms_[id];
    const double l = slots[at.lhs];
    const double r = slots[at.rhs];
    switch (at.op) {
      case CmpOp::Eq: return l == r;
      case CmpOp::Le: return l <= r;
      case CmpOp::Lt: return l < r;
      case CmpOp::Ge: return l >= r;
      case CmpOp::Gt: return l > r;
    }
    return false;
  }

  bool holds(std::span<const double> slots) const noexcept {
    if (!is_cnf()) return node_holds(static_cast<std::uint32_t>(nodes_.size() - 1), slots);
    for (const auto& clause : clauses_) {
      bool sat = false;
      for (auto id : clause) {
        if (atom_holds(id, slots)) {
          sat = true;
          break;
        }
      }
      if (!sat) return false;
    }
    return true;
  }

 private:
  bool node_holds(std::uint32_t n, std::span<const double> slots) const noexcept {
    const BoolNode& node = nodes_[n];
    switch (node.kind) {
      case NnfNode::Kind::Leaf: return atom_holds(node.atom, slots);
      case NnfNode::Kind::And:
        for (auto c : node.children)
          if (!node_holds(c, slots)) return false;
        return true;
      case NnfNode::Kind::Or:
        for (auto c : node.children)
          if (node_holds(c, slots)) return true;
        return false;
    }
    return false;
  }

  std::uint32_t lower_term(const Term& t) {
    if (auto it = memo_.find(t.get()); it != memo_.end()) return it->second;
    Instr in{t->kind, t->format, 0, 0, 0.0};
    switch (t->kind) {
      case TermKind::Var:
        if (t->var >= dimension_) throw std::out_of_range("term references an undeclared variable");
        in.a = static_cast<std::uint32_t>(t->var);
        break;
      case TermKind::Const: in.constant = t->value.to_double(); break;
      case TermKind::Neg: in.a = lower_term(t->lhs); break;
      default:
        in.a = lower_term(t->lhs);
        in.b = lower_term(t->rhs);
        break;
    }
    tape_.push_back(in);
    const auto slot = static_cast<std::uint32_t>(tape_.size() - 1);
    memo_.emplace(t.get(), slot);
    return slot;
  }

  std::uint32_t add_atom(const Atom& atom) {
    const auto l = lower_term(atom.lhs);
    const auto r = lower_term(atom.rhs);
    atoms_.push_back({l, r, atom.op, atom.lhs->format});
    return static_cast<std::uint32_t>(atoms_.size() - 1);
  }

  std::uint32_t lower_nnf(const Nnf& n) {
    BoolNode node{n->kind, 0, {}};
    if (n->kind == NnfNode::Kind::Leaf) {
      node.atom = add_atom(n->atom);
    } else {
      for (const auto& c : n->children) node.children.push_back(lower_nnf(c));
    }
    nodes_.push_back(std::move(node));
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  std::size_t dimension_;
  std::vector<FpFormat> formats_;
  std::vector<Instr> tape_;
  std::vector<CompiledAtom> atoms_;
  std::vector<std::vector<std::uint32_t>> clauses_;
  std::vector<BoolNode> nodes_;
  std::unordered_map<const TermNode*, std::uint32_t> memo_;
};

/// Every constant appearing in the formula, as doubles (non-finite skipped).
inline std::vector<double> collect_constants(const Formula& f) {
  std::vector<double> out;
  std::vector<const TermNode*> stack;
  auto push_atom = [&](const Atom& a) {
    stack.push_back(a.lhs.get());
    stack.push_back(a.rhs.get());
  };
  if (f.is_cnf()) {
    for (const auto& c : f.clauses)
      for (const auto& a : c) push_atom(a);
  } else {
    std::vector<const NnfNode*> nodes{f.nnf.get()};
    while (!nodes.empty()) {
      const NnfNode* n = nodes.back();
      nodes.pop_back();
      if (n->kind == NnfNode::Kind::Leaf) push_atom(n->atom);
      for (const auto& c : n->children) nodes.push_back(c.get());
    }
  }
  while (!stack.empty()) {
    const TermNode* t = stack.back();
    stack.pop_back();
    if (t->kind == TermKind::Const && t->value.is_finite()) out.push_back(t->value.to_double());
    if (t->lhs) stack.push_back(t->lhs.get());
    if (t->rhs) stack.push_back(t->rhs.get());
  }
  return out;
}

}  // namespace ulpsolve
