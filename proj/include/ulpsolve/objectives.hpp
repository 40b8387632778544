#pragma once

// The three staged objectives.
//
//   S1  squared distance to the linear-equality set plus, for every other
//       clause, the product of its literals' squared real residuals.
//   S2  sum over clauses of the product of squared per-literal ULP distances.
//   S3  S2 evaluated at an anchor stepped by an integer ULP offset vector.
//
// All three use product-within-disjunction / sum-across-conjunction. S2 and
// S3 decide "exactly zero" on the integer distances, never on the double sum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "formula.hpp"
#include "linalg.hpp"

namespace ulpsolve {

/// Component switches for ablation runs. All off is the full pipeline.
struct Ablation {
  bool no_s1 = false;               // start S2 directly from sampled points
  bool no_s3 = false;               // skip lattice refinement
  bool no_projection = false;       // S1 uses residuals of every clause (f_naive)
  bool absolute_residuals = false;  // S1 uses |residual| instead of squares
  bool no_clause_product = false;   // S2/S3 sum literal distances inside a clause

  bool any() const noexcept {
    return no_s1 || no_s3 || no_projection || absolute_residuals || no_clause_product;
  }
  friend bool operator==(const Ablation&, const Ablation&) = default;
};

/// Parses a comma-separated flag list ("no_s3,no_projection").
inline Ablation parse_ablation(std::string_view list) {
  Ablation a;
  while (!list.empty()) {
    const auto comma = list.find(',');
    const std::string_view tok = list.substr(0, comma);
    if (tok == "no_s1") a.no_s1 = true;
    else if (tok == "no_s3") a.no_s3 = true;
    else if (tok == "no_projection") a.no_projection = true;
    else if (tok == "absolute_residuals") a.absolute_residuals = true;
    else if (tok == "no_clause_product") a.no_clause_product = true;
    else if (!tok.empty() && tok != "none") throw std::invalid_argument("unknown ablation flag '" + std::string(tok) + "'");
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  return a;
}

inline std::string ablation_string(const Ablation& a) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(a.no_s1, "no_s1");
  add(a.no_s3, "no_s3");
  add(a.no_projection, "no_projection");
  add(a.absolute_residuals, "absolute_residuals");
  add(a.no_clause_product, "no_clause_product");
  return out.empty() ? "none" : out;
}

struct Evaluation {
  double value = 0.0;
  /// Set only by S2/S3, from integer distances.
  bool exact_zero = false;
};

enum class ObjectiveKind : std::uint8_t { S1, S2, S3 };

/// Penalty for an S1 literal whose operands evaluate to NaN.
inline constexpr double kS1NanPenalty = 1e300;
inline constexpr double kSaturation = std::numeric_limits<double>::max();

namespace detail {

inline double sat_add(double a, double b) noexcept {
  const double r = a + b;
  return r > kSaturation || std::isnan(r) ? kSaturation : r;
}

inline double sat_mul(double a, double b) noexcept {
  const double r = a * b;
  return r > kSaturation || std::isnan(r) ? kSaturation : r;
}

/// Rounds a real coordinate into `fmt`, saturating at the finite extremes.
inline double snap(double v, FpFormat fmt) noexcept {
  if (fmt == FpFormat::Binary32) {
    constexpr double fmax = std::numeric_limits<float>::max();
    if (v > fmax) return fmax;
    if (v < -fmax) return -fmax;
    return static_cast<double>(static_cast<float>(v));
  }
  if (v > kSaturation) return kSaturation;
  if (v < -kSaturation) return -kSaturation;
  return v;
}

/// Round half toward zero, saturating well inside int64.
inline std::int64_t round_offset(double v) noexcept {
  if (std::isnan(v)) return 0;
  constexpr double limit = 4.0e18;
  if (v > limit) return static_cast<std::int64_t>(limit);
  if (v < -limit) return -static_cast<std::int64_t>(limit);
  const double t = std::trunc(v);
  const double frac = v - t;
  std::int64_t r = static_cast<std::int64_t>(t);
  if (frac > 0.5) ++r;
  if (frac < -0.5) --r;
  return r;
}

/// Aggregated (value, exact-zero) pair for one subformula.
struct Agg {
  double value;
  bool zero;
};

}  // namespace detail

/// An evaluatable non-negative scalar function over search vectors.
///
/// Immutable after construction; evaluate() is reentrant.
class Objective {
 public:
  ObjectiveKind kind() const noexcept { return kind_; }
  std::size_t dimension() const noexcept { return formats_.size(); }
  const Ablation& ablation() const noexcept { return ablation_; }
  bool has_projection() const noexcept { return projector_.has_value(); }
  const std::optional<Assignment>& anchor() const noexcept { return anchor_; }
  std::span<const FpFormat> formats() const noexcept { return formats_; }

  /// S1/S2: `point` holds real coordinates; S3: real-valued ULP offsets.
  Evaluation evaluate(std::span<const double> point) const {
    if (point.size() != dimension()) throw std::domain_error("objective: dimension mismatch");
    thread_local std::vector<double> values;
    thread_local std::vector<double> slots;
    values.resize(point.size());
    if (!to_values(point, values)) return {kSaturation, false};
    slots.resize(program_->slot_count());
    program_->run(values, slots);
    if (kind_ == ObjectiveKind::S1) return evaluate_s1(values, slots);
    return evaluate_ulp(slots);
  }

  /// The IEEE assignment a search point stands for.
  Assignment assignment_at(std::span<const double> point) const {
    if (point.size() != dimension()) throw std::domain_error("objective: dimension mismatch");
    std::vector<double> values(point.size());
    if (!to_values(point, values)) throw std::domain_error("objective: NaN search coordinate");
    Assignment a;
    a.values.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) a.values.push_back(FpScalar::round_from(values[i], formats_[i]));
    return a;
  }

  friend Objective build_s1(const Formula&, const Extraction&, std::optional<Projector>, const Ablation&);
  friend Objective build_s2(const Formula&, const Ablation&);
  friend Objective build_s3(const Objective&, Assignment);

 private:
  bool to_values(std::span<const double> point, std::span<double> values) const {
    if (kind_ == ObjectiveKind::S3) {
      for (std::size_t i = 0; i < point.size(); ++i) {
        values[i] = n_ulp(detail::round_offset(point[i]), anchor_->values[i]).to_double();
      }
      return true;
    }
    for (std::size_t i = 0; i < point.size(); ++i) {
      if (std::isnan(point[i])) return false;
      values[i] = detail::snap(point[i], formats_[i]);
    }
    return true;
  }

  double literal_residual(std::uint32_t id, std::span<const double> slots) const {
    const auto& at = program_->atoms()[id];
    if (program_->atom_holds(id, slots)) return 0.0;
    const double l = slots[at.lhs];
    const double r = slots[at.rhs];
    if (std::isnan(l) || std::isnan(r)) return kS1NanPenalty;
    double diff = 0.0;
    switch (at.op) {
      case CmpOp::Eq: diff = std::abs(l - r); break;
      case CmpOp::Le:
      case CmpOp::Lt: diff = std::max(0.0, l - r); break;
      case CmpOp::Ge:
      case CmpOp::Gt: diff = std::max(0.0, r - l); break;
    }
    if (!std::isfinite(diff)) return kS1NanPenalty;
    return ablation_.absolute_residuals ? diff : std::min(diff * diff, kSaturation);
  }

  std::uint64_t literal_ulp(std::uint32_t id, std::span<const double> slots) const {
    const auto& at = program_->atoms()[id];
    return ulp_distance_cmp(FpScalar::round_from(slots[at.lhs], at.format),
                            FpScalar::round_from(slots[at.rhs], at.format), at.op);
  }

  template <class Leaf>
  detail::Agg aggregate(Leaf&& leaf, bool product_in_or) const {
    using detail::Agg;
    auto fold_or = [&](Agg acc, Agg x, bool first) -> Agg {
      if (first) return x;
      if (product_in_or) return {acc.zero || x.zero ? 0.0 : detail::sat_mul(acc.value, x.value), acc.zero || x.zero};
      return {detail::sat_add(acc.value, x.value), acc.zero && x.zero};
    };
    if (program_->is_cnf()) {
      Agg total{0.0, true};
      for (const auto& clause : program_->clauses()) {
        Agg c{0.0, false};
        bool first = true;
        for (auto id : clause) {
          c = fold_or(c, leaf(id), first);
          first = false;
          if (product_in_or && c.zero) break;
        }
        total.value = detail::sat_add(total.value, c.value);
        total.zero = total.zero && c.zero;
      }
      return total;
    }
    const auto nodes = program_->nodes();
    auto rec = [&](auto&& self, std::uint32_t n) -> Agg {
      const auto& node = nodes[n];
      if (node.kind == NnfNode::Kind::Leaf) return leaf(node.atom);
      if (node.kind == NnfNode::Kind::And) {
        Agg acc{0.0, true};
        for (auto c : node.children) {
          const Agg x = self(self, c);
          acc.value = detail::sat_add(acc.value, x.value);
          acc.zero = acc.zero && x.zero;
        }
        return acc;
      }
      Agg acc{0.0, false};
      bool first = true;
      for (auto c : node.children) {
        acc = fold_or(acc, self(self, c), first);
        first = false;
      }
      return acc;
    };
    return rec(rec, static_cast<std::uint32_t>(nodes.size() - 1));
  }

  Evaluation evaluate_s1(std::span<const double> values, std::span<const double> slots) const {
    double proj_term = 0.0;
    if (projector_) {
      const double sq = projector_->squared_distance(values);
      proj_term = ablation_.absolute_residuals ? std::sqrt(sq) : sq;
      if (!std::isfinite(proj_term)) proj_term = kSaturation;
    }
    const auto agg = aggregate([&](std::uint32_t id) {
      const double r = literal_residual(id, slots);
      return detail::Agg{r, r == 0.0};
    }, true);
    return {detail::sat_add(proj_term, agg.value), false};
  }

  Evaluation evaluate_ulp(std::span<const double> slots) const {
    const auto agg = aggregate([&](std::uint32_t id) {
      const std::uint64_t d = literal_ulp(id, slots);
      const double dd = static_cast<double>(d);
      return detail::Agg{d == 0 ? 0.0 : detail::sat_mul(dd, dd), d == 0};
    }, !ablation_.no_clause_product);
    return {agg.zero ? 0.0 : std::max(agg.value, std::numeric_limits<double>::denorm_min()), agg.zero};
  }

  ObjectiveKind kind_ = ObjectiveKind::S2;
  std::shared_ptr<const CompiledFormula> program_;
  std::vector<FpFormat> formats_;
  std::optional<Projector> projector_;
  std::optional<Assignment> anchor_;
  Ablation ablation_;
};

/// Stage-1 objective. Without a usable projector (or under no_projection)
/// every clause of `f` contributes its squared residual product instead.
inline Objective build_s1(const Formula& f, const Extraction& ex, std::optional<Projector> proj,
                          const Ablation& ablation = {}) {
  Objective o;
  o.kind_ = ObjectiveKind::S1;
  o.ablation_ = ablation;
  for (const auto& v : f.variables) o.formats_.push_back(v.format);
  if (proj && !ablation.no_projection) {
    o.projector_ = std::move(proj);
    o.program_ = std::make_shared<const CompiledFormula>(ex.remainder);
  } else {
    o.program_ = std::make_shared<const CompiledFormula>(f);
  }
  return o;
}

inline Objective build_s1(const Formula& f, const Ablation& ablation = {}) {
  auto ex = extract_linear(f);
  auto proj = Projector::build(ex.system);
  return build_s1(f, ex, std::move(proj), ablation);
}

/// Stage-2 objective over the full formula.
inline Objective build_s2(const Formula& f, const Ablation& ablation = {}) {
  Objective o;
  o.kind_ = ObjectiveKind::S2;
  o.ablation_ = ablation;
  for (const auto& v : f.variables) o.formats_.push_back(v.format);
  o.program_ = std::make_shared<const CompiledFormula>(f);
  return o;
}

/// Stage-3 objective: `s2` evaluated at `anchor` stepped by integer offsets.
inline Objective build_s3(const Objective& s2, Assignment anchor) {
  if (s2.kind_ == ObjectiveKind::S1) throw std::invalid_argument("build_s3 needs a ULP objective");
  if (anchor.size() != s2.dimension()) throw std::domain_error("anchor dimension mismatch");
  if (!is_finite_assignment(anchor)) throw std::domain_error("anchor must be finite");
  for (std::size_t i = 0; i < anchor.size(); ++i) {
    if (anchor[i].format() != s2.formats_[i]) throw std::domain_error("anchor format mismatch");
  }
  Objective o = s2;
  o.kind_ = ObjectiveKind::S3;
  o.anchor_ = std::move(anchor);
  return o;
}

inline Objective build_s3(const Formula& f, Assignment anchor, const Ablation& ablation = {}) {
  return build_s3(build_s2(f, ablation), std::move(anchor));
}

}  // namespace ulpsolve
