#pragma once

// Linear equality extraction and orthogonal projection onto {x : A x = b}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "formula.hpp"

namespace ulpsolve {

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw std::domain_error("matrix dimensions do not agree");
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

  friend Matrix operator-(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.data_.size(); ++i) out.data_[i] -= b.data_[i];
    return out;
  }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != cols_) throw std::domain_error("vector length does not match matrix");
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c) * x[c];
      y[r] = s;
    }
    return y;
  }

  /// Largest absolute entry.
  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Linear equalities A x = b over all formula variables (columns follow the
/// formula's variable order). `var_map` lists the columns with a nonzero
/// coefficient.
struct LinearSystem {
  Matrix A;
  std::vector<double> b;
  std::vector<std::size_t> var_map;

  bool empty() const noexcept { return b.empty(); }
};

/// x -> sum(coeffs[i] * x_i) + constant, over the reals.
struct AffineForm {
  std::vector<double> coeffs;
  double constant = 0.0;

  bool is_constant() const noexcept {
    return std::all_of(coeffs.begin(), coeffs.end(), [](double c) { return c == 0.0; });
  }
};

/// Reads a term as an affine function of the variables, folding constant
/// arithmetic in real (double) arithmetic. nullopt when the term is not affine.
inline std::optional<AffineForm> affine_form(const Term& t, std::size_t dimension) {
  switch (t->kind) {
    case TermKind::Var: {
      AffineForm f{std::vector<double>(dimension, 0.0), 0.0};
      f.coeffs.at(t->var) = 1.0;
      return f;
    }
    case TermKind::Const: {
      if (!t->value.is_finite()) return std::nullopt;
      return AffineForm{std::vector<double>(dimension, 0.0), t->value.to_double()};
    }
    case TermKind::Neg: {
      auto f = affine_form(t->lhs, dimension);
      if (!f) return std::nullopt;
      for (double& c : f->coeffs) c = -c;
      f->constant = -f->constant;
      return f;
    }
    case TermKind::Add:
    case TermKind::Sub: {
      auto l = affine_form(t->lhs, dimension);
      auto r = affine_form(t->rhs, dimension);
      if (!l || !r) return std::nullopt;
      const double sign = t->kind == TermKind::Add ? 1.0 : -1.0;
      for (std::size_t i = 0; i < dimension; ++i) l->coeffs[i] += sign * r->coeffs[i];
      l->constant += sign * r->constant;
      return l;
    }
    case TermKind::Mul: {
      auto l = affine_form(t->lhs, dimension);
      auto r = affine_form(t->rhs, dimension);
      if (!l || !r) return std::nullopt;
      if (!r->is_constant()) {
        if (!l->is_constant()) return std::nullopt;
        std::swap(l, r);
      }
      const double k = r->constant;
      for (double& c : l->coeffs) c *= k;
      l->constant *= k;
      return l;
    }
    case TermKind::Div: {
      auto l = affine_form(t->lhs, dimension);
      auto r = affine_form(t->rhs, dimension);
      if (!l || !r || !r->is_constant() || r->constant == 0.0) return std::nullopt;
      const double k = r->constant;
      for (double& c : l->coeffs) c /= k;
      l->constant /= k;
      return l;
    }
  }
  return std::nullopt;
}

struct Extraction {
  LinearSystem system;
  /// Clauses not absorbed into the system, in original order.
  Formula remainder;
  /// Index (into the original clause list) of each system row's clause.
  std::vector<std::size_t> row_clauses;
};

/// Splits unit-clause affine equalities into A x = b; everything else is
/// returned as the remainder.
inline Extraction extract_linear(const Formula& f) {
  Extraction out;
  out.remainder.variables = f.variables;
  const std::size_t d = f.dimension();
  if (!f.is_cnf()) {
    out.remainder = f;
    out.system.A = Matrix(0, d);
    return out;
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t ci = 0; ci < f.clauses.size(); ++ci) {
    const Clause& clause = f.clauses[ci];
    if (clause.size() == 1 && clause.front().op == CmpOp::Eq) {
      auto l = affine_form(clause.front().lhs, d);
      auto r = affine_form(clause.front().rhs, d);
      if (l && r) {
        std::vector<double> row(d);
        bool finite = true;
        for (std::size_t i = 0; i < d; ++i) {
          row[i] = l->coeffs[i] - r->coeffs[i];
          finite = finite && std::isfinite(row[i]);
        }
        const double rhs = r->constant - l->constant;
        const bool has_var = std::any_of(row.begin(), row.end(), [](double c) { return c != 0.0; });
        if (finite && std::isfinite(rhs) && has_var) {
          rows.push_back(std::move(row));
          out.system.b.push_back(rhs);
          out.row_clauses.push_back(ci);
          continue;
        }
      }
    }
    out.remainder.clauses.push_back(clause);
  }
  out.system.A = Matrix(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < d; ++c) out.system.A(r, c) = rows[r][c];
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r][c] != 0.0) {
        out.system.var_map.push_back(c);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition and pseudoinverse

struct EigenDecomposition {
  std::vector<double> values;
  Matrix vectors;  // columns are eigenvectors
};

/// Cyclic Jacobi rotations on a symmetric matrix.
inline EigenDecomposition jacobi_eigen(Matrix a, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= 1e-30 * total || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  EigenDecomposition out{std::vector<double>(n), std::move(v)};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
  return out;
}

inline constexpr double kPinvRelativeCutoff = 1e-12;

/// Moore-Penrose pseudoinverse of a symmetric positive semidefinite matrix.
/// Eigenvalues below `rel_tol * lambda_max` are treated as zero.
inline Matrix pseudoinverse(const Matrix& g, double rel_tol = kPinvRelativeCutoff) {
  const std::size_t n = g.rows();
  if (g.cols() != n) throw std::domain_error("pseudoinverse: matrix is not square");
  const double scale = std::max(g.max_abs(), 1e-300);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(g(i, j) - g(j, i)) > 1e-9 * scale) throw std::domain_error("pseudoinverse: matrix is not symmetric");
  Matrix out(n, n);
  if (n == 0 || g.max_abs() == 0.0) return out;
  const auto eig = jacobi_eigen(g);
  double lambda_max = 0.0;
  for (double l : eig.values) lambda_max = std::max(lambda_max, std::abs(l));
  const double cutoff = rel_tol * lambda_max;
  for (std::size_t k = 0; k < n; ++k) {
    const double l = eig.values[k];
    if (std::abs(l) <= cutoff) continue;
    const double inv = 1.0 / l;
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = eig.vectors(i, k) * inv;
      if (vik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * eig.vectors(j, k);
    }
  }
  return out;
}

/// Cached projection onto {x : A x = b}:  x - P (A x - b)  with P = A^T (A A^T)^+.
class Projector {
 public:
  /// nullopt when the system is empty or the factorization is unusable.
  static std::optional<Projector> build(const LinearSystem& sys, double rel_tol = kPinvRelativeCutoff) {
    if (sys.empty()) return std::nullopt;
    const Matrix at = sys.A.transpose();
    const Matrix gram = sys.A * at;
    Matrix gp;
    try {
      gp = pseudoinverse(gram, rel_tol);
    } catch (const std::domain_error&) {
      return std::nullopt;
    }
    Projector p;
    p.A_ = sys.A;
    p.b_ = sys.b;
    p.P_ = at * gp;
    p.tol_ = rel_tol;
    const auto eig = jacobi_eigen(gram);
    double lmax = 0.0;
    for (double l : eig.values) lmax = std::max(lmax, std::abs(l));
    p.rank_ = 0;
    for (double l : eig.values)
      if (std::abs(l) > rel_tol * lmax) ++p.rank_;
    if (p.rank_ == 0 || p.P_.max_abs() == 0.0 || !std::isfinite(p.P_.max_abs())) return std::nullopt;
    return p;
  }

  std::size_t dimension() const noexcept { return A_.cols(); }
  std::size_t rank() const noexcept { return rank_; }
  double tolerance() const noexcept { return tol_; }
  const Matrix& A() const noexcept { return A_; }
  const std::vector<double>& b() const noexcept { return b_; }

  /// Squared distance from x to the affine set.
  double squared_distance(std::span<const double> x) const {
    const auto delta = correction(x);
    double s = 0.0;
    for (double v : delta) s += v * v;
    return s;
  }

  /// The vector removed from x by the projection, x - foot(x).
  std::vector<double> correction(std::span<const double> x) const {
    auto y = foot(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - y[i];
    return y;
  }

  /// Closest point of the set to x.
  ///
  /// Starts from x - P (A x - b) and keeps subtracting P (A y - b) while the
  /// step shrinks. Each round cuts the cancellation error left by the
  /// previous one, so far-away or tiny-scale inputs still land within a few
  /// ULPs of the set, and points that are representable come out exact.
  std::vector<double> foot(std::span<const double> x) const {
    if (x.size() != A_.cols()) throw std::domain_error("projection: dimension mismatch");
    std::vector<double> y(x.begin(), x.end());
    double last = std::numeric_limits<double>::infinity();
    for (int round = 0; round < kMaxRefinements; ++round) {
      auto r = A_.apply(y);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b_[i];
      const auto step = P_.apply(r);
      double size = 0.0;
      for (double v : step) size = std::max(size, std::abs(v));
      if (size == 0.0 || !(size < last)) break;
      bool moved = false;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double next = y[i] - step[i];
        moved = moved || next != y[i];
        y[i] = next;
      }
      if (!moved) break;
      last = size;
    }
    return y;
  }

  static constexpr int kMaxRefinements = 64;

 private:
  Matrix A_;
  std::vector<double> b_;
  Matrix P_;
  std::size_t rank_ = 0;
  double tol_ = kPinvRelativeCutoff;
};

struct Projection {
  std::vector<double> point;
  double sq_dist;
};

/// Closest point of {x : A x = b} to x, and the squared gap.
inline Projection project(std::span<const double> x, const Projector& proj) {
  Projection out{proj.foot(x), 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double gap = x[i] - out.point[i];
    out.sq_dist += gap * gap;
  }
  return out;
}

}  // namespace ulpsolve
