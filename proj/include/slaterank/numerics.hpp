#pragma once

// Dense linear algebra for the small symmetric systems used by the bandit
// and the DPP: Cholesky, SPD solves, symmetric eigendecomposition (cyclic
// Jacobi) and a truncated SVD built on top of it.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slaterank/errors.hpp"

namespace slaterank {

using Vec = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionMismatch("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Vec column(std::size_t c) const {
    Vec out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Vec matvec(const Matrix& m, std::span<const double> x) {
  if (m.cols() != x.size()) throw DimensionMismatch("matvec: dimension mismatch");
  Vec out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), x);
  return out;
}

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("multiply: inner dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

inline double frobenius_norm(const Matrix& m) { return norm(m.data()); }

inline Matrix subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("subtract: shape mismatch");
  Matrix out = a;
  auto od = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  return out;
}

/// m += scale * x xᵀ
inline void add_outer(Matrix& m, std::span<const double> x, double scale = 1.0) {
  if (!m.square() || m.rows() != x.size())
    throw DimensionMismatch("add_outer: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double sxi = scale * x[i];
    if (sxi == 0.0) continue;
    auto r = m.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) r[j] += sxi * x[j];
  }
}

/// Symmetric within `rel_tol` of the largest absolute entry.
inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-12) {
  if (!m.square()) return false;
  double scale = 0.0;
  for (double v : m.data()) scale = std::max(scale, std::abs(v));
  const double tol = rel_tol * std::max(scale, 1.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Pivots at or below this fraction of the largest diagonal entry are rejected.
inline constexpr double kPivotTolerance = 1e-12;

/// Lower-triangular L with L·Lᵀ equal to the factored matrix.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(Matrix lower) : lower_(std::move(lower)) {}

  std::size_t dim() const noexcept { return lower_.rows(); }
  const Matrix& lower() const noexcept { return lower_; }

  /// Solves L y = rhs.
  Vec forward(std::span<const double> rhs) const {
    check(rhs.size());
    const std::size_t n = dim();
    Vec y(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < n; ++i) {
      auto li = lower_.row(i);
      double s = y[i];
      for (std::size_t k = 0; k < i; ++k) s -= li[k] * y[k];
      y[i] = s / li[i];
    }
    return y;
  }

  /// Solves Lᵀ y = rhs.
  Vec backward(std::span<const double> rhs) const {
    check(rhs.size());
    const std::size_t n = dim();
    Vec y(rhs.begin(), rhs.end());
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= lower_(k, ii) * y[k];
      y[ii] = s / lower_(ii, ii);
    }
    return y;
  }

  Vec solve(std::span<const double> rhs) const { return backward(forward(rhs)); }

  /// xᵀ M⁻¹ x computed as ‖L⁻¹x‖², so it is never negative.
  double inverse_quad_form(std::span<const double> x) const {
    const Vec y = forward(x);
    return dot(y, y);
  }

  double log_det() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) s += std::log(lower_(i, i));
    return 2.0 * s;
  }

  Matrix reconstruct() const { return multiply(lower_, transpose(lower_)); }

 private:
  void check(std::size_t n) const {
    if (n != dim()) throw DimensionMismatch("cholesky: right-hand side has wrong length");
  }

  Matrix lower_;
};

/// Factors a symmetric positive definite matrix. Only the lower triangle is read.
inline CholeskyFactor cholesky(const Matrix& m) {
  if (!m.square()) throw DimensionMismatch("cholesky: matrix is not square");
  const std::size_t n = m.rows();
  if (n == 0) throw DimensionMismatch("cholesky: empty matrix");
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, m(i, i));
  const double tol = kPivotTolerance * max_diag;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    auto lj = l.row(j);
    double pivot = m(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= lj[k] * lj[k];
    if (!(pivot > tol)) {
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) + " is " +
                                std::to_string(pivot));
    }
    const double djj = std::sqrt(pivot);
    lj[j] = djj;
    for (std::size_t i = j + 1; i < n; ++i) {
      auto li = l.row(i);
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      li[j] = s / djj;
    }
  }
  return CholeskyFactor(std::move(l));
}

inline Vec solve_spd(const Matrix& m, std::span<const double> rhs) {
  if (m.rows() != rhs.size()) throw DimensionMismatch("solve_spd: dimension mismatch");
  return cholesky(m).solve(rhs);
}

/// xᵀ m⁻¹ x for SPD m.
inline double quad_form(const Matrix& m, std::span<const double> x) {
  if (m.rows() != x.size()) throw DimensionMismatch("quad_form: dimension mismatch");
  return cholesky(m).inverse_quad_form(x);
}

/// Eigenpairs of a symmetric matrix, eigenvalues in non-increasing order.
/// Column j of `vectors` is the eigenvector for `values[j]`.
struct SymmetricEigen {
  Vec values;
  Matrix vectors;
};

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
inline SymmetricEigen symmetric_eigen(const Matrix& m, int max_sweeps = 100) {
  if (!m.square()) throw DimensionMismatch("symmetric_eigen: matrix is not square");
  const std::size_t n = m.rows();
  Matrix a = m;
  Matrix v = Matrix::identity(n);
  const double scale = frobenius_norm(m);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale || off == 0.0) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
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

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{Vec(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = v(k, order[j]);
  }
  return out;
}

/// Lower bound on the smallest eigenvalue of a symmetric matrix.
inline double min_eigen_bound(const Matrix& m) {
  if (!m.square()) throw DimensionMismatch("min_eigen_bound: matrix is not square");
  if (m.rows() == 0) return 0.0;
  const SymmetricEigen eig = symmetric_eigen(m);
  // Jacobi is backward stable: eigenvalue error is O(eps·‖m‖).
  return eig.values.back() - 1e-13 * frobenius_norm(m);
}

/// Top-k singular triplets: m ≈ left · diag(values) · rightᵀ.
struct TruncatedSvd {
  Matrix left;   // rows × k
  Vec values;    // k, non-increasing
  Matrix right;  // cols × k
};

namespace detail {

// Orthonormalizes `col` of `basis` against the columns before it; if the
// column vanishes, replaces it with the first unit vector that survives.
inline void complete_orthonormal_column(Matrix& basis, std::size_t col) {
  const std::size_t n = basis.rows();
  auto project_out = [&](Vec& u) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < col; ++j) {
        double p = 0.0;
        for (std::size_t r = 0; r < n; ++r) p += basis(r, j) * u[r];
        for (std::size_t r = 0; r < n; ++r) u[r] -= p * basis(r, j);
      }
    }
  };
  Vec u = basis.column(col);
  project_out(u);
  double len = norm(u);
  for (std::size_t e = 0; len < 1e-8 && e < n; ++e) {
    u.assign(n, 0.0);
    u[e] = 1.0;
    project_out(u);
    len = norm(u);
  }
  for (std::size_t r = 0; r < n; ++r) basis(r, col) = u[r] / len;
}

}  // namespace detail

/// Truncated SVD through the eigendecomposition of the smaller Gram matrix.
inline TruncatedSvd truncated_svd(const Matrix& m, std::size_t k) {
  const std::size_t small = std::min(m.rows(), m.cols());
  if (k > small) {
    throw RankTooLarge("truncated_svd: rank " + std::to_string(k) + " exceeds " +
                       std::to_string(small));
  }
  const bool tall = m.rows() >= m.cols();
  const Matrix mt = transpose(m);
  // Gram on the short side; its eigenvectors are the right (tall) or left
  // (wide) singular vectors.
  const Matrix gram = tall ? multiply(mt, m) : multiply(m, mt);
  const SymmetricEigen eig = symmetric_eigen(gram);

  const std::size_t long_dim = tall ? m.rows() : m.cols();
  Matrix short_vecs(small, k);
  Matrix long_vecs(long_dim, k);
  Vec values(k);
  const double sigma_max = eig.values.empty() ? 0.0 : std::sqrt(std::max(eig.values[0], 0.0));
  for (std::size_t j = 0; j < k; ++j) {
    const double sigma = std::sqrt(std::max(eig.values[j], 0.0));
    values[j] = sigma;
    const Vec sv = eig.vectors.column(j);
    for (std::size_t r = 0; r < small; ++r) short_vecs(r, j) = sv[r];
    if (sigma > 1e-12 * std::max(sigma_max, 1e-300)) {
      const Vec lv = matvec(tall ? m : mt, sv);
      for (std::size_t r = 0; r < long_dim; ++r) long_vecs(r, j) = lv[r] / sigma;
    } else {
      values[j] = 0.0;
    }
    detail::complete_orthonormal_column(long_vecs, j);
  }
  if (tall) return {std::move(long_vecs), std::move(values), std::move(short_vecs)};
  return {std::move(short_vecs), std::move(values), std::move(long_vecs)};
}

/// left · diag(values) · rightᵀ
inline Matrix reconstruct(const TruncatedSvd& svd) {
  Matrix scaled = svd.left;
  for (std::size_t r = 0; r < scaled.rows(); ++r)
    for (std::size_t c = 0; c < scaled.cols(); ++c) scaled(r, c) *= svd.values[c];
  return multiply(scaled, transpose(svd.right));
}

}  // namespace slaterank
