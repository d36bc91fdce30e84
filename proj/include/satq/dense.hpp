#pragma once

// Small self-contained dense linear algebra: row-major matrices, partial-pivot
// LU, Sherman-Morrison inverse updates and spectral norms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "satq/error.hpp"

namespace satq {

using DenseVector = std::vector<double>;

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::dimension_mismatch, "entry count does not match rows*cols");
    }
  }
  DenseMatrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw Error(ErrorCode::dimension_mismatch, "ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  DenseVector col(std::size_t c) const {
    DenseVector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }
  void set_col(std::size_t c, std::span<const double> v) {
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
  }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  /// Columns listed in `idx`, in that order.
  DenseMatrix select_cols(std::span<const std::size_t> idx) const {
    DenseMatrix out(rows_, idx.size());
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = 0; k < idx.size(); ++k) out(r, k) = (*this)(r, idx[k]);
    return out;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---- vector helpers ------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> v) noexcept {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x / scale) * (x / scale);
  return scale * std::sqrt(s);
}

inline double norm_inf(std::span<const double> v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline DenseVector subtract(std::span<const double> a, std::span<const double> b) {
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

// ---- matrix helpers ------------------------------------------------------

/// Largest absolute entry, written ‖A‖_max.
inline double max_abs(const DenseMatrix& A) noexcept { return norm_inf(A.data()); }

inline double frobenius(const DenseMatrix& A) noexcept { return norm2(A.data()); }

inline DenseVector matvec(const DenseMatrix& A, std::span<const double> x) {
  if (x.size() != A.cols()) throw Error(ErrorCode::dimension_mismatch, "matvec");
  DenseVector y(A.rows(), 0.0);
  for (std::size_t r = 0; r < A.rows(); ++r) y[r] = dot(A.row(r), x);
  return y;
}

/// A^T x without forming the transpose.
inline DenseVector matvec_transposed(const DenseMatrix& A, std::span<const double> x) {
  if (x.size() != A.rows()) throw Error(ErrorCode::dimension_mismatch, "matvec_transposed");
  DenseVector y(A.cols(), 0.0);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    auto row = A.row(r);
    for (std::size_t c = 0; c < A.cols(); ++c) y[c] += xr * row[c];
  }
  return y;
}

inline DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.cols() != B.rows()) throw Error(ErrorCode::dimension_mismatch, "matmul");
  DenseMatrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto crow = C.row(i);
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double a = A(i, k);
      if (a == 0.0) continue;
      auto brow = B.row(k);
      for (std::size_t j = 0; j < B.cols(); ++j) crow[j] += a * brow[j];
    }
  }
  return C;
}

inline DenseMatrix subtract(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw Error(ErrorCode::dimension_mismatch, "matrix subtract");
  DenseMatrix C = A;
  auto c = C.data();
  auto b = B.data();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return C;
}

/// A * A^T (rows x rows).
inline DenseMatrix gram_rows(const DenseMatrix& A) {
  DenseMatrix G(A.rows(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = i; j < A.rows(); ++j) G(i, j) = G(j, i) = dot(A.row(i), A.row(j));
  return G;
}

// ---- LU with partial pivoting ------------------------------------------

inline constexpr double kSingularityTolerance = 1e-12;

struct LuFactorization {
  DenseMatrix lu;
  std::vector<std::size_t> perm;  // row i of LU is row perm[i] of A
};

inline LuFactorization lu_factor(const DenseMatrix& A) {
  if (A.rows() != A.cols()) throw Error(ErrorCode::dimension_mismatch, "LU needs a square matrix");
  const std::size_t n = A.rows();
  LuFactorization f{A, std::vector<std::size_t>(n)};
  std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
  const double cutoff = kSingularityTolerance * max_abs(A);
  auto& M = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < n; ++r)
      if (std::abs(M(r, k)) > std::abs(M(p, k))) p = r;
    if (std::abs(M(p, k)) < cutoff || M(p, k) == 0.0) {
      throw Error(ErrorCode::singular_matrix,
                  "pivot " + std::to_string(k) + " below 1e-12*max|A|");
    }
    if (p != k) {
      std::swap_ranges(M.row(k).begin(), M.row(k).end(), M.row(p).begin());
      std::swap(f.perm[k], f.perm[p]);
    }
    const double pivot = M(k, k);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double l = M(r, k) / pivot;
      M(r, k) = l;
      if (l == 0.0) continue;
      for (std::size_t c = k + 1; c < n; ++c) M(r, c) -= l * M(k, c);
    }
  }
  return f;
}

inline DenseVector lu_solve(const LuFactorization& f, std::span<const double> y) {
  const std::size_t n = f.lu.rows();
  if (y.size() != n) throw Error(ErrorCode::dimension_mismatch, "lu_solve rhs");
  DenseVector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[f.perm[i]];
    for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= f.lu(i, j) * x[j];
    x[i] = s / f.lu(i, i);
  }
  return x;
}

/// Solves A x = y. Throws SingularMatrix when a pivot falls below 1e-12·‖A‖_max.
inline DenseVector solve_square(const DenseMatrix& A, std::span<const double> y) {
  if (A.rows() != y.size()) throw Error(ErrorCode::dimension_mismatch, "solve_square");
  auto f = lu_factor(A);
  auto x = lu_solve(f, y);
  // One step of iterative refinement keeps the residual at rounding level.
  auto r = subtract(y, matvec(A, x));
  auto dx = lu_solve(f, r);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
  return x;
}

inline DenseMatrix inverse(const DenseMatrix& A) {
  auto f = lu_factor(A);
  const std::size_t n = A.rows();
  DenseMatrix inv(n, n);
  DenseVector e(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    e[c] = 1.0;
    inv.set_col(c, lu_solve(f, e));
    e[c] = 0.0;
  }
  return inv;
}

/// Sherman-Morrison: given Ainv = A^{-1}, returns (A + u e_j^T)^{-1}.
///
/// (A + u e_j^T)^{-1} = Ainv - (Ainv u)(e_j^T Ainv) / (1 + e_j^T Ainv u)
///
/// Throws DegenerateUpdate when |1 + e_j^T Ainv u| < 1e-12, i.e. the updated
/// matrix is (numerically) singular.
/// In-place form; `scratch` is resized to n and holds Ainv u afterwards.
/// Ainv is left untouched when the update is rejected.
inline void rank1_inverse_update_inplace(DenseMatrix& Ainv, std::span<const double> u, std::size_t j,
                                         DenseVector& scratch) {
  const std::size_t n = Ainv.rows();
  if (Ainv.cols() != n || u.size() != n || j >= n)
    throw Error(ErrorCode::dimension_mismatch, "rank1_inverse_update");
  scratch.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = Ainv.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += row[c] * u[c];
    scratch[r] = s;
  }
  const double denom = 1.0 + scratch[j];
  if (std::abs(denom) < kSingularityTolerance)
    throw Error(ErrorCode::degenerate_update, "Sherman-Morrison denominator below 1e-12");
  // Row j changes last: every other row reads its old value.
  const auto rowj = Ainv.row(j);
  for (std::size_t r = 0; r < n; ++r) {
    if (r == j) continue;
    const double f = scratch[r] / denom;
    if (f == 0.0) continue;
    auto orow = Ainv.row(r);
    for (std::size_t c = 0; c < n; ++c) orow[c] -= f * rowj[c];
  }
  const double fj = scratch[j] / denom;
  for (std::size_t c = 0; c < n; ++c) rowj[c] -= fj * rowj[c];
}

inline DenseMatrix rank1_inverse_update(const DenseMatrix& Ainv, std::span<const double> u, std::size_t j) {
  DenseMatrix out = Ainv;
  DenseVector scratch;
  rank1_inverse_update_inplace(out, u, j, scratch);
  return out;
}

// ---- spectral norms ------------------------------------------------------

/// SplitMix64 finalizer; also used by the harness to derive seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Power iteration on A^T A from a seeded start vector. The result is ‖A v‖ for
/// a unit v, so it never exceeds the true spectral norm. Runs at least
/// `iterations` steps, then keeps going (up to 100x) while the estimate still
/// moves by more than 1e-14 relative; small spectral gaps converge slowly.
inline double spectral_norm_estimate(const DenseMatrix& A, std::size_t iterations,
                                     std::uint64_t seed) {
  if (iterations == 0) throw Error(ErrorCode::invalid_parameter, "iterations must be >= 1");
  if (A.empty() || max_abs(A) == 0.0) return 0.0;
  DenseVector v(A.cols());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto bits = mix64(seed * 0x100000001b3ULL + i);
    v[i] = static_cast<double>(bits >> 11) * 0x1.0p-53 - 0.5;
  }
  double nv = norm2(v);
  if (nv == 0.0) {
    v.assign(v.size(), 1.0);
    nv = norm2(v);
  }
  for (double& x : v) x /= nv;
  double prev = 0.0;
  const std::size_t cap = iterations * 100;
  for (std::size_t it = 0; it < cap; ++it) {
    const DenseVector Av = matvec(A, v);
    const double sigma = norm2(Av);
    if (it >= iterations && std::abs(sigma - prev) <= 1e-14 * sigma) break;
    prev = sigma;
    DenseVector w = matvec_transposed(A, Av);
    const double nw = norm2(w);
    if (nw == 0.0) break;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / nw;
  }
  return norm2(matvec(A, v));
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, unsorted.
inline DenseVector symmetric_eigenvalues(DenseMatrix S) {
  const std::size_t n = S.rows();
  if (S.cols() != n) throw Error(ErrorCode::dimension_mismatch, "symmetric_eigenvalues");
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += S(i, j) * S(i, j);
        if (i != j) off += S(i, j) * S(i, j);
      }
    if (off <= 1e-30 * total || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = S(p, q);
        if (apq == 0.0) continue;
        const double theta = (S(q, q) - S(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = S(k, p), skq = S(k, q);
          S(k, p) = c * skp - s * skq;
          S(k, q) = s * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = S(p, k), sqk = S(q, k);
          S(p, k) = c * spk - s * sqk;
          S(q, k) = s * spk + c * sqk;
        }
      }
    }
  }
  DenseVector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = S(i, i);
  return ev;
}

/// Spectral norm through the eigenvalues of the smaller Gram matrix. Accurate
/// to rounding; intended for matrices with at least one small dimension.
inline double spectral_norm(const DenseMatrix& A) {
  if (A.empty()) return 0.0;
  const DenseMatrix G = A.rows() <= A.cols() ? gram_rows(A) : gram_rows(A.transpose());
  const auto ev = symmetric_eigenvalues(G);
  const double top = *std::max_element(ev.begin(), ev.end());
  return std::sqrt(std::max(top, 0.0));
}

/// Numerical rank by Gaussian elimination with complete pivoting.
inline std::size_t numerical_rank(DenseMatrix A, double rel_tol = 1e-10) {
  const double cutoff = rel_tol * max_abs(A);
  std::size_t rank = 0;
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<std::size_t> colmap(n);
  std::iota(colmap.begin(), colmap.end(), std::size_t{0});
  for (std::size_t k = 0; k < std::min(m, n); ++k) {
    std::size_t pr = k, pc = k;
    double best = 0.0;
    for (std::size_t r = k; r < m; ++r)
      for (std::size_t c = k; c < n; ++c)
        if (std::abs(A(r, c)) > best) {
          best = std::abs(A(r, c));
          pr = r;
          pc = c;
        }
    if (best <= cutoff || best == 0.0) break;
    std::swap_ranges(A.row(k).begin(), A.row(k).end(), A.row(pr).begin());
    for (std::size_t r = 0; r < m; ++r) std::swap(A(r, k), A(r, pc));
    for (std::size_t r = k + 1; r < m; ++r) {
      const double l = A(r, k) / A(k, k);
      for (std::size_t c = k; c < n; ++c) A(r, c) -= l * A(k, c);
    }
    ++rank;
  }
  return rank;
}

}  // namespace satq
