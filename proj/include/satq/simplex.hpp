#pragma once

// Dense two-phase revised simplex for  min cost^T x  s.t.  A x = b, x >= 0.
//
// The basis inverse is kept explicitly and updated by elementary row
// operations, with a fresh LU inverse every kRefactorEvery pivots. Pricing is
// Dantzig's rule; after a run of degenerate pivots it switches to Bland's
// smallest-index rule until the objective moves again, which rules out cycling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "satq/dense.hpp"
#include "satq/error.hpp"

namespace satq {

struct StandardFormLP {
  DenseMatrix A;
  DenseVector b;
  DenseVector cost;
};

struct LpSolution {
  DenseVector x;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::vector<std::size_t> basis;
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-10;
  double pivot_tol = 1e-11;
  std::size_t max_iterations = 0;  // 0: 50 (rows + cols) + 1000
  std::size_t degenerate_streak_for_bland = 50;
};

namespace detail {

class RevisedSimplex {
 public:
  RevisedSimplex(const DenseMatrix& A, const DenseVector& b, const SimplexOptions& opt)
      : A_(A), b_(b), opt_(opt), m_(A.rows()), n_(A.cols()) {}

  /// Columns >= n_ are artificial (unit) columns.
  double column_entry(std::size_t row, std::size_t j) const { return j < n_ ? A_(row, j) : (row == j - n_ ? 1.0 : 0.0); }

  void set_basis(std::vector<std::size_t> basis) {
    basis_ = std::move(basis);
    refactor();
  }

  void refactor() {
    DenseMatrix B(m_, m_);
    for (std::size_t r = 0; r < m_; ++r)
      for (std::size_t k = 0; k < m_; ++k) B(r, k) = column_entry(r, basis_[k]);
    Binv_ = inverse(B);
    xB_ = matvec(Binv_, b_);
    since_refactor_ = 0;
  }

  /// Runs the simplex method with the given costs over the columns allowed by
  /// `eligible`. Returns the number of pivots.
  std::size_t optimize(const DenseVector& cost, const std::vector<char>& eligible, std::size_t budget) {
    const std::size_t total = cost.size();
    std::vector<char> in_basis(total, 0);
    for (std::size_t j : basis_) in_basis[j] = 1;
    std::size_t pivots = 0;
    std::size_t degenerate_streak = 0;
    DenseVector y(m_), d(m_);
    while (true) {
      if (pivots >= budget) throw Error(ErrorCode::iteration_limit, "simplex iteration budget exhausted");
      // Duals y^T = c_B^T Binv.
      std::fill(y.begin(), y.end(), 0.0);
      for (std::size_t k = 0; k < m_; ++k) {
        const double cb = cost[basis_[k]];
        if (cb == 0.0) continue;
        auto row = Binv_.row(k);
        for (std::size_t r = 0; r < m_; ++r) y[r] += cb * row[r];
      }
      const bool bland = degenerate_streak >= opt_.degenerate_streak_for_bland;
      std::size_t entering = total;
      double best = -opt_.optimality_tol;
      for (std::size_t j = 0; j < total; ++j) {
        if (in_basis[j] || !eligible[j]) continue;
        double dj = cost[j];
        if (j < n_) {
          for (std::size_t r = 0; r < m_; ++r) dj -= y[r] * A_(r, j);
        } else {
          dj -= y[j - n_];
        }
        const double scale = 1.0 + std::abs(cost[j]);
        if (dj < -opt_.optimality_tol * scale) {
          if (bland) {
            entering = j;
            break;
          }
          if (dj / scale < best) {
            best = dj / scale;
            entering = j;
          }
        }
      }
      if (entering == total) return pivots;

      // Direction d = Binv a_entering.
      for (std::size_t k = 0; k < m_; ++k) {
        double s = 0.0;
        auto row = Binv_.row(k);
        for (std::size_t r = 0; r < m_; ++r) s += row[r] * column_entry(r, entering);
        d[k] = s;
      }
      std::size_t leave = m_;
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < m_; ++k) {
        if (d[k] <= opt_.pivot_tol) continue;
        const double t = std::max(xB_[k], 0.0) / d[k];
        const double eps = 1e-12 * (1.0 + std::abs(t));
        if (leave == m_ || t < ratio - eps) {
          ratio = t;
          leave = k;
        } else if (t <= ratio + eps && basis_[k] < basis_[leave]) {
          ratio = std::min(ratio, t);
          leave = k;
        }
      }
      if (leave == m_) throw Error(ErrorCode::infeasible, "unbounded direction in a bounded program");

      degenerate_streak = ratio <= opt_.feasibility_tol * 1e-3 ? degenerate_streak + 1 : 0;
      pivot(leave, entering, d, std::max(xB_[leave], 0.0) / d[leave]);
      in_basis[basis_[leave]] = 0;
      in_basis[entering] = 1;
      basis_[leave] = entering;
      ++pivots;
      if (++since_refactor_ >= kRefactorEvery) refactor();
    }
  }

  const std::vector<std::size_t>& basis() const { return basis_; }
  const DenseVector& basic_values() const { return xB_; }
  const DenseMatrix& basis_inverse() const { return Binv_; }
  std::size_t rows() const { return m_; }
  std::size_t structural_cols() const { return n_; }

  static constexpr std::size_t kRefactorEvery = 50;

 private:
  void pivot(std::size_t leave, std::size_t /*entering*/, const DenseVector& d, double theta) {
    const double piv = d[leave];
    for (std::size_t k = 0; k < m_; ++k) {
      if (k == leave) continue;
      xB_[k] -= theta * d[k];
      if (xB_[k] < 0.0 && xB_[k] > -opt_.feasibility_tol) xB_[k] = 0.0;
    }
    xB_[leave] = theta;
    auto lrow = Binv_.row(leave);
    for (double& v : lrow) v /= piv;
    for (std::size_t k = 0; k < m_; ++k) {
      if (k == leave || d[k] == 0.0) continue;
      auto row = Binv_.row(k);
      const double f = d[k];
      for (std::size_t r = 0; r < m_; ++r) row[r] -= f * lrow[r];
    }
  }

  const DenseMatrix& A_;
  const DenseVector& b_;
  SimplexOptions opt_;
  std::size_t m_, n_;
  std::vector<std::size_t> basis_;
  DenseMatrix Binv_;
  DenseVector xB_;
  std::size_t since_refactor_ = 0;
};

}  // namespace detail

/// Solves a standard-form LP to a basic (vertex) optimal solution.
/// Throws Infeasible if phase one cannot reach feasibility and IterationLimit
/// when the pivot budget is exhausted.
inline LpSolution lp_solve_standard_form(const StandardFormLP& lp, const SimplexOptions& opt = {}) {
  const std::size_t m = lp.A.rows(), n = lp.A.cols();
  if (lp.b.size() != m || lp.cost.size() != n) throw Error(ErrorCode::dimension_mismatch, "LP shapes");
  if (!lp.A.all_finite()) throw Error(ErrorCode::invalid_parameter, "LP matrix has non-finite entries");

  // Flip rows so that b >= 0; artificial unit columns then form a feasible basis.
  DenseMatrix A = lp.A;
  DenseVector b = lp.b;
  for (std::size_t r = 0; r < m; ++r)
    if (b[r] < 0.0) {
      b[r] = -b[r];
      for (double& v : A.row(r)) v = -v;
    }

  const std::size_t budget = opt.max_iterations ? opt.max_iterations : 50 * (m + n) + 1000;
  detail::RevisedSimplex sx(A, b, opt);
  std::vector<std::size_t> basis(m);
  for (std::size_t r = 0; r < m; ++r) basis[r] = n + r;
  sx.set_basis(basis);

  // Phase one: minimize the sum of artificials.
  DenseVector cost1(n + m, 0.0);
  for (std::size_t r = 0; r < m; ++r) cost1[n + r] = 1.0;
  std::vector<char> eligible(n + m, 1);
  std::size_t iterations = sx.optimize(cost1, eligible, budget);
  sx.refactor();
  double infeas = 0.0;
  for (std::size_t k = 0; k < m; ++k)
    if (sx.basis()[k] >= n) infeas += std::abs(sx.basic_values()[k]);
  const double bnorm = norm_inf(b);
  if (infeas > opt.feasibility_tol * (1.0 + bnorm))
    throw Error(ErrorCode::infeasible, "phase one ended with artificial mass " + std::to_string(infeas));

  // Drive remaining (zero-level) artificials out of the basis where possible.
  {
    std::vector<std::size_t> cur = sx.basis();
    std::vector<char> in_basis(n + m, 0);
    for (std::size_t j : cur) in_basis[j] = 1;
    bool changed = false;
    for (std::size_t k = 0; k < m; ++k) {
      if (cur[k] < n) continue;
      const auto binv_row = sx.basis_inverse().row(k);
      std::size_t best_j = n;
      double best = 1e-7;
      for (std::size_t j = 0; j < n; ++j) {
        if (in_basis[j]) continue;
        double s = 0.0;
        for (std::size_t r = 0; r < m; ++r) s += binv_row[r] * A(r, j);
        if (std::abs(s) > best) {
          best = std::abs(s);
          best_j = j;
        }
      }
      if (best_j < n) {
        in_basis[cur[k]] = 0;
        in_basis[best_j] = 1;
        cur[k] = best_j;
        sx.set_basis(cur);
        changed = true;
      }
    }
    (void)changed;
  }
  for (std::size_t j = n; j < n + m; ++j) eligible[j] = 0;

  // Phase two on the original costs; redundant-row artificials stay basic at zero.
  DenseVector cost2(n + m, 0.0);
  std::copy(lp.cost.begin(), lp.cost.end(), cost2.begin());
  iterations += sx.optimize(cost2, eligible, budget);
  sx.refactor();

  LpSolution sol;
  sol.x.assign(n, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t j = sx.basis()[k];
    if (j < n) sol.x[j] = std::max(sx.basic_values()[k], 0.0);
  }
  sol.objective = dot(lp.cost, sol.x);
  sol.iterations = iterations;
  sol.basis = sx.basis();
  return sol;
}

}  // namespace satq
