#pragma once

// ℓ∞-minimization route: min ‖z‖_∞ s.t. A z = A w, and the layer-level
// tie-breaking program that pins every column to the shared cap Ĉ.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "satq/dense.hpp"
#include "satq/error.hpp"
#include "satq/parallel.hpp"
#include "satq/rng.hpp"
#include "satq/simplex.hpp"

namespace satq {

struct LinfSolution {
  DenseVector z_star;
  double value = 0.0;  // ‖z_star‖_∞
  std::size_t saturated_count = 0;
  std::size_t iterations = 0;
};

/// Relative tolerance for declaring |z_i| equal to the optimal max-norm.
inline constexpr double kLinfSaturationTolerance = 1e-10;

/// Standard form of min ‖z‖_∞ s.t. A z = y over x = (w+, w-, u) >= 0 with
/// w+ = u1 - z and w- = u1 + z:
///
///   [ -A   A   0 ] x = 2y
///   [  I   I  -2 ] x = 0      (ties w+ and w- back to the same u)
///
/// The objective selects u.
inline StandardFormLP build_linf_lp(const DenseMatrix& A, std::span<const double> y) {
  const std::size_t m = A.rows(), n = A.cols();
  if (y.size() != m) throw Error(ErrorCode::dimension_mismatch, "rhs length != rows");
  StandardFormLP lp{DenseMatrix(m + n, 2 * n + 1), DenseVector(m + n, 0.0), DenseVector(2 * n + 1, 0.0)};
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      lp.A(r, i) = -A(r, i);
      lp.A(r, n + i) = A(r, i);
    }
    lp.b[r] = 2.0 * y[r];
  }
  for (std::size_t i = 0; i < n; ++i) {
    lp.A(m + i, i) = 1.0;
    lp.A(m + i, n + i) = 1.0;
    lp.A(m + i, 2 * n) = -2.0;
  }
  lp.cost[2 * n] = 1.0;
  return lp;
}

namespace detail {

inline std::size_t clamp_saturated(DenseVector& z, double cap, double rel_tol) {
  if (cap == 0.0) {
    std::fill(z.begin(), z.end(), 0.0);
    return z.size();
  }
  std::size_t count = 0;
  for (double& v : z)
    if (std::abs(v) >= cap * (1.0 - rel_tol)) {
      v = v >= 0.0 ? cap : -cap;
      ++count;
    }
  return count;
}

}  // namespace detail

/// Minimal max-norm z with A z = A w, returned at an LP vertex.
inline LinfSolution linf_minimize_rhs(const DenseMatrix& A, std::span<const double> y) {
  const std::size_t n = A.cols();
  if (n <= A.rows()) throw Error(ErrorCode::dimension_mismatch, "linf_minimize needs n > m");
  const auto lp = build_linf_lp(A, y);
  const auto sol = lp_solve_standard_form(lp);
  LinfSolution out;
  out.z_star.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.z_star[i] = 0.5 * (sol.x[n + i] - sol.x[i]);
  const double u = sol.x[2 * n];
  out.value = u;
  out.saturated_count = detail::clamp_saturated(out.z_star, u, kLinfSaturationTolerance);
  out.value = norm_inf(out.z_star);
  out.iterations = sol.iterations;
  return out;
}

inline LinfSolution linf_minimize(const DenseMatrix& Xt, std::span<const double> w) {
  if (w.size() != Xt.cols()) throw Error(ErrorCode::dimension_mismatch, "neuron length != data columns");
  return linf_minimize_rhs(Xt, matvec(Xt, w));
}

/// Tie-breaking program: min a^T z s.t. ‖z‖_∞ <= cap, Xt z = Xt w.
/// Written over v = cap·1 - z in [0, 2 cap] with slack s = 2 cap - v.
inline StandardFormLP build_tiebreak_lp(const DenseMatrix& Xt, std::span<const double> w, double cap,
                                        std::span<const double> a) {
  const std::size_t m = Xt.rows(), n = Xt.cols();
  if (w.size() != n || a.size() != n) throw Error(ErrorCode::dimension_mismatch, "tie-break shapes");
  StandardFormLP lp{DenseMatrix(m + n, 2 * n), DenseVector(m + n, 0.0), DenseVector(2 * n, 0.0)};
  DenseVector shifted(n);
  for (std::size_t i = 0; i < n; ++i) shifted[i] = cap - w[i];
  const DenseVector rhs = matvec(Xt, shifted);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t i = 0; i < n; ++i) lp.A(r, i) = Xt(r, i);
    lp.b[r] = rhs[r];
  }
  for (std::size_t i = 0; i < n; ++i) {
    lp.A(m + i, i) = 1.0;
    lp.A(m + i, n + i) = 1.0;
    lp.b[m + i] = 2.0 * cap;
    lp.cost[i] = -a[i];
  }
  return lp;
}

inline LinfSolution solve_tiebreak(const DenseMatrix& Xt, std::span<const double> w, double cap,
                                   std::span<const double> a) {
  const std::size_t n = Xt.cols();
  const auto sol = lp_solve_standard_form(build_tiebreak_lp(Xt, w, cap, a));
  LinfSolution out;
  out.z_star.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.z_star[i] = std::clamp(cap - sol.x[i], -cap, cap);
  out.saturated_count = detail::clamp_saturated(out.z_star, cap, kLinfSaturationTolerance);
  out.value = norm_inf(out.z_star);
  out.iterations = sol.iterations;
  return out;
}

struct LayerLinfResult {
  double c_hat = 0.0;
  DenseMatrix W_hat;                   // N0 x N1, every column at max-norm c_hat
  std::vector<LinfSolution> stage1;    // per-column ℓ∞ minimizers
  std::vector<LinfSolution> columns;   // per-column tie-break solutions
  std::vector<DenseVector> tie_breakers;
  std::vector<std::size_t> redraws;
};

inline constexpr std::size_t kMaxTieBreakerRedraws = 8;

/// Two-stage layer pre-processing. Stage 1: Ĉ = max_i min ‖z‖_∞ over the
/// columns. Stage 2: per column, the tie-breaking program with a seeded
/// Gaussian direction, redrawn when fewer than N0 - m entries reach Ĉ.
inline LayerLinfResult layer_linf_preprocess(const DenseMatrix& Xt, const DenseMatrix& W, std::uint64_t seed,
                                             std::size_t workers = 1) {
  const std::size_t m = Xt.rows(), n0 = Xt.cols(), n1 = W.cols();
  if (W.rows() != n0) throw Error(ErrorCode::dimension_mismatch, "W rows != data columns");
  if (n0 <= m) throw Error(ErrorCode::dimension_mismatch, "layer pre-processing needs N0 > m");
  if (n1 == 0) throw Error(ErrorCode::dimension_mismatch, "layer has no neurons");

  LayerLinfResult res;
  res.stage1.resize(n1);
  parallel_for(n1, workers, [&](std::size_t j) { res.stage1[j] = linf_minimize(Xt, W.col(j)); });
  for (const auto& s : res.stage1) res.c_hat = std::max(res.c_hat, s.value);

  res.W_hat = DenseMatrix(n0, n1);
  res.columns.resize(n1);
  res.tie_breakers.resize(n1);
  res.redraws.assign(n1, 0);
  if (res.c_hat == 0.0) {
    for (std::size_t j = 0; j < n1; ++j) res.columns[j] = res.stage1[j];
    return res;
  }
  parallel_for(n1, workers, [&](std::size_t j) {
    const DenseVector w = W.col(j);
    for (std::size_t draw = 0; draw <= kMaxTieBreakerRedraws; ++draw) {
      DenseVector a = gaussian_vector(n0, derive_seed(derive_seed(seed, j), draw));
      LinfSolution s;
      try {
        s = solve_tiebreak(Xt, w, res.c_hat, a);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::iteration_limit) throw;
        continue;
      }
      if (s.saturated_count + m >= n0 && s.value == res.c_hat) {
        res.columns[j] = std::move(s);
        res.tie_breakers[j] = std::move(a);
        res.redraws[j] = draw;
        return;
      }
    }
    throw Error(ErrorCode::degenerate_tie_breaker,
                "column " + std::to_string(j) + " not in general position after 8 redraws");
  });
  for (std::size_t j = 0; j < n1; ++j) res.W_hat.set_col(j, res.columns[j].z_star);
  return res;
}

}  // namespace satq
