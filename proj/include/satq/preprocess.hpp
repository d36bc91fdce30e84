#pragma once

// Kernel-walk neuron pre-processing.
//
// Given A0 (m x n, n > m), a neuron w and a cap c >= ‖w‖_∞, the walk moves w
// along vectors of ker(A0) supported on the still-unsaturated coordinates until
// at most m coordinates have magnitude below c. The action A0 w is preserved.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "satq/dense.hpp"
#include "satq/error.hpp"

namespace satq {

enum class Method { baseline, accelerated, linf };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::baseline: return "baseline";
    case Method::accelerated: return "accelerated";
    case Method::linf: return "linf";
  }
  return "baseline";
}

inline Method method_from_string(const std::string& s) {
  if (s == "baseline") return Method::baseline;
  if (s == "accelerated") return Method::accelerated;
  if (s == "linf") return Method::linf;
  throw Error(ErrorCode::invalid_parameter, "unknown method '" + s + "'");
}

using IndexSet = std::vector<std::size_t>;

/// Entries with |z_i| >= c(1 - kSaturationTolerance) count as saturated and are
/// clamped to ±c exactly.
inline constexpr double kSaturationTolerance = 1e-12;
/// Refactorize the accelerated walk's inverse after this many rank-1 updates.
inline constexpr std::size_t kRefactorInterval = 64;

struct PreprocessResult {
  DenseVector w_hat;
  IndexSet saturated;  // sorted
  std::size_t iterations = 0;
  double data_residual = 0.0;  // ‖A0 ŵ - A0 w‖_2
  Method method = Method::baseline;
  std::size_t refactorizations = 0;
  bool fell_back = false;  // accelerated walk finished on the baseline path

  std::size_t unsaturated_count() const noexcept { return w_hat.size() - saturated.size(); }
};

struct KernelStep {
  DenseVector direction;
  double alpha = 0.0;
  IndexSet newly_saturated;
};

namespace detail {

inline bool is_saturated_value(double v, double c) noexcept {
  return std::abs(v) >= c * (1.0 - kSaturationTolerance);
}

inline double clamp_to_cap(double v, double c) noexcept { return v >= 0.0 ? c : -c; }

/// Kernel vector of the m x k matrix A0[:, cols] (k > m), by Gaussian
/// elimination with partial row pivoting, stopping at the first column that
/// has no usable pivot. Returns coefficients aligned with `cols`, normalized
/// to unit max-norm with the first nonzero entry positive.
inline DenseVector kernel_of_columns(const DenseMatrix& A0, std::span<const std::size_t> cols) {
  const std::size_t m = A0.rows();
  const std::size_t k = cols.size();
  DenseMatrix M = A0.select_cols(cols);
  const double cutoff = kSingularityTolerance * max_abs(M);
  std::size_t free_col = k;
  std::size_t r = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (r == m) {
      free_col = j;
      break;
    }
    std::size_t p = r;
    for (std::size_t i = r + 1; i < m; ++i)
      if (std::abs(M(i, j)) > std::abs(M(p, j))) p = i;
    if (std::abs(M(p, j)) <= cutoff || M(p, j) == 0.0) {
      free_col = j;
      break;
    }
    if (p != r) std::swap_ranges(M.row(r).begin(), M.row(r).end(), M.row(p).begin());
    for (std::size_t i = r + 1; i < m; ++i) {
      const double l = M(i, j) / M(r, j);
      if (l == 0.0) continue;
      for (std::size_t c = j; c < k; ++c) M(i, c) -= l * M(r, c);
    }
    ++r;
  }
  if (free_col == k) throw Error(ErrorCode::no_kernel_vector, "columns are linearly independent");
  // Columns [0, free_col) carry pivots in rows [0, free_col): back-substitute.
  DenseVector b(k, 0.0);
  b[free_col] = 1.0;
  for (std::size_t i = free_col; i-- > 0;) {
    double s = -M(i, free_col);
    for (std::size_t c = i + 1; c < free_col; ++c) s -= M(i, c) * b[c];
    b[i] = s / M(i, i);
  }
  const double scale = norm_inf(b);
  double sign = 1.0;
  for (double v : b)
    if (v != 0.0) {
      sign = v > 0.0 ? 1.0 : -1.0;
      break;
    }
  for (double& v : b) v = sign * (v / scale);
  return b;
}

/// Line search restricted to `idx`: smallest α >= 0 at which some coordinate
/// z_i + α b_i reaches ±c. Updates z on idx and clamps the newly saturated
/// entries. Returns α and writes the positions (into idx) that saturated.
inline double step_on(std::span<double> z, std::span<const std::size_t> idx,
                      std::span<const double> b_on_idx, double c,
                      std::vector<std::size_t>& saturated_positions) {
  double alpha = 0.0;
  std::size_t arg = idx.size();
  for (std::size_t p = 0; p < idx.size(); ++p) {
    const double bi = b_on_idx[p];
    if (bi == 0.0) continue;
    const double target = bi > 0.0 ? c : -c;
    const double a = std::max(0.0, (target - z[idx[p]]) / bi);
    if (arg == idx.size() || a < alpha) {
      alpha = a;
      arg = p;
    }
  }
  if (arg == idx.size()) throw Error(ErrorCode::no_crossing, "direction vanishes on free coordinates");
  saturated_positions.clear();
  for (std::size_t p = 0; p < idx.size(); ++p) {
    double& zi = z[idx[p]];
    zi += alpha * b_on_idx[p];
    if (p == arg) {
      zi = b_on_idx[p] > 0.0 ? c : -c;
      saturated_positions.push_back(p);
    } else if (is_saturated_value(zi, c)) {
      zi = clamp_to_cap(zi, c);
      saturated_positions.push_back(p);
    }
  }
  return alpha;
}

inline void check_inputs(const DenseMatrix& A0, std::span<const double> w, double c) {
  if (w.size() != A0.cols()) throw Error(ErrorCode::dimension_mismatch, "neuron length != data columns");
  if (A0.cols() <= A0.rows()) throw Error(ErrorCode::dimension_mismatch, "pre-processing needs n > m");
  if (!A0.all_finite()) throw Error(ErrorCode::invalid_parameter, "data matrix has non-finite entries");
  for (double v : w)
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_parameter, "neuron has non-finite entries");
  if (!(c > 0.0) || c < norm_inf(w))
    throw Error(ErrorCode::cap_too_small, "cap c must be positive and >= ‖w‖_∞");
}

/// Zero-column initialization followed by saturation of entries already at the cap.
/// Returns the saturation mask.
inline std::vector<char> initialize_walk(const DenseMatrix& A0, DenseVector& z, double c) {
  const std::size_t m = A0.rows(), n = A0.cols();
  std::vector<char> nonzero_col(n, 0);
  for (std::size_t r = 0; r < m; ++r) {
    auto row = A0.row(r);
    for (std::size_t i = 0; i < n; ++i)
      if (row[i] != 0.0) nonzero_col[i] = 1;
  }
  std::vector<char> sat(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!nonzero_col[i]) {
      z[i] = c;  // b_i = c - z_i lies in ker(A0) because column i is zero
      sat[i] = 1;
    } else if (is_saturated_value(z[i], c)) {
      z[i] = clamp_to_cap(z[i], c);
      sat[i] = 1;
    }
  }
  return sat;
}

/// Baseline walk from an arbitrary feasible state. Each iteration takes the
/// first m+1 unsaturated coordinates, computes a kernel vector there from
/// scratch (O(m^3)) and steps to the next saturation.
inline std::size_t walk_baseline(const DenseMatrix& A0, DenseVector& z, std::vector<char>& sat, double c) {
  const std::size_t m = A0.rows(), n = z.size();
  std::size_t unsat = static_cast<std::size_t>(std::count(sat.begin(), sat.end(), 0));
  std::vector<std::size_t> working;
  working.reserve(m + 1);
  std::size_t cursor = 0;
  auto refill = [&] {
    while (working.size() < m + 1 && cursor < n) {
      if (!sat[cursor]) working.push_back(cursor);
      ++cursor;
    }
  };
  std::size_t iterations = 0;
  std::vector<std::size_t> hit;
  while (unsat > m) {
    refill();
    const DenseVector b = kernel_of_columns(A0, working);
    step_on(z, working, b, c, hit);
    ++iterations;
    for (std::size_t p : hit) sat[working[p]] = 1;
    unsat -= hit.size();
    std::erase_if(working, [&](std::size_t i) { return sat[i] != 0; });
  }
  return iterations;
}

inline PreprocessResult finish(const DenseMatrix& A0, std::span<const double> w, DenseVector z,
                               const std::vector<char>& sat, Method method) {
  PreprocessResult res;
  res.method = method;
  for (std::size_t i = 0; i < sat.size(); ++i)
    if (sat[i]) res.saturated.push_back(i);
  res.data_residual = norm2(subtract(matvec(A0, z), matvec(A0, w)));
  res.w_hat = std::move(z);
  return res;
}

}  // namespace detail

/// Nonzero b with b_i = 0 outside `free` and A0 b ≈ 0, using the first m+1 free
/// indices as working set. Normalized to ‖b‖_∞ = 1, first nonzero entry positive.
inline DenseVector restricted_kernel_vector(const DenseMatrix& A0, const IndexSet& free) {
  const std::size_t m = A0.rows();
  if (free.size() < m + 1)
    throw Error(ErrorCode::no_kernel_vector, "need at least m+1 free indices");
  for (std::size_t i : free)
    if (i >= A0.cols()) throw Error(ErrorCode::dimension_mismatch, "free index out of range");
  const std::vector<std::size_t> working(free.begin(), free.begin() + static_cast<std::ptrdiff_t>(m + 1));
  const DenseVector coeffs = detail::kernel_of_columns(A0, working);
  DenseVector b(A0.cols(), 0.0);
  for (std::size_t p = 0; p < working.size(); ++p) b[working[p]] = coeffs[p];
  return b;
}

/// One step of the walk: the first positive α at which a free coordinate of
/// z + α b reaches magnitude c.
inline KernelStep saturation_step(std::span<const double> z, std::span<const double> b, double c,
                                  const IndexSet& saturated) {
  if (z.size() != b.size()) throw Error(ErrorCode::dimension_mismatch, "z and b differ in length");
  std::vector<char> sat(z.size(), 0);
  for (std::size_t i : saturated) sat.at(i) = 1;
  std::vector<std::size_t> free;
  DenseVector b_free;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (!sat[i]) {
      free.push_back(i);
      b_free.push_back(b[i]);
    }
  DenseVector work(z.begin(), z.end());
  std::vector<std::size_t> hit;
  KernelStep step;
  step.alpha = detail::step_on(work, free, b_free, c, hit);
  step.direction.assign(b.begin(), b.end());
  for (std::size_t p : hit) step.newly_saturated.push_back(free[p]);
  return step;
}

/// Algorithm: zero-column initialization, then repeated kernel steps, each
/// solving for a fresh kernel vector on m+1 unsaturated coordinates.
inline PreprocessResult preprocess_baseline(const DenseMatrix& A0, std::span<const double> w, double c) {
  detail::check_inputs(A0, w, c);
  DenseVector z(w.begin(), w.end());
  auto sat = detail::initialize_walk(A0, z, c);
  const std::size_t iterations = detail::walk_baseline(A0, z, sat, c);
  auto res = detail::finish(A0, w, std::move(z), sat, Method::baseline);
  res.iterations = iterations;
  return res;
}

/// The O(m^2 n) variant: keeps an (m+1)-column working set [Ã | a_last] and
/// the inverse of Ã, which is patched by a Sherman-Morrison update whenever a
/// working column saturates and is replaced by the next unused column. Falls
/// back to a fresh factorization on a degenerate update and to the baseline
/// walk when that fails too.
inline PreprocessResult preprocess_accelerated(const DenseMatrix& A0, std::span<const double> w, double c) {
  detail::check_inputs(A0, w, c);
  const std::size_t m = A0.rows(), n = A0.cols();
  DenseVector z(w.begin(), w.end());
  auto sat = detail::initialize_walk(A0, z, c);

  std::vector<std::size_t> order;  // unsaturated columns in natural order
  for (std::size_t i = 0; i < n; ++i)
    if (!sat[i]) order.push_back(i);

  std::size_t iterations = 0;
  std::size_t refactorizations = 0;
  bool fell_back = false;

  if (order.size() > m) {
    std::vector<std::size_t> slots(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m + 1));
    std::size_t next = m + 1;
    std::size_t unsat = order.size();
    const DenseMatrix At = A0.transpose();  // row i of At is column i of A0
    auto column = [&](std::size_t i) { return At.row(i); };

    auto factor = [&]() -> std::optional<DenseMatrix> {
      DenseMatrix block(m, m);
      for (std::size_t s = 0; s < m; ++s) block.set_col(s, column(slots[s]));
      ++refactorizations;
      try {
        return inverse(block);
      } catch (const Error&) {
        return std::nullopt;
      }
    };

    std::optional<DenseMatrix> Ainv = factor();
    std::size_t updates_since_factor = 0;
    DenseVector b(m + 1), u(m), scratch(m);
    std::vector<std::size_t> hit;
    const double col_scale = std::max(max_abs(A0), 1e-300);

    while (Ainv && unsat > m) {
      // b = (Ainv a_last, -1) spans the kernel of the working block.
      const auto last = column(slots[m]);
      for (std::size_t r = 0; r < m; ++r) {
        const auto row = Ainv->row(r);
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += row[k] * last[k];
        b[r] = s;
      }
      // Drift guard: residual of Ã bt = a_last.
      std::copy(last.begin(), last.end(), u.begin());
      for (std::size_t k = 0; k < m; ++k) {
        const auto col = column(slots[k]);
        const double bk = b[k];
        for (std::size_t r = 0; r < m; ++r) u[r] -= col[r] * bk;
      }
      const double resid = norm_inf(std::span<const double>(u.data(), m));
      if (resid > 1e-9 * col_scale * (1.0 + norm_inf(std::span<const double>(b.data(), m)))) {
        if (updates_since_factor == 0) {
          Ainv.reset();
          break;
        }
        Ainv = factor();
        updates_since_factor = 0;
        continue;
      }
      b[m] = -1.0;
      detail::step_on(z, slots, b, c, hit);
      ++iterations;
      for (std::size_t p : hit) sat[slots[p]] = 1;
      unsat -= hit.size();
      if (unsat <= m) break;

      // Replace each saturated slot by the next unused column.
      bool need_factor = false;
      for (std::size_t p : hit) {
        if (next >= order.size()) break;  // cannot happen while unsat > m
        const std::size_t incoming = order[next++];
        if (p == m || need_factor) {
          slots[p] = incoming;
          if (p != m) need_factor = true;
          continue;
        }
        const auto in_col = column(incoming);
        const auto out_col = column(slots[p]);
        for (std::size_t r = 0; r < m; ++r) u[r] = in_col[r] - out_col[r];
        slots[p] = incoming;
        try {
          rank1_inverse_update_inplace(*Ainv, u, p, scratch);
          ++updates_since_factor;
        } catch (const Error&) {
          need_factor = true;
        }
      }
      if (need_factor || updates_since_factor >= kRefactorInterval) {
        Ainv = factor();
        updates_since_factor = 0;
      }
    }
    if (unsat > m) {
      // General position failed: continue on the baseline path from the
      // current (still data-consistent) state.
      fell_back = true;
      iterations += detail::walk_baseline(A0, z, sat, c);
    }
  }

  auto res = detail::finish(A0, w, std::move(z), sat, Method::accelerated);
  res.iterations = iterations;
  res.refactorizations = refactorizations;
  res.fell_back = fell_back;
  return res;
}

inline PreprocessResult preprocess(const DenseMatrix& A0, std::span<const double> w, double c, Method method) {
  switch (method) {
    case Method::baseline: return preprocess_baseline(A0, w, c);
    case Method::accelerated: return preprocess_accelerated(A0, w, c);
    case Method::linf: break;
  }
  throw Error(ErrorCode::invalid_parameter, "linf pre-processing lives in linf.hpp");
}

struct ContractClause {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double limit = 0.0;
};

struct ContractReport {
  std::vector<ContractClause> clauses;
  bool passed() const noexcept {
    return std::all_of(clauses.begin(), clauses.end(), [](const ContractClause& c) { return c.passed; });
  }
};

/// Checks the three output guarantees of pre-processing: A0 ŵ = A0 w (relative
/// 1e-8), ‖ŵ‖_∞ = c exactly, and at most m entries below c in magnitude.
/// Never throws on a failed clause.
inline ContractReport verify_preprocess_contract(const DenseMatrix& A0, std::span<const double> w,
                                                 std::span<const double> w_hat, double c, std::size_t m) {
  ContractReport rep;
  ContractClause data{"data_residual", false, 0.0, 0.0};
  ContractClause cap{"linf_equals_cap", false, 0.0, c};
  ContractClause sparsity{"unsaturated_at_most_m", false, 0.0, static_cast<double>(m)};
  if (w.size() == A0.cols() && w_hat.size() == A0.cols()) {
    const DenseVector Aw = matvec(A0, w);
    data.measured = norm2(subtract(matvec(A0, w_hat), Aw));
    data.limit = 1e-8 * (1.0 + norm2(Aw));
    data.passed = data.measured <= data.limit;
    cap.measured = norm_inf(w_hat);
    cap.passed = cap.measured == c;
    std::size_t below = 0;
    for (double v : w_hat)
      if (std::abs(v) != c) ++below;
    sparsity.measured = static_cast<double>(below);
    sparsity.passed = below <= m;
  }
  rep.clauses = {data, cap, sparsity};
  return rep;
}

inline ContractReport verify_preprocess_contract(const DenseMatrix& A0, std::span<const double> w,
                                                 const PreprocessResult& result, double c) {
  return verify_preprocess_contract(A0, w, result.w_hat, c, A0.rows());
}

}  // namespace satq
