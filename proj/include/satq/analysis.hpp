#pragma once

// Data-complexity parameter Γ(X), error metrics, bound evaluation and
// empirical scaling fits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "satq/dense.hpp"
#include "satq/error.hpp"
#include "satq/quantizer.hpp"
#include "satq/rng.hpp"

namespace satq {

inline constexpr std::uint64_t kGammaEnumerationGuard = 200'000;

/// binomial(n, k), saturating at `cap + 1` once it exceeds cap.
inline std::uint64_t binomial_capped(std::size_t n, std::size_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double acc = 1.0L;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (acc > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::uint64_t>(std::llround(acc));
}

namespace detail {

inline double restricted_norm(const DenseMatrix& Xt, std::span<const std::size_t> cols) {
  const std::size_t m = Xt.rows();
  DenseMatrix G(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      double s = 0.0;
      for (std::size_t c : cols) s += Xt(i, c) * Xt(j, c);
      G(i, j) = G(j, i) = s;
    }
  const auto ev = symmetric_eigenvalues(G);
  return std::sqrt(std::max(0.0, *std::max_element(ev.begin(), ev.end())));
}

}  // namespace detail

/// Γ(Xt) = max over |T| = m of ‖Xt restricted to the columns T‖, by full
/// enumeration. Throws TooLarge when binomial(N0, m) exceeds `guard`.
inline double gamma_exact(const DenseMatrix& Xt, std::uint64_t guard = kGammaEnumerationGuard) {
  const std::size_t n0 = Xt.cols();
  const std::size_t k = std::min(Xt.rows(), n0);
  if (binomial_capped(n0, k, guard) > guard)
    throw Error(ErrorCode::too_large, "binomial(N0, m) exceeds the enumeration guard");
  std::vector<std::size_t> T(k);
  std::iota(T.begin(), T.end(), std::size_t{0});
  double best = 0.0;
  while (true) {
    best = std::max(best, detail::restricted_norm(Xt, T));
    std::size_t i = k;
    while (i > 0 && T[i - 1] == n0 - k + i - 1) --i;
    if (i == 0) break;
    ++T[i - 1];
    for (std::size_t j = i; j < k; ++j) T[j] = T[j - 1] + 1;
  }
  return best;
}

struct GammaEstimate {
  std::optional<double> exact;
  double upper = 0.0;              // ‖Xt‖
  double monte_carlo_lower = 0.0;  // max over sampled m-subsets
  std::size_t samples = 0;
};

inline GammaEstimate gamma_bounds(const DenseMatrix& Xt, std::size_t samples, std::uint64_t seed,
                                  std::uint64_t exact_guard = kGammaEnumerationGuard) {
  if (samples == 0) throw Error(ErrorCode::invalid_parameter, "samples must be >= 1");
  GammaEstimate g;
  g.samples = samples;
  g.upper = spectral_norm(Xt);
  const std::size_t n0 = Xt.cols();
  const std::size_t k = std::min(Xt.rows(), n0);
  CounterRng rng(seed);
  std::vector<std::size_t> perm(n0);
  for (std::size_t s = 0; s < samples; ++s) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next_u64() % (n0 - i));
      std::swap(perm[i], perm[j]);
    }
    const std::span<const std::size_t> T(perm.data(), k);
    // Power iteration never overshoots, so the maximum stays a lower bound.
    const double est = spectral_norm_estimate(Xt.select_cols(T), 200, derive_seed(seed, s));
    g.monte_carlo_lower = std::max(g.monte_carlo_lower, est);
  }
  if (binomial_capped(n0, k, exact_guard) <= exact_guard) g.exact = gamma_exact(Xt, exact_guard);
  return g;
}

struct ErrorReport {
  double absolute = 0.0;             // ‖Xt W - Xt Q‖_F
  double relative = 0.0;             // absolute / ‖Xt W‖_F
  double bound_deterministic = 0.0;  // Γ·√(N1 m)·distortion
  double bound_gaussian = 0.0;       // relative-error rate 2^{-B}√(N1 m ln N0)‖W‖_∞/‖W‖_F
  double distortion = 0.0;
  double gamma_upper = 0.0;
  std::optional<double> gamma_exact;
  double gamma_used = 0.0;
  int B = 0;
  std::size_t m = 0, N0 = 0, N1 = 0;
  std::uint64_t seed = 0;
};

struct BoundOptions {
  /// Compute exact Γ when binomial(N0, m) is at most this; the deterministic
  /// bound then uses it instead of ‖Xt‖.
  std::uint64_t exact_gamma_limit = 2000;
  bool enforce = true;
  std::uint64_t seed = 0;
};

/// Fills measured errors and both bounds. With `enforce`, a measured error
/// above the deterministic bound raises BoundViolated: that bound holds for
/// every input, so a violation is a bug.
inline ErrorReport evaluate_bounds(const DenseMatrix& Xt, const DenseMatrix& W, const DenseMatrix& Q,
                                   const Alphabet& alphabet, const BoundOptions& opt = {}) {
  if (W.rows() != Xt.cols() || Q.rows() != W.rows() || Q.cols() != W.cols())
    throw Error(ErrorCode::dimension_mismatch, "evaluate_bounds shapes");
  ErrorReport r;
  r.m = Xt.rows();
  r.N0 = Xt.cols();
  r.N1 = W.cols();
  r.B = alphabet.bits().value_or(0);
  r.seed = opt.seed;
  const DenseMatrix XW = matmul(Xt, W);
  const double ref = frobenius(XW);
  r.absolute = frobenius(subtract(XW, matmul(Xt, Q)));
  r.relative = ref > 0.0 ? r.absolute / ref : 0.0;
  r.distortion = worst_case_distortion(alphabet).worst_case;
  r.gamma_upper = spectral_norm(Xt);
  if (binomial_capped(r.N0, std::min(r.m, r.N0), opt.exact_gamma_limit) <= opt.exact_gamma_limit)
    r.gamma_exact = gamma_exact(Xt, opt.exact_gamma_limit);
  r.gamma_used = r.gamma_exact.value_or(r.gamma_upper);
  r.bound_deterministic =
      r.gamma_used * std::sqrt(static_cast<double>(r.N1 * r.m)) * r.distortion;
  const double wf = frobenius(W);
  r.bound_gaussian = wf > 0.0 && r.B > 0
                         ? std::ldexp(1.0, -r.B) *
                               std::sqrt(static_cast<double>(r.N1 * r.m) * std::log(static_cast<double>(r.N0))) *
                               max_abs(W) / wf
                         : 0.0;
  // Rounding slack for the data residual A0 ŵ - A0 w, which is not exactly zero.
  const double slack = 1e-10 * (1.0 + ref);
  if (opt.enforce && r.absolute > r.bound_deterministic + slack)
    throw Error(ErrorCode::bound_violated, "measured error " + std::to_string(r.absolute) +
                                               " exceeds deterministic bound " +
                                               std::to_string(r.bound_deterministic));
  return r;
}

inline ErrorReport evaluate_bounds(const DenseMatrix& Xt, std::span<const double> w, std::span<const double> q,
                                   const Alphabet& alphabet, const BoundOptions& opt = {}) {
  return evaluate_bounds(Xt, DenseMatrix(w.size(), 1, DenseVector(w.begin(), w.end())),
                         DenseMatrix(q.size(), 1, DenseVector(q.begin(), q.end())), alphabet, opt);
}

struct GeneralizationResult {
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  double rate = 0.0;  // m √(ln N0) / (√N0 - √m)
  std::size_t trials = 0;
};

/// Samples z = X h (h Gaussian) in the span of the data and measures
/// |z^T (w - q)| / (‖z‖_2 ‖w‖_∞).
inline GeneralizationResult generalization_check(const DenseMatrix& Xt, std::span<const double> w,
                                                 std::span<const double> q, std::size_t trials, std::uint64_t seed) {
  if (w.size() != Xt.cols() || q.size() != w.size())
    throw Error(ErrorCode::dimension_mismatch, "generalization_check shapes");
  GeneralizationResult g;
  g.trials = trials;
  const double m = static_cast<double>(Xt.rows()), n0 = static_cast<double>(Xt.cols());
  g.rate = m * std::sqrt(std::log(n0)) / (std::sqrt(n0) - std::sqrt(m));
  const double winf = norm_inf(w);
  const DenseVector diff = subtract(w, q);
  CounterRng rng(seed);
  double sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    DenseVector h(Xt.rows());
    do {
      for (double& v : h) v = rng.gaussian();
    } while (norm2(h) == 0.0);
    const DenseVector z = matvec_transposed(Xt, h);
    const double zn = norm2(z);
    const double ratio = zn > 0.0 && winf > 0.0 ? std::abs(dot(z, diff)) / (zn * winf) : 0.0;
    g.max_ratio = std::max(g.max_ratio, ratio);
    sum += ratio;
  }
  g.mean_ratio = trials ? sum / static_cast<double>(trials) : 0.0;
  return g;
}

// ---- scaling fits ---------------------------------------------------------

enum class ScalingAxis { bits, n0, m, runtime_n, runtime_m };

struct ScalingPoint {
  double x = 0.0;
  double y = 0.0;
};

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least squares y = slope x + intercept.
inline ScalingFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error(ErrorCode::insufficient_data, "need at least 2 points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::insufficient_data, "all x values coincide");
  ScalingFit f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Averages y per distinct x, then fits log y against log x. The bits axis is
/// fit as log2 y against B, since error decays geometrically in B.
/// Needs at least 4 distinct x values with positive mean y.
inline ScalingFit fit_scaling(std::span<const ScalingPoint> points, ScalingAxis axis) {
  std::map<double, std::pair<double, std::size_t>> groups;
  for (const auto& p : points) {
    auto& g = groups[p.x];
    g.first += p.y;
    ++g.second;
  }
  std::vector<double> xs, ys;
  for (const auto& [x, g] : groups) {
    const double mean = g.first / static_cast<double>(g.second);
    if (!(mean > 0.0) || !(x > 0.0 || axis == ScalingAxis::bits)) continue;
    if (axis == ScalingAxis::bits) {
      xs.push_back(x);
      ys.push_back(std::log2(mean));
    } else {
      xs.push_back(std::log(x));
      ys.push_back(std::log(mean));
    }
  }
  if (xs.size() < 4) throw Error(ErrorCode::insufficient_data, "need at least 4 sweep points per axis");
  return fit_line(xs, ys);
}

}  // namespace satq
