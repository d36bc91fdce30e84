#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "satq/dense.hpp"

namespace satq {

/// Derives an independent stream key from a parent seed and a stream index,
/// so per-cell randomness does not depend on scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

/// Counter-based generator: the k-th draw is a pure function of (key, k).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(counter_++)); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal by Box-Muller.
  double gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  CounterRng rng(seed);
  DenseMatrix M(rows, cols);
  for (double& v : M.data()) v = rng.gaussian();
  return M;
}

inline DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi, std::uint64_t seed) {
  CounterRng rng(seed);
  DenseMatrix M(rows, cols);
  for (double& v : M.data()) v = rng.uniform(lo, hi);
  return M;
}

inline DenseVector gaussian_vector(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  DenseVector v(n);
  for (double& x : v) x = rng.gaussian();
  return v;
}

inline DenseVector uniform_vector(std::size_t n, double lo, double hi, std::uint64_t seed) {
  CounterRng rng(seed);
  DenseVector v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace satq
