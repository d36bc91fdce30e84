#pragma once

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

enum class AlphabetKind { midrise, midtread };

inline std::string to_string(AlphabetKind k) { return k == AlphabetKind::midrise ? "midrise" : "midtread"; }

/// Symmetric uniform grid whose extreme elements are exactly ±scale.
///
/// midrise: {±(k - 1/2) step : 1 <= k <= K}, 2K elements, (K - 1/2) step = scale
/// midtread: {±k step : 0 <= k <= K}, 2K+1 elements, K step = scale
class Alphabet {
 public:
  AlphabetKind kind() const noexcept { return kind_; }
  std::size_t levels() const noexcept { return levels_; }
  double step() const noexcept { return step_; }
  double scale() const noexcept { return scale_; }
  /// Bit budget when built through build_uniform_bbit.
  std::optional<int> bits() const noexcept { return bits_; }
  const std::vector<double>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }

  bool contains(double v) const noexcept {
    return std::binary_search(elements_.begin(), elements_.end(), v);
  }

 private:
  friend Alphabet build_midrise(std::size_t, double);
  friend Alphabet build_midtread(std::size_t, double);
  friend Alphabet build_uniform_bbit(int, double);

  AlphabetKind kind_ = AlphabetKind::midrise;
  std::size_t levels_ = 0;
  double step_ = 0.0;
  double scale_ = 0.0;
  std::optional<int> bits_;
  std::vector<double> elements_;
};

inline Alphabet build_midrise(std::size_t K, double c) {
  if (K == 0) throw Error(ErrorCode::invalid_parameter, "midrise alphabet needs K >= 1");
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::invalid_parameter, "scale must be positive");
  Alphabet a;
  a.kind_ = AlphabetKind::midrise;
  a.levels_ = K;
  a.scale_ = c;
  a.step_ = 2.0 * c / static_cast<double>(2 * K - 1);
  std::vector<double> pos(K);
  for (std::size_t k = 1; k <= K; ++k) pos[k - 1] = (static_cast<double>(k) - 0.5) * a.step_;
  pos.back() = c;
  a.elements_.reserve(2 * K);
  for (std::size_t k = K; k-- > 0;) a.elements_.push_back(-pos[k]);
  a.elements_.insert(a.elements_.end(), pos.begin(), pos.end());
  return a;
}

inline Alphabet build_midtread(std::size_t K, double c) {
  if (K == 0) throw Error(ErrorCode::invalid_parameter, "midtread alphabet needs K >= 1");
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::invalid_parameter, "scale must be positive");
  Alphabet a;
  a.kind_ = AlphabetKind::midtread;
  a.levels_ = K;
  a.scale_ = c;
  a.step_ = c / static_cast<double>(K);
  std::vector<double> pos(K);
  for (std::size_t k = 1; k <= K; ++k) pos[k - 1] = static_cast<double>(k) * a.step_;
  pos.back() = c;
  a.elements_.reserve(2 * K + 1);
  for (std::size_t k = K; k-- > 0;) a.elements_.push_back(-pos[k]);
  a.elements_.push_back(0.0);
  a.elements_.insert(a.elements_.end(), pos.begin(), pos.end());
  return a;
}

/// 2^B-element alphabet on [-c, c]. Even cardinality forces the midrise kind.
inline Alphabet build_uniform_bbit(int B, double c) {
  if (B < 1 || B > 52) throw Error(ErrorCode::invalid_parameter, "bit budget must be in [1, 52]");
  Alphabet a = build_midrise(std::size_t{1} << (B - 1), c);
  a.bits_ = B;
  return a;
}

/// Nearest alphabet element; exact ties go to the larger element.
inline double msq(double z, const Alphabet& alphabet) noexcept {
  const auto& e = alphabet.elements();
  auto it = std::lower_bound(e.begin(), e.end(), z);
  if (it == e.end()) return e.back();
  if (it == e.begin()) return e.front();
  const double hi = *it;
  const double lo = *(it - 1);
  // Sign of 2z - (lo + hi) without rounding: lo + hi = s + err exactly (TwoSum).
  // Near the midpoint 2z - s is exact; far from it |2z - s| dwarfs err.
  const double s = lo + hi;
  const double bb = s - lo;
  const double err = (lo - (s - bb)) + (hi - bb);
  const double d = 2.0 * z - s;
  return d < err ? lo : hi;
}

inline DenseVector msq(std::span<const double> z, const Alphabet& alphabet) {
  DenseVector q(z.size());
  std::transform(z.begin(), z.end(), q.begin(), [&](double v) { return msq(v, alphabet); });
  return q;
}

inline DenseMatrix msq(const DenseMatrix& Z, const Alphabet& alphabet) {
  DenseMatrix Q(Z.rows(), Z.cols());
  auto in = Z.data();
  auto out = Q.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = msq(in[i], alphabet);
  return Q;
}

struct DistortionProfile {
  double worst_case = 0.0;
  /// c·2^{-B}, the nominal figure usually quoted for B-bit grids; absent for
  /// alphabets not built from a bit budget.
  std::optional<double> nominal;
};

/// Exact max_{z in [-c, c]} |z - msq(z)| = half the grid step, since both
/// interval endpoints are alphabet elements. Taken from the closed form
/// c/(2K-1) (midrise) or c/(2K) (midtread) rather than from the stored
/// elements, whose gaps carry rounding.
inline DistortionProfile worst_case_distortion(const Alphabet& alphabet) {
  DistortionProfile p;
  const double K = static_cast<double>(alphabet.levels());
  p.worst_case = alphabet.kind() == AlphabetKind::midrise ? alphabet.scale() / (2.0 * K - 1.0)
                                                          : alphabet.scale() / (2.0 * K);
  if (alphabet.bits()) p.nominal = std::ldexp(alphabet.scale(), -*alphabet.bits());
  return p;
}

}  // namespace satq
