#pragma once

// Self-check suite behind `satq check`: small randomized instances of every
// contract the library promises, with pass counts per invariant.

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "satq/analysis.hpp"
#include "satq/harness.hpp"
#include "satq/linf.hpp"
#include "satq/pipeline.hpp"
#include "satq/preprocess.hpp"
#include "satq/quantizer.hpp"

namespace satq {

struct InvariantResult {
  std::string name;
  std::size_t passed = 0;
  std::size_t total = 0;
  std::string first_failure;

  bool ok() const { return passed == total; }
};

struct InvariantSuiteReport {
  std::vector<InvariantResult> results;

  bool ok() const {
    for (const auto& r : results)
      if (!r.ok()) return false;
    return true;
  }
};

namespace detail {

class InvariantRecorder {
 public:
  explicit InvariantRecorder(std::string name) { r_.name = std::move(name); }

  void check(bool cond, const std::string& what) {
    ++r_.total;
    if (cond) ++r_.passed;
    else if (r_.first_failure.empty()) r_.first_failure = what;
  }

  // Runs fn; an exception counts as a failed case.
  void run(const std::string& what, const std::function<bool()>& fn) {
    bool ok = false;
    std::string msg = what;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      msg += ": " + std::string(e.what());
    }
    check(ok, msg);
  }

  InvariantResult result() const { return r_; }

 private:
  InvariantResult r_;
};

inline std::string case_name(const char* kind, std::size_t i) { return std::string(kind) + " #" + std::to_string(i); }

}  // namespace detail

inline InvariantSuiteReport run_invariant_suite(std::uint64_t seed) {
  using detail::InvariantRecorder;
  InvariantSuiteReport rep;

  {
    InvariantRecorder r("quantizer: exact worst-case distortion");
    for (int B = 1; B <= 8; ++B) {
      const auto a = build_uniform_bbit(B, 1.0);
      r.check(worst_case_distortion(a).worst_case == 1.0 / ((1 << B) - 1), "B=" + std::to_string(B));
    }
    rep.results.push_back(r.result());
  }
  {
    InvariantRecorder r("quantizer: idempotent and monotone");
    CounterRng rng(derive_seed(seed, 1));
    for (int B = 1; B <= 6; ++B) {
      const auto a = build_uniform_bbit(B, 0.7);
      bool ok = true;
      for (double e : a.elements()) ok = ok && msq(e, a) == e;
      double prev = -1.0;
      double prev_q = msq(prev, a);
      for (int k = 0; k < 200; ++k) {
        const double x = prev + rng.uniform() * 0.01;
        const double q = msq(x, a);
        ok = ok && q >= prev_q && msq(q, a) == q;
        prev = x;
        prev_q = q;
      }
      r.check(ok, "B=" + std::to_string(B));
    }
    rep.results.push_back(r.result());
  }
  {
    InvariantRecorder r("preprocess: hand trace");
    r.run("hand trace", [] {
      const DenseMatrix A{{1.0, 1.0, 1.0}};
      const DenseVector w{0.1, 0.2, 0.3};
      const auto nq = quantize_neuron(A, w, 1, Method::baseline);
      const DenseVector expect{0.3, 0.0, 0.3};
      bool ok = true;
      for (std::size_t i = 0; i < 3; ++i)
        ok = ok && std::abs(nq.preprocess.w_hat[i] - expect[i]) <= 1e-12 && std::abs(nq.q[i] - 0.3) <= 1e-12;
      return ok && std::abs(nq.error - 0.3) <= 1e-12;
    });
    rep.results.push_back(r.result());
  }
  {
    InvariantRecorder r("preprocess: contract (baseline and accelerated)");
    std::size_t i = 0;
    for (std::size_t m : {2u, 4u})
      for (std::size_t n : {16u, 40u})
        for (std::uint64_t s = 0; s < 5; ++s, ++i) {
          const std::uint64_t key = derive_seed(derive_seed(seed, 2), i);
          const DenseMatrix A = gaussian_matrix(m, n, derive_seed(key, 0));
          const DenseVector w = uniform_vector(n, -1.0, 1.0, derive_seed(key, 1));
          const double c = norm_inf(w);
          for (Method meth : {Method::baseline, Method::accelerated})
            r.run(detail::case_name(to_string(meth).c_str(), i), [&] {
              const auto res = preprocess(A, w, c, meth);
              return verify_preprocess_contract(A, w, res.w_hat, c, m).passed() && res.iterations <= n - m;
            });
        }
    rep.results.push_back(r.result());
  }
  {
    InvariantRecorder r("quantize: deterministic error bound");
    for (std::size_t i = 0; i < 20; ++i) {
      const std::uint64_t key = derive_seed(derive_seed(seed, 3), i);
      const DenseMatrix Xt = gaussian_matrix(4, 48, derive_seed(key, 0));
      const DenseVector w = uniform_vector(48, -1.0, 1.0, derive_seed(key, 1));
      const int B = 1 + static_cast<int>(i % 4);
      r.run(detail::case_name("instance", i), [&] {
        const auto nq = quantize_neuron(Xt, w, B, i % 2 ? Method::accelerated : Method::baseline);
        BoundOptions opt;
        opt.enforce = false;
        const auto e = evaluate_bounds(Xt, w, nq.q, nq.alphabet, opt);
        return e.absolute <= e.bound_deterministic;
      });
    }
    rep.results.push_back(r.result());
  }
  {
    InvariantRecorder r("linf: saturation count and dominance");
    for (std::size_t i = 0; i < 10; ++i) {
      const std::uint64_t key = derive_seed(derive_seed(seed, 4), i);
      const DenseMatrix Xt = gaussian_matrix(2, 8, derive_seed(key, 0));
      const DenseVector w = gaussian_vector(8, derive_seed(key, 1));
      r.run(detail::case_name("instance", i), [&] {
        const auto s = linf_minimize(Xt, w);
        const double res = norm2(subtract(matvec(Xt, s.z_star), matvec(Xt, w)));
        return s.saturated_count >= 7 && s.value <= norm_inf(w) * (1 + 1e-12) &&
               res <= 1e-8 * (1.0 + norm2(matvec(Xt, w)));
      });
    }
    rep.results.push_back(r.result());
  }
  {
    InvariantRecorder r("linf: layer tie-breaking saturation");
    for (std::size_t i = 0; i < 3; ++i) {
      const std::uint64_t key = derive_seed(derive_seed(seed, 5), i);
      const DenseMatrix Xt = gaussian_matrix(3, 12, derive_seed(key, 0));
      const DenseMatrix W = gaussian_matrix(12, 2, derive_seed(key, 1));
      r.run(detail::case_name("instance", i), [&] {
        const auto lr = layer_linf_preprocess(Xt, W, derive_seed(key, 2));
        bool ok = true;
        for (const auto& col : lr.columns) ok = ok && col.saturated_count >= 9 && col.value == lr.c_hat;
        return ok;
      });
    }
    rep.results.push_back(r.result());
  }
  {
    InvariantRecorder r("gamma: sandwich");
    for (std::size_t i = 0; i < 5; ++i) {
      const DenseMatrix Xt = gaussian_matrix(2, 6, derive_seed(derive_seed(seed, 6), i));
      r.run(detail::case_name("instance", i), [&] {
        const auto g = gamma_bounds(Xt, 50, derive_seed(seed, 60 + i));
        return g.exact && g.monte_carlo_lower <= *g.exact * (1 + 1e-12) && *g.exact <= g.upper * (1 + 1e-12);
      });
    }
    rep.results.push_back(r.result());
  }
  {
    InvariantRecorder r("csv: bit-exact round trip");
    const DenseMatrix M = gaussian_matrix(3, 4, derive_seed(seed, 7));
    r.run("3x4", [&] {
      std::ostringstream os;
      os << "# 3 4\n";
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) os << (j ? "," : "") << format_double(M(i, j));
        os << '\n';
      }
      std::istringstream is(os.str());
      return parse_matrix_csv(is) == M;
    });
    rep.results.push_back(r.result());
  }
  return rep;
}

inline void print(const InvariantSuiteReport& rep, std::ostream& out) {
  std::size_t p = 0, t = 0;
  for (const auto& r : rep.results) {
    out << (r.ok() ? "PASS " : "FAIL ") << r.name << ": " << r.passed << "/" << r.total;
    if (!r.ok()) out << " (first failure: " << r.first_failure << ")";
    out << '\n';
    p += r.passed;
    t += r.total;
  }
  out << "total: " << p << "/" << t << '\n';
}

}  // namespace satq
