// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "satq/analysis.hpp"
#include "satq/harness.hpp"
#include "satq/linf.hpp"
#include "satq/pipeline.hpp"
#include "satq/preprocess.hpp"
#include "satq/quantizer.hpp"

using namespace satq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median_ms(int reps, const std::function<void()>& fn) {
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

struct Instance {
  DenseMatrix Xt;
  DenseVector w;
};

Instance gaussian_instance(std::size_t m, std::size_t n0, std::uint64_t key) {
  return {gaussian_matrix(m, n0, derive_seed(key, 0)), uniform_vector(n0, -1.0, 1.0, derive_seed(key, 1))};
}

// (m, N0) pairs with N0 > m from {2, 8, 32} x {16, 64, 512}.
std::vector<std::pair<std::size_t, std::size_t>> contract_grid() {
  std::vector<std::pair<std::size_t, std::size_t>> g;
  for (std::size_t m : {2u, 8u, 32u})
    for (std::size_t n : {16u, 64u, 512u})
      if (n > m) g.emplace_back(m, n);
  return g;
}

Outcome preprocess_contract() {
  const auto grid = contract_grid();
  std::size_t checks = 0, passed = 0;
  std::string first;
  for (std::size_t i = 0; i < 300; ++i) {
    const auto [m, n] = grid[i % grid.size()];
    const auto inst = gaussian_instance(m, n, derive_seed(1001, i));
    const double c = norm_inf(inst.w);
    for (Method meth : {Method::baseline, Method::accelerated}) {
      ++checks;
      try {
        const auto r = preprocess(inst.Xt, inst.w, c, meth);
        const DenseVector y = matvec(inst.Xt, inst.w);
        const double resid = norm2(subtract(matvec(inst.Xt, r.w_hat), y));
        std::size_t below = 0;
        for (double v : r.w_hat)
          if (std::abs(v) != c) ++below;
        const bool ok = resid <= 1e-8 * (1 + norm2(y)) && norm_inf(r.w_hat) == c && below <= m &&
                        r.iterations <= n - m;
        if (ok) ++passed;
        else if (first.empty()) first = fmt("instance %zu %s m=%zu N0=%zu", i, to_string(meth).c_str(), m, n);
      } catch (const std::exception& e) {
        if (first.empty()) first = e.what();
      }
    }
  }
  return {passed == checks, fmt("%zu/%zu runs (300 instances x 2 methods) satisfy all clauses", passed, checks) +
                                (first.empty() ? "" : "; first failure: " + first)};
}

Outcome deterministic_bound() {
  const auto grid = contract_grid();
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < 300; ++i) {
    const auto [m, n] = grid[i % grid.size()];
    const auto inst = gaussian_instance(m, n, derive_seed(1002, i));
    const int B = 1 + static_cast<int>(i % 6);
    const auto nq = quantize_neuron(inst.Xt, inst.w, B, i % 2 ? Method::accelerated : Method::baseline);
    const double gamma_upper = oracle::spectral_norm(inst.Xt);
    const double bound = gamma_upper * std::sqrt(static_cast<double>(m)) * norm_inf(inst.w) / ((1 << B) - 1);
    const double measured = norm2(subtract(matvec(inst.Xt, inst.w), matvec(inst.Xt, nq.q)));
    if (measured <= bound) ++ok;
    worst = std::max(worst, measured / bound);
  }
  return {ok == 300, fmt("%zu/300 instances within bound, max measured/bound = %.4f", ok, worst)};
}

Outcome hand_trace() {
  const DenseMatrix Xt{{1.0, 1.0, 1.0}};
  const DenseVector w{0.1, 0.2, 0.3};
  const auto nq = quantize_neuron(Xt, w, 1, Method::baseline);
  const DenseVector w_hat_ref{0.3, 0.0, 0.3}, q_ref{0.3, 0.3, 0.3};
  double dev = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    dev = std::max(dev, std::abs(nq.preprocess.w_hat[i] - w_hat_ref[i]));
    dev = std::max(dev, std::abs(nq.q[i] - q_ref[i]));
  }
  const double err = std::abs(dot(Xt.row(0), subtract(w, nq.q)));
  dev = std::max(dev, std::abs(err - 0.3));
  return {dev <= 1e-12, fmt("w_hat=(%.17g, %.17g, %.17g) q=(%g, %g, %g) error=%.17g, max deviation %.3g",
                            nq.preprocess.w_hat[0], nq.preprocess.w_hat[1], nq.preprocess.w_hat[2], nq.q[0],
                            nq.q[1], nq.q[2], err, dev)};
}

Outcome linf_route() {
  std::size_t ok = 0, total = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const std::size_t n0 = i % 2 ? 24 : 12;
    const DenseMatrix Xt = gaussian_matrix(3, n0, derive_seed(1004, i));
    const DenseVector w = gaussian_vector(n0, derive_seed(1005, i));
    const auto s = linf_minimize(Xt, w);
    ++total;
    if (s.saturated_count >= n0 - 3 + 1 && s.value <= norm_inf(w)) ++ok;
  }
  // Small instances against exhaustive vertex enumeration.
  std::size_t enum_ok = 0, enum_total = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const std::size_t n0 = 4 + i % 5;  // 4..8
    const DenseMatrix Xt = gaussian_matrix(3, n0, derive_seed(1006, i));
    const DenseVector w = gaussian_vector(n0, derive_seed(1007, i));
    const auto s = linf_minimize(Xt, w);
    const auto ref = oracle::linf_by_enumeration(Xt, matvec(Xt, w));
    ++enum_total;
    const double d = std::abs(s.value - ref.value);
    worst = std::max(worst, d);
    if (d <= 1e-8) ++enum_ok;
  }
  return {ok == total && enum_ok == enum_total,
          fmt("saturation+dominance %zu/%zu; vertex-enumeration match %zu/%zu (N0 in 4..8), max gap %.2e", ok,
              total, enum_ok, enum_total, worst)};
}

Outcome layer_second_variation() {
  std::size_t ok = 0;
  std::size_t redraws = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    const DenseMatrix Xt = gaussian_matrix(3, 12, derive_seed(1008, i));
    const DenseMatrix W = gaussian_matrix(12, 4, derive_seed(1009, i));
    const auto lr = layer_linf_preprocess(Xt, W, derive_seed(1010, i));
    bool good = true;
    for (std::size_t j = 0; j < 4; ++j) {
      std::size_t at_cap = 0;
      for (double v : lr.W_hat.col(j))
        if (std::abs(v) == lr.c_hat) ++at_cap;
      good = good && at_cap >= 12 - 3 && norm_inf(lr.W_hat.col(j)) == lr.c_hat;
      redraws += lr.redraws[j];
    }
    if (good) ++ok;
  }
  // N0 <= 8: the auxiliary ℓ∞ program on [Xt; a^T] and the box program by enumeration.
  std::size_t sub_ok = 0, sub_total = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const DenseMatrix Xt = gaussian_matrix(3, 8, derive_seed(1011, i));
    const DenseMatrix W = gaussian_matrix(8, 4, derive_seed(1012, i));
    const auto lr = layer_linf_preprocess(Xt, W, derive_seed(1013, i));
    for (std::size_t j = 0; j < 4; ++j) {
      ++sub_total;
      const DenseVector wj = lr.W_hat.col(j);
      const auto& a = lr.tie_breakers[j];
      DenseMatrix aug(4, 8);
      for (std::size_t c = 0; c < 8; ++c) {
        for (std::size_t r = 0; r < 3; ++r) aug(r, c) = Xt(r, c);
        aug(3, c) = a[c];
      }
      const auto aux = oracle::linf_by_enumeration(aug, matvec(aug, wj));
      const auto box = oracle::box_lp_by_enumeration(Xt, matvec(Xt, W.col(j)), lr.c_hat, a);
      const double d1 = std::abs(aux.value - lr.c_hat);
      const double d2 = box ? std::abs(*box - dot(a, wj)) : 1.0;
      worst = std::max({worst, d1, d2});
      if (d1 <= 1e-8 && d2 <= 1e-8) ++sub_ok;
    }
  }
  return {ok == 50 && sub_ok == sub_total,
          fmt("%zu/50 layers with every column >= N0-m entries at C_hat (%zu redraws); oracle match %zu/%zu "
              "columns at N0=8, max gap %.2e",
              ok, redraws, sub_ok, sub_total, worst)};
}

Outcome bit_decay() {
  const int seeds = 50;
  std::vector<std::vector<double>> err(7, std::vector<double>(seeds));
  for (int s = 0; s < seeds; ++s) {
    const auto inst = gaussian_instance(8, 512, derive_seed(1014, s));
    // One pre-processing, re-quantized at every budget.
    const auto pre = preprocess_accelerated(inst.Xt, inst.w, norm_inf(inst.w));
    for (int B = 1; B <= 6; ++B) {
      const auto q = msq(pre.w_hat, build_uniform_bbit(B, norm_inf(inst.w)));
      err[B][s] = norm2(subtract(matvec(inst.Xt, inst.w), matvec(inst.Xt, q)));
    }
  }
  bool pass = true;
  std::string d;
  for (int B = 1; B <= 5; ++B) {
    double mean_ratio = 0.0;
    for (int s = 0; s < seeds; ++s) mean_ratio += err[B + 1][s] / err[B][s];
    mean_ratio /= seeds;
    pass = pass && mean_ratio <= 0.75;
    d += fmt("%sB%d->%d %.3f", B == 1 ? "" : ", ", B, B + 1, mean_ratio);
  }
  return {pass, "mean error ratios " + d + " (limit 0.75)"};
}

Outcome dimension_decay() {
  const std::vector<std::size_t> n0s{128, 256, 512, 1024, 2048};
  const int seeds = 30;
  std::vector<double> mean(n0s.size(), 0.0);
  for (std::size_t k = 0; k < n0s.size(); ++k) {
    for (int s = 0; s < seeds; ++s) {
      const auto inst = gaussian_instance(16, n0s[k], derive_seed(1015, s * 16 + k));
      const auto nq = quantize_neuron(inst.Xt, inst.w, 3, Method::accelerated);
      mean[k] += nq.error / norm2(matvec(inst.Xt, inst.w));
    }
    mean[k] /= seeds;
  }
  bool decreasing = true;
  for (std::size_t k = 1; k < mean.size(); ++k) decreasing = decreasing && mean[k] < mean[k - 1];
  const double measured = mean.back() / mean.front();
  const double predicted = std::sqrt((128.0 * std::log(2048.0)) / (2048.0 * std::log(128.0)));
  const bool within = std::abs(measured - predicted) <= 0.4 * predicted;
  return {decreasing && within,
          fmt("mean rel err %.4g %.4g %.4g %.4g %.4g; ratio 2048/128 = %.4f vs predicted %.4f (band %.4f..%.4f)",
              mean[0], mean[1], mean[2], mean[3], mean[4], measured, predicted, 0.6 * predicted, 1.4 * predicted)};
}

Outcome layer_bound() {
  std::size_t ok = 0, total = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const DenseMatrix Xt = gaussian_matrix(8, 256, derive_seed(1016, i));
    const DenseMatrix W = uniform_matrix(256, 16, -1.0, 1.0, derive_seed(1017, i));
    const double gamma_upper = oracle::spectral_norm(Xt);
    for (int B : {2, 4}) {
      const auto lq = quantize_layer(Xt, W, B, i % 2 ? Method::accelerated : Method::baseline);
      const double measured = frobenius(subtract(matmul(Xt, W), matmul(Xt, lq.Q)));
      const double bound = gamma_upper * std::sqrt(16.0 * 8.0) * lq.c_shared / ((1 << B) - 1);
      ++total;
      if (measured <= bound) ++ok;
      worst = std::max(worst, measured / bound);
    }
  }
  return {ok == total, fmt("%zu/%zu (100 instances x B in {2,4}) within Frobenius bound, max ratio %.4f", ok, total,
                           worst)};
}

Outcome generalization() {
  double sum2 = 0.0, sum5 = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto inst = gaussian_instance(8, 1024, derive_seed(1018, s));
    const auto pre = preprocess_accelerated(inst.Xt, inst.w, norm_inf(inst.w));
    const auto q2 = msq(pre.w_hat, build_uniform_bbit(2, norm_inf(inst.w)));
    const auto q5 = msq(pre.w_hat, build_uniform_bbit(5, norm_inf(inst.w)));
    sum2 += generalization_check(inst.Xt, inst.w, q2, 50, derive_seed(1019, s)).mean_ratio;
    sum5 += generalization_check(inst.Xt, inst.w, q5, 50, derive_seed(1019, s)).mean_ratio;
  }
  const double m2 = sum2 / 20, m5 = sum5 / 20;
  return {std::isfinite(m2) && m5 <= 0.5 * m2,
          fmt("mean ratio B=2 %.4g, B=5 %.4g, quotient %.4f (limit 0.5)", m2, m5, m5 / m2)};
}

Outcome complexity_scaling() {
  struct Config {
    std::size_t m, n;
    Method method;
    Instance inst;
    int batch = 1;
    std::vector<double> samples;
  };
  std::vector<Config> cfgs;
  for (std::size_t n : {512u, 1024u, 2048u, 4096u, 8192u}) cfgs.push_back({16, n, Method::accelerated, {}});
  for (std::size_t m : {8u, 16u, 32u, 64u})
    for (Method meth : {Method::accelerated, Method::baseline}) cfgs.push_back({m, 4096, meth, {}});
  auto call = [](const Config& k) { (void)preprocess(k.inst.Xt, k.inst.w, norm_inf(k.inst.w), k.method); };
  for (auto& k : cfgs) {
    k.inst = gaussian_instance(k.m, k.n, derive_seed(1020, k.m * 100000 + k.n));
    // Warm-up call sizes the batch so one sample lasts >= 20 ms.
    const double probe = std::max(median_ms(1, [&] { call(k); }), 1e-3);
    k.batch = std::max(1, static_cast<int>(std::ceil(20.0 / probe)));
  }
  // Reps run round-robin over all configurations so slow periods of the
  // machine hit every size alike.
  for (int rep = 0; rep < 7; ++rep)
    for (auto& k : cfgs)
      k.samples.push_back(median_ms(1, [&] {
                            for (int i = 0; i < k.batch; ++i) call(k);
                          }) /
                          k.batch);
  std::vector<ScalingPoint> vs_n, acc_m, base_m;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    auto& k = cfgs[i];
    std::sort(k.samples.begin(), k.samples.end());
    const double med = k.samples[k.samples.size() / 2];
    if (i < 5) vs_n.push_back({double(k.n), med});
    else if (k.method == Method::accelerated) acc_m.push_back({double(k.m), med});
    else base_m.push_back({double(k.m), med});
  }
  const auto fn = fit_scaling(std::span<const ScalingPoint>(vs_n), ScalingAxis::runtime_n);
  const auto fa = fit_scaling(std::span<const ScalingPoint>(acc_m), ScalingAxis::runtime_m);
  const auto fb = fit_scaling(std::span<const ScalingPoint>(base_m), ScalingAxis::runtime_m);
  const bool pass = fn.slope >= 0.8 && fn.slope <= 1.3 && fa.slope >= 1.6 && fa.slope <= 2.6 && fb.slope >= fa.slope;
  return {pass, fmt("accelerated vs n slope %.3f (R2 %.3f, want 0.8..1.3); accelerated vs m %.3f (want 1.6..2.6); "
                    "baseline vs m %.3f (want >= accelerated)",
                    fn.slope, fn.r_squared, fa.slope, fb.slope)};
}

Outcome quantizer_suite() {
  std::size_t ok = 0, total = 0;
  auto check = [&](bool c) {
    ++total;
    if (c) ++ok;
  };
  std::size_t exact_ties = 0;
  CounterRng rng(1021);
  for (int B = 1; B <= 8; ++B) {
    for (double c : {1.0, 0.3, 2.75}) {
      const auto a = build_uniform_bbit(B, c);
      check(worst_case_distortion(a).worst_case == c / ((1 << B) - 1));
      check(msq(c, a) == c && msq(-c, a) == -c);
      for (double p : a.elements()) check(msq(p, a) == p);
      const auto& e = a.elements();
      for (std::size_t i = 0; i + 1 < e.size(); ++i) {
        const double mid = 0.5 * (e[i] + e[i + 1]);
        check(msq(mid, a) == oracle::nearest_of_two(mid, e[i], e[i + 1]));
        if (2 * oracle::fixed80(mid) == oracle::fixed80(e[i]) + oracle::fixed80(e[i + 1])) ++exact_ties;
        // one ulp either side of the midpoint
        for (double z : {std::nextafter(mid, e[i]), std::nextafter(mid, e[i + 1])})
          check(msq(z, a) == oracle::nearest_of_two(z, e[i], e[i + 1]));
      }
      std::vector<double> z(200);
      for (double& v : z) v = rng.uniform(-1.5 * c, 1.5 * c);
      std::sort(z.begin(), z.end());
      bool mono = true;
      for (std::size_t i = 1; i < z.size(); ++i) mono = mono && msq(z[i - 1], a) <= msq(z[i], a);
      check(mono);
    }
  }
  check(msq(0.0, build_uniform_bbit(1, 0.3)) == 0.3);
  return {ok == total, fmt("%zu/%zu exact assertions (distortion, saturation, idempotence, ties, monotonicity); "
                           "%zu exact midpoint ties",
                           ok, total, exact_ties)};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "satq_acceptance";
  fs::create_directories(dir);
  ExperimentConfig c;
  c.kind = ExperimentKind::layer;
  c.m = 4;
  c.N0 = 64;
  c.N1 = 4;
  c.bits = {2, 3};
  c.methods = {Method::baseline, Method::accelerated, Method::linf};
  c.seeds = {1, 2, 3, 4};
  c.master_seed = 2024;
  auto run = [&](const std::string& name, std::size_t workers) {
    c.out = (dir / name).string();
    run_sweep(c, workers);
    auto slurp = [](const fs::path& p) {
      std::ifstream f(p);
      std::stringstream s;
      s << f.rdbuf();
      return s.str();
    };
    std::string json = slurp(dir / (name + ".json"));
    // The config echo carries the output path; blank it before comparing.
    auto j = nlohmann::json::parse(json);
    j["config"]["out"] = "";
    return std::make_pair(slurp(dir / (name + ".csv")), j.dump());
  };
  const auto a = run("run_a", 1), b = run("run_b", 1), w4 = run("run_w4", 4);
  const bool pass = a == b && a == w4;
  return {pass, fmt("csv %zu bytes; identical across runs: %s, across workers 1/4: %s", a.first.size(),
                    a == b ? "yes" : "no", a == w4 ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const std::vector<Criterion> criteria{
      {1, "preprocess contract", preprocess_contract},
      {2, "deterministic error bound", deterministic_bound},
      {3, "hand trace", hand_trace},
      {4, "linf route saturation and optimality", linf_route},
      {5, "layer tie-breaking stage", layer_second_variation},
      {6, "bit decay", bit_decay},
      {7, "dimension decay", dimension_decay},
      {8, "layer Frobenius bound", layer_bound},
      {9, "generalization decay", generalization},
      {10, "complexity scaling", complexity_scaling},
      {11, "quantizer unit suite", quantizer_suite},
      {12, "sweep determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %2d %-38s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
