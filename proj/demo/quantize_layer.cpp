// Quantizes one random layer with each method and prints error against bound.

#include <cstdio>

#include "satq/satq.hpp"

int main() {
  using namespace satq;
  const std::size_t m = 8, n0 = 256, n1 = 16;
  const DenseMatrix Xt = gaussian_matrix(m, n0, derive_seed(1, 0));
  const DenseMatrix W = uniform_matrix(n0, n1, -1.0, 1.0, derive_seed(1, 1));

  for (Method method : {Method::baseline, Method::accelerated, Method::linf}) {
    for (int B : {2, 4}) {
      QuantizeOptions opt;
      opt.seed = 7;
      const auto lq = quantize_layer(Xt, W, B, method, opt);
      const auto rep = evaluate_bounds(Xt, W, lq.Q, lq.alphabet);
      std::printf("%-12s B=%d  c=%.4f  rel=%.5f  abs=%.5f  bound=%.5f\n", to_string(method).c_str(), B,
                  lq.c_shared, rep.relative, rep.absolute, rep.bound_deterministic);
    }
  }
}
