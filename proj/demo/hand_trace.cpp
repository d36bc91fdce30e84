// The three-weight, one-sample instance worked step by step.

#include <cstdio>

#include "satq/satq.hpp"

int main() {
  using namespace satq;
  const DenseMatrix Xt{{1.0, 1.0, 1.0}};
  const DenseVector w{0.1, 0.2, 0.3};

  const auto nq = quantize_neuron(Xt, w, 1, Method::baseline);
  std::printf("w_hat = (%g, %g, %g) after %zu step(s)\n", nq.preprocess.w_hat[0], nq.preprocess.w_hat[1],
              nq.preprocess.w_hat[2], nq.preprocess.iterations);
  std::printf("q     = (%g, %g, %g)\n", nq.q[0], nq.q[1], nq.q[2]);
  std::printf("|Xt w - Xt q| = %g\n", nq.error);
}
