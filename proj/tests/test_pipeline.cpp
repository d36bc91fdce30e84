#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "satq/analysis.hpp"
#include "satq/pipeline.hpp"
#include "satq/rng.hpp"

using namespace satq;

TEST(QuantizeNeuron, HandTrace) {
  const DenseMatrix Xt{{1, 1, 1}};
  const auto nq = quantize_neuron(Xt, DenseVector{0.1, 0.2, 0.3}, 1, Method::baseline);
  EXPECT_NEAR(nq.preprocess.w_hat[0], 0.3, 1e-12);
  EXPECT_NEAR(nq.preprocess.w_hat[1], 0.0, 1e-12);
  EXPECT_NEAR(nq.preprocess.w_hat[2], 0.3, 1e-12);
  EXPECT_EQ(nq.alphabet.elements(), (std::vector<double>{-0.3, 0.3}));
  EXPECT_EQ(nq.q, (DenseVector{0.3, 0.3, 0.3}));
  EXPECT_NEAR(nq.error, 0.3, 1e-12);
  EXPECT_NEAR(oracle::gamma(Xt), 1.0, 1e-15);
}

TEST(QuantizeNeuron, SaturatedNeuronIsExact) {
  const DenseMatrix Xt = gaussian_matrix(2, 6, 3);
  const DenseVector w{0.5, -0.5, 0.5, 0.5, -0.5, -0.5};
  for (Method m : {Method::baseline, Method::accelerated}) {
    const auto nq = quantize_neuron(Xt, w, 2, m);
    EXPECT_EQ(nq.q, w);
    EXPECT_EQ(nq.error, 0.0);
  }
}

TEST(QuantizeNeuron, SaturatedEntriesQuantizeWithoutError) {
  const DenseMatrix Xt = gaussian_matrix(4, 64, 5);
  const DenseVector w = uniform_vector(64, -1, 1, 6);
  for (Method m : {Method::baseline, Method::accelerated, Method::linf}) {
    const auto nq = quantize_neuron(Xt, w, 3, m);
    for (std::size_t i : nq.preprocess.saturated) EXPECT_EQ(nq.q[i], nq.preprocess.w_hat[i]);
    for (double v : nq.q) EXPECT_TRUE(nq.alphabet.contains(v));
  }
}

TEST(QuantizeNeuron, ErrorDecaysWithBits) {
  const DenseMatrix Xt = gaussian_matrix(4, 64, 7);
  const DenseVector w = uniform_vector(64, -1, 1, 8);
  double prev = std::numeric_limits<double>::infinity();
  for (int B = 1; B <= 6; ++B) {
    const auto nq = quantize_neuron(Xt, w, B, Method::baseline);
    EXPECT_LT(nq.error, prev);
    prev = nq.error;
  }
}

TEST(QuantizeNeuron, DeterministicBound) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const DenseMatrix Xt = gaussian_matrix(4, 64, derive_seed(9, s));
    const DenseVector w = uniform_vector(64, -1, 1, derive_seed(10, s));
    const int B = 1 + static_cast<int>(s % 5);
    const auto nq = quantize_neuron(Xt, w, B, s % 2 ? Method::accelerated : Method::baseline);
    const double bound = oracle::spectral_norm(Xt) * 2.0 * worst_case_distortion(nq.alphabet).worst_case;
    EXPECT_LE(nq.error, bound);
  }
}

TEST(QuantizeNeuron, Validation) {
  const DenseMatrix Xt = gaussian_matrix(2, 6, 1);
  EXPECT_THROW(quantize_neuron(Xt, DenseVector(6, 0.0), 2, Method::baseline), Error);
  EXPECT_THROW(quantize_neuron(Xt, DenseVector(5, 1.0), 2, Method::baseline), Error);
  EXPECT_THROW(quantize_neuron(Xt, DenseVector(6, 1.0), 0, Method::baseline), Error);
}

TEST(QuantizeNeuron, EveryMethodWithinItsOwnBound) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const DenseMatrix Xt = gaussian_matrix(4, 48, derive_seed(12, s));
    const DenseVector w = uniform_vector(48, -1, 1, derive_seed(13, s));
    const double gamma_upper = oracle::spectral_norm(Xt);
    for (Method meth : {Method::baseline, Method::accelerated, Method::linf}) {
      const auto nq = quantize_neuron(Xt, w, 3, meth);
      const double cap = nq.alphabet.elements().back();
      EXPECT_LE(cap, norm_inf(w));
      EXPECT_LE(nq.error, gamma_upper * 2.0 * cap / 7.0) << to_string(meth);
    }
  }
}

TEST(QuantizeLayer, SingleColumnReducesToNeuron) {
  const DenseMatrix Xt = gaussian_matrix(3, 20, 14);
  const DenseVector w = uniform_vector(20, -1, 1, 15);
  const auto lq = quantize_layer(Xt, DenseMatrix(20, 1, w), 3, Method::baseline);
  const auto nq = quantize_neuron(Xt, w, 3, Method::baseline);
  EXPECT_EQ(lq.Q.col(0), nq.q);
  EXPECT_EQ(lq.c_shared, norm_inf(w));
}

TEST(QuantizeLayer, AlreadyQuantizedIsFixedPoint) {
  const DenseMatrix Xt = gaussian_matrix(3, 16, 16);
  DenseMatrix W(16, 4);
  CounterRng rng(17);
  for (double& v : W.data()) v = rng.uniform() < 0.5 ? -0.7 : 0.7;
  for (Method m : {Method::baseline, Method::accelerated}) {
    const auto lq = quantize_layer(Xt, W, 2, m);
    EXPECT_EQ(lq.Q, W);
  }
}

TEST(QuantizeLayer, SharedCapAndAlphabetMembership) {
  const DenseMatrix Xt = gaussian_matrix(4, 40, 18);
  const DenseMatrix W = uniform_matrix(40, 6, -1, 1, 19);
  const auto lq = quantize_layer(Xt, W, 3, Method::accelerated);
  EXPECT_EQ(lq.c_shared, max_abs(W));
  EXPECT_EQ(lq.alphabet.scale(), lq.c_shared);
  for (double v : lq.Q.data()) EXPECT_TRUE(lq.alphabet.contains(v));
  for (const auto& n : lq.per_neuron) {
    EXPECT_GE(n.saturated_count, 36u);
    EXPECT_LE(n.data_residual, 1e-8 * (1 + frobenius(matmul(Xt, W))));
  }
}

TEST(QuantizeLayer, FrobeniusBoundHundredSeeds) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const DenseMatrix Xt = gaussian_matrix(8, 256, derive_seed(20, s));
    const DenseMatrix W = uniform_matrix(256, 8, -1, 1, derive_seed(21, s));
    const auto lq = quantize_layer(Xt, W, 3, Method::accelerated);
    const double measured = frobenius(subtract(matmul(Xt, W), matmul(Xt, lq.Q)));
    const double bound = oracle::spectral_norm(Xt) * std::sqrt(8.0 * 8.0) * lq.c_shared / 7.0;
    EXPECT_LE(measured, bound) << "seed " << s;
  }
}

TEST(QuantizeLayer, LinfMethodSaturates) {
  const DenseMatrix Xt = gaussian_matrix(3, 12, 22);
  const DenseMatrix W = gaussian_matrix(12, 4, 23);
  QuantizeOptions opt;
  opt.seed = 5;
  const auto lq = quantize_layer(Xt, W, 2, Method::linf, opt);
  EXPECT_LE(lq.c_shared, max_abs(W));
  for (const auto& n : lq.per_neuron) EXPECT_GE(n.saturated_count, 9u);
}

TEST(QuantizeLayer, WorkersDoNotChangeResult) {
  const DenseMatrix Xt = gaussian_matrix(4, 64, 24);
  const DenseMatrix W = uniform_matrix(64, 9, -1, 1, 25);
  QuantizeOptions one, four;
  four.workers = 4;
  for (Method m : {Method::baseline, Method::accelerated, Method::linf})
    EXPECT_EQ(quantize_layer(Xt, W, 3, m, one).Q, quantize_layer(Xt, W, 3, m, four).Q);
}

TEST(Activation, IdentityAndRelu) {
  const DenseMatrix M{{-1, 2}, {0.5, -0.25}};
  EXPECT_EQ(apply_activation("identity", M), M);
  EXPECT_EQ(apply_activation("relu", DenseMatrix{{-1, 2}}), (DenseMatrix{{0, 2}}));
  EXPECT_THROW(apply_activation("tanh", M), Error);
  try {
    activation_from_string("gelu");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_activation);
  }
}

TEST(Activation, ReluIsOneLipschitz) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const DenseMatrix a = gaussian_matrix(1, 30, derive_seed(26, s));
    const DenseMatrix b = gaussian_matrix(1, 30, derive_seed(27, s));
    EXPECT_LE(frobenius(subtract(apply_activation(Activation::relu, a), apply_activation(Activation::relu, b))),
              frobenius(subtract(a, b)));
  }
}

TEST(Network, OneLayerMatchesLayer) {
  const DenseMatrix Xt = gaussian_matrix(3, 24, 28);
  NetworkSpec net;
  net.layers.push_back({uniform_matrix(24, 6, -1, 1, 29), std::nullopt, Activation::relu});
  const auto nq = quantize_network(net, Xt, 3, Method::baseline, Propagation::propagated);
  const auto lq = quantize_layer(Xt, net.layers[0].W, 3, Method::baseline);
  ASSERT_EQ(nq.layers.size(), 1u);
  EXPECT_EQ(nq.layers[0].Q, lq.Q);
}

TEST(Network, OrthogonalFirstLayerAnalytic) {
  // Identity activations and an orthogonal first layer: layer 2 in analytic
  // mode sees the transformed data Xt W1, so its error matches a direct run.
  const std::size_t n0 = 16;
  DenseMatrix G = gaussian_matrix(n0, n0, 30);
  // Orthonormalize columns.
  for (std::size_t j = 0; j < n0; ++j) {
    DenseVector v = G.col(j);
    for (std::size_t k = 0; k < j; ++k) {
      const DenseVector q = G.col(k);
      const double p = dot(q, v);
      for (std::size_t r = 0; r < n0; ++r) v[r] -= p * q[r];
    }
    const double nv = norm2(v);
    for (double& x : v) x /= nv;
    G.set_col(j, v);
  }
  const DenseMatrix Xt = gaussian_matrix(3, n0, 31);
  NetworkSpec net;
  net.layers.push_back({G, std::nullopt, Activation::identity});
  net.layers.push_back({uniform_matrix(n0, 5, -1, 1, 32), std::nullopt, Activation::identity});
  const auto nq = quantize_network(net, Xt, 3, Method::baseline, Propagation::analytic);
  const DenseMatrix H = matmul(Xt, G);
  const auto direct = quantize_layer(H, net.layers[1].W, 3, Method::baseline);
  EXPECT_EQ(nq.layers[1].Q, direct.Q);
  const double rel_direct = frobenius(subtract(matmul(H, net.layers[1].W), matmul(H, direct.Q))) /
                            frobenius(matmul(H, net.layers[1].W));
  const double rel_net = frobenius(subtract(matmul(H, net.layers[1].W), matmul(H, nq.layers[1].Q))) /
                         frobenius(matmul(H, net.layers[1].W));
  EXPECT_NEAR(rel_net, rel_direct, 1e-12);
}

TEST(Network, ReluBothModesSmoke) {
  const DenseMatrix Xt = gaussian_matrix(4, 32, 33);
  NetworkSpec net;
  net.layers.push_back({uniform_matrix(32, 24, -1, 1, 34), DenseVector(24, 0.1), Activation::relu});
  net.layers.push_back({uniform_matrix(24, 8, -1, 1, 35), std::nullopt, Activation::identity});
  for (Propagation p : {Propagation::analytic, Propagation::propagated}) {
    const auto nq = quantize_network(net, Xt, 4, Method::accelerated, p);
    ASSERT_EQ(nq.layers.size(), 2u);
    EXPECT_TRUE(std::isfinite(nq.output_rel_error));
    EXPECT_GE(nq.output_rel_error, 0.0);
    EXPECT_TRUE(nq.quantized.layers[0].bias.has_value());
    for (const auto& lq : nq.layers)
      for (double v : lq.Q.data()) EXPECT_TRUE(lq.alphabet.contains(v));
  }
}

TEST(Network, DegenerateActivationsFallBackToBaseline) {
  // relu of an all-negative first layer output has rank 0.
  const DenseMatrix Xt = uniform_matrix(3, 12, 0.1, 1.0, 36);
  NetworkSpec net;
  net.layers.push_back({DenseMatrix(12, 10, -1.0), std::nullopt, Activation::relu});
  net.layers.push_back({uniform_matrix(10, 4, -1, 1, 37), std::nullopt, Activation::identity});
  const auto nq = quantize_network(net, Xt, 2, Method::accelerated, Propagation::analytic);
  EXPECT_FALSE(nq.degenerate_activations[0]);
  EXPECT_TRUE(nq.degenerate_activations[1]);
  EXPECT_EQ(nq.layers[1].method, Method::baseline);
}

TEST(Network, DimensionChainChecked) {
  NetworkSpec net;
  net.layers.push_back({DenseMatrix(10, 6), std::nullopt, Activation::relu});
  net.layers.push_back({DenseMatrix(5, 2), std::nullopt, Activation::relu});
  EXPECT_THROW(forward(net, DenseMatrix(2, 10)), Error);
}
