#pragma once

// Pre-process, then round with a shared-scale B-bit alphabet: neurons,
// layers and feed-forward networks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "satq/dense.hpp"
#include "satq/error.hpp"
#include "satq/linf.hpp"
#include "satq/parallel.hpp"
#include "satq/preprocess.hpp"
#include "satq/quantizer.hpp"

namespace satq {

struct QuantizeOptions {
  std::size_t workers = 1;
  std::uint64_t seed = 0;  // tie-breaking draws of the linf route
};

struct NeuronQuantization {
  DenseVector q;
  PreprocessResult preprocess;
  Alphabet alphabet;
  double error = 0.0;  // ‖Xt w - Xt q‖_2
};

namespace detail {

inline PreprocessResult linf_as_preprocess(const DenseMatrix& Xt, std::span<const double> w,
                                           const LinfSolution& s) {
  PreprocessResult r;
  r.method = Method::linf;
  r.w_hat = s.z_star;
  r.iterations = s.iterations;
  for (std::size_t i = 0; i < s.z_star.size(); ++i)
    if (std::abs(s.z_star[i]) == s.value) r.saturated.push_back(i);
  r.data_residual = norm2(subtract(matvec(Xt, r.w_hat), matvec(Xt, w)));
  return r;
}

}  // namespace detail

/// Single neuron: the cap is ĉ = ‖w‖_∞ for the kernel walks, and the optimal
/// max-norm for the linf route.
inline NeuronQuantization quantize_neuron(const DenseMatrix& Xt, std::span<const double> w, int B, Method method) {
  if (w.size() != Xt.cols()) throw Error(ErrorCode::dimension_mismatch, "neuron length != data columns");
  if (Xt.cols() <= Xt.rows()) throw Error(ErrorCode::dimension_mismatch, "quantization needs N0 > m");
  const double c = norm_inf(w);
  if (c == 0.0) throw Error(ErrorCode::invalid_parameter, "zero neuron");
  if (B < 1) throw Error(ErrorCode::invalid_parameter, "bit budget must be >= 1");

  NeuronQuantization out;
  double scale = c;
  if (method == Method::linf) {
    const auto s = linf_minimize(Xt, w);
    if (s.value > 0.0) {
      scale = s.value;
      out.preprocess = detail::linf_as_preprocess(Xt, w, s);
    } else {
      // Xt w = 0: the minimizer is the zero vector, which no alphabet holds.
      out.preprocess = preprocess_baseline(Xt, w, c);
      out.preprocess.method = Method::linf;
    }
  } else {
    out.preprocess = preprocess(Xt, w, c, method);
  }
  out.alphabet = build_uniform_bbit(B, scale);
  out.q = msq(out.preprocess.w_hat, out.alphabet);
  out.error = norm2(subtract(matvec(Xt, w), matvec(Xt, out.q)));
  return out;
}

struct NeuronRecord {
  std::size_t saturated_count = 0;
  double data_residual = 0.0;
  double quantization_error = 0.0;
  std::size_t iterations = 0;
};

struct LayerQuantizationResult {
  DenseMatrix Q;      // N0 x N1, alphabet entries
  DenseMatrix W_hat;  // pre-processed weights
  double c_shared = 0.0;
  std::vector<NeuronRecord> per_neuron;
  Alphabet alphabet;
  Method method = Method::baseline;
};

/// Layer: shared cap Ĉ = ‖W‖_∞ (or the stage-1 linf cap), columns
/// pre-processed independently, then one alphabet for the whole matrix.
inline LayerQuantizationResult quantize_layer(const DenseMatrix& Xt, const DenseMatrix& W, int B, Method method,
                                              const QuantizeOptions& opt = {}) {
  const std::size_t n0 = Xt.cols(), n1 = W.cols();
  if (W.rows() != n0) throw Error(ErrorCode::dimension_mismatch, "W rows != data columns");
  if (n0 <= Xt.rows()) throw Error(ErrorCode::dimension_mismatch, "quantization needs N0 > m");
  if (B < 1) throw Error(ErrorCode::invalid_parameter, "bit budget must be >= 1");

  LayerQuantizationResult res;
  res.method = method;
  res.W_hat = DenseMatrix(n0, n1);
  res.per_neuron.resize(n1);
  if (method == Method::linf) {
    auto lr = layer_linf_preprocess(Xt, W, opt.seed, opt.workers);
    if (lr.c_hat == 0.0) throw Error(ErrorCode::invalid_parameter, "Xt W = 0: nothing to quantize");
    res.c_shared = lr.c_hat;
    res.W_hat = std::move(lr.W_hat);
    for (std::size_t j = 0; j < n1; ++j) {
      res.per_neuron[j].saturated_count = lr.columns[j].saturated_count;
      res.per_neuron[j].iterations = lr.stage1[j].iterations + lr.columns[j].iterations;
    }
  } else {
    res.c_shared = max_abs(W);
    if (res.c_shared == 0.0) throw Error(ErrorCode::invalid_parameter, "zero weight matrix");
    std::vector<PreprocessResult> cols(n1);
    parallel_for(n1, opt.workers, [&](std::size_t j) {
      cols[j] = preprocess(Xt, W.col(j), res.c_shared, method);
    });
    for (std::size_t j = 0; j < n1; ++j) {
      res.W_hat.set_col(j, cols[j].w_hat);
      res.per_neuron[j].saturated_count = cols[j].saturated.size();
      res.per_neuron[j].iterations = cols[j].iterations;
    }
  }
  res.alphabet = build_uniform_bbit(B, res.c_shared);
  res.Q = msq(res.W_hat, res.alphabet);
  const DenseMatrix XW = matmul(Xt, W);
  const DenseMatrix XWhat = matmul(Xt, res.W_hat);
  const DenseMatrix XQ = matmul(Xt, res.Q);
  for (std::size_t j = 0; j < n1; ++j) {
    double resid = 0.0, err = 0.0;
    for (std::size_t r = 0; r < Xt.rows(); ++r) {
      resid += (XWhat(r, j) - XW(r, j)) * (XWhat(r, j) - XW(r, j));
      err += (XQ(r, j) - XW(r, j)) * (XQ(r, j) - XW(r, j));
    }
    res.per_neuron[j].data_residual = std::sqrt(resid);
    res.per_neuron[j].quantization_error = std::sqrt(err);
  }
  return res;
}

// ---- networks -------------------------------------------------------------

enum class Activation { identity, relu };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity" || s == "linear") return Activation::identity;
  if (s == "relu") return Activation::relu;
  throw Error(ErrorCode::unknown_activation, "'" + s + "'");
}

inline DenseMatrix apply_activation(Activation tag, DenseMatrix M) {
  switch (tag) {
    case Activation::identity: return M;
    case Activation::relu:
      for (double& v : M.data()) v = std::max(v, 0.0);
      return M;
  }
  throw Error(ErrorCode::unknown_activation, "unsupported activation tag");
}

inline DenseMatrix apply_activation(const std::string& tag, DenseMatrix M) {
  return apply_activation(activation_from_string(tag), std::move(M));
}

/// One affine layer z -> W^T z + b followed by an activation. W is N_in x N_out.
struct LayerSpec {
  DenseMatrix W;
  std::optional<DenseVector> bias;
  Activation activation = Activation::relu;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  void validate(std::size_t input_dim) const {
    std::size_t dim = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      if (L.W.rows() != dim)
        throw Error(ErrorCode::dimension_mismatch, "layer " + std::to_string(l) + " expects input " +
                                                       std::to_string(L.W.rows()) + ", got " + std::to_string(dim));
      if (L.bias && L.bias->size() != L.W.cols())
        throw Error(ErrorCode::dimension_mismatch, "bias length of layer " + std::to_string(l));
      dim = L.W.cols();
    }
  }
};

namespace detail {

/// Bias folded in as an extra weight row acting on a constant-1 input.
inline DenseMatrix augmented_weights(const LayerSpec& L) {
  if (!L.bias) return L.W;
  DenseMatrix Wa(L.W.rows() + 1, L.W.cols());
  for (std::size_t r = 0; r < L.W.rows(); ++r)
    std::copy(L.W.row(r).begin(), L.W.row(r).end(), Wa.row(r).begin());
  std::copy(L.bias->begin(), L.bias->end(), Wa.row(L.W.rows()).begin());
  return Wa;
}

inline DenseMatrix augmented_data(const DenseMatrix& Xt, bool with_bias) {
  if (!with_bias) return Xt;
  DenseMatrix Xa(Xt.rows(), Xt.cols() + 1);
  for (std::size_t r = 0; r < Xt.rows(); ++r) {
    std::copy(Xt.row(r).begin(), Xt.row(r).end(), Xa.row(r).begin());
    Xa(r, Xt.cols()) = 1.0;
  }
  return Xa;
}

}  // namespace detail

/// Samples are rows of Xt (m x N0). Returns the m x N_L output.
inline DenseMatrix forward(const NetworkSpec& net, const DenseMatrix& Xt) {
  net.validate(Xt.cols());
  DenseMatrix H = Xt;
  for (const auto& L : net.layers)
    H = apply_activation(L.activation, matmul(detail::augmented_data(H, L.bias.has_value()), detail::augmented_weights(L)));
  return H;
}

enum class Propagation { analytic, propagated };

inline std::string to_string(Propagation p) { return p == Propagation::analytic ? "analytic" : "propagated"; }

struct NetworkQuantization {
  std::vector<LayerQuantizationResult> layers;  // Q includes the bias row when present
  std::vector<bool> degenerate_activations;
  NetworkSpec quantized;
  double output_abs_error = 0.0;  // ‖Φ(X) - Φ_q(X)‖_F
  double output_rel_error = 0.0;
};

/// Quantizes layer by layer. Layer l is fit against the activations feeding
/// it: from the original network (analytic) or from the already quantized
/// prefix (propagated). A layer whose input activations have rank < m is
/// flagged and quantized with the baseline walk.
inline NetworkQuantization quantize_network(const NetworkSpec& net, const DenseMatrix& Xt, int B, Method method,
                                            Propagation propagation, const QuantizeOptions& opt = {}) {
  net.validate(Xt.cols());
  const std::size_t m = Xt.rows();
  NetworkQuantization out;
  out.quantized = net;
  DenseMatrix H_orig = Xt, H_quant = Xt;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& L = net.layers[l];
    const bool has_bias = L.bias.has_value();
    const DenseMatrix& H_in = propagation == Propagation::analytic ? H_orig : H_quant;
    const DenseMatrix data = detail::augmented_data(H_in, has_bias);
    if (data.cols() <= m)
      throw Error(ErrorCode::dimension_mismatch, "layer " + std::to_string(l) + " is not wider than m");
    const bool degenerate = numerical_rank(data) < m;
    out.degenerate_activations.push_back(degenerate);
    auto lq = quantize_layer(data, detail::augmented_weights(L), B, degenerate ? Method::baseline : method, opt);

    auto& Lq = out.quantized.layers[l];
    for (std::size_t r = 0; r < L.W.rows(); ++r)
      std::copy(lq.Q.row(r).begin(), lq.Q.row(r).end(), Lq.W.row(r).begin());
    if (has_bias) {
      auto last = lq.Q.row(L.W.rows());
      Lq.bias = DenseVector(last.begin(), last.end());
    }
    H_orig = apply_activation(L.activation, matmul(detail::augmented_data(H_orig, has_bias), detail::augmented_weights(L)));
    H_quant = apply_activation(L.activation, matmul(detail::augmented_data(H_quant, has_bias), lq.Q));
    out.layers.push_back(std::move(lq));
  }
  out.output_abs_error = frobenius(subtract(H_orig, H_quant));
  const double ref = frobenius(H_orig);
  out.output_rel_error = ref > 0.0 ? out.output_abs_error / ref : 0.0;
  return out;
}

}  // namespace satq
