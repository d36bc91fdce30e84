#pragma once

// Command-line front end. cli_dispatch is the whole program; tools/satq.cpp
// only forwards argv.
//
// Exit codes: 0 success, 1 contract or bound violation (or a numerical
// failure inside the library), 2 usage error or unusable input.

#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "satq/analysis.hpp"
#include "satq/harness.hpp"
#include "satq/invariants.hpp"
#include "satq/linf.hpp"
#include "satq/pipeline.hpp"
#include "satq/preprocess.hpp"

namespace satq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

struct CommonFlags {
  std::uint64_t seed = 0;
  std::string method = "baseline";
  int bits = 3;
  std::string out;
};

struct DataFlags {
  std::string data;
  std::string distribution = "gaussian";
  std::size_t m = 4;
  std::size_t n0 = 64;
};

inline void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--seed", f.seed, "Seed for generated data and random draws");
  sub->add_option("--method", f.method, "Pre-processing method")
      ->check(CLI::IsMember({"baseline", "accelerated", "linf"}));
  sub->add_option("--bits", f.bits, "Bit budget B (alphabet has 2^B levels)")->check(CLI::Range(1, 52));
  sub->add_option("--out", f.out, "Output path");
}

inline void add_data(CLI::App* sub, DataFlags& d) {
  sub->add_option("--data", d.data, "CSV file holding X^T (m x N0, one sample per row)");
  sub->add_option("--distribution", d.distribution, "Generated data when --data is absent")
      ->check(CLI::IsMember({"gaussian", "frame_concat"}));
  sub->add_option("--m", d.m, "Samples to generate");
  sub->add_option("--n0", d.n0, "Input dimension to generate");
}

inline DenseMatrix load_data(const DataFlags& d, std::uint64_t seed) {
  if (!d.data.empty()) return read_matrix_csv(d.data);
  return gen_data(distribution_from_string(d.distribution), d.m, d.n0, derive_seed(seed, 0));
}

inline DenseMatrix load_weights(const std::string& path, std::size_t n0, std::size_t n1, std::uint64_t seed) {
  if (!path.empty()) return read_matrix_csv(path);
  return gen_weights(n0, n1, derive_seed(seed, 1));
}

inline bool is_usage_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::io_error:
    case ErrorCode::parse_error:
    case ErrorCode::invalid_parameter:
    case ErrorCode::invalid_dims:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::unknown_activation:
    case ErrorCode::cap_too_small:
    case ErrorCode::too_large:
      return true;
    default:
      return false;
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io_error, "cannot open '" + path + "' for writing");
  f << text;
}

inline std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto dot = path.rfind('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

inline void print_contract(const ContractReport& rep, std::ostream& out) {
  for (const auto& c : rep.clauses)
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": measured " << format_double(c.measured) << ", limit "
        << format_double(c.limit) << '\n';
}

}  // namespace detail

inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-training quantization by saturating pre-processing and memoryless scalar quantization", "satq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  detail::CommonFlags common;
  detail::DataFlags data;

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Pre-process one neuron and print its contract report");
  detail::add_common(pre, common);
  detail::add_data(pre, data);
  std::string pre_weights;
  std::size_t pre_column = 0;
  std::optional<double> pre_cap;
  pre->add_option("--weights", pre_weights, "CSV file with the neuron (N0 x 1) or a layer (N0 x N1)");
  pre->add_option("--column", pre_column, "Column of --weights to use");
  pre->add_option("--cap", pre_cap, "Cap c >= max|w_i| (default max|w_i|)");

  // quantize
  auto* quant = app.add_subcommand("quantize", "Quantize a neuron, a layer or a network");
  detail::add_common(quant, common);
  detail::add_data(quant, data);
  std::string q_mode = "layer";
  std::vector<std::string> q_weights;
  std::vector<std::string> q_activations;
  std::string q_propagation = "propagated";
  std::size_t q_n1 = 4;
  std::size_t q_workers = 1;
  quant->add_option("--mode", q_mode, "What to quantize")->check(CLI::IsMember({"neuron", "layer", "network"}));
  quant->add_option("--weights", q_weights, "Weight CSV files (one per layer in network mode)");
  quant->add_option("--activation", q_activations, "Per-layer activation in network mode")
      ->check(CLI::IsMember({"identity", "relu"}));
  quant->add_option("--propagation", q_propagation, "Network layer inputs")
      ->check(CLI::IsMember({"analytic", "propagated"}));
  quant->add_option("--n1", q_n1, "Neurons to generate when --weights is absent");
  quant->add_option("--workers", q_workers, "Worker threads")->check(CLI::PositiveNumber);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a declarative experiment sweep");
  detail::add_common(sweep, common);
  std::string sw_config;
  std::optional<std::size_t> sw_workers;
  sweep->add_option("--config", sw_config, "Experiment config (JSON)")->required();
  sweep->add_option("--workers", sw_workers, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);

  // gamma
  auto* gam = app.add_subcommand("gamma", "Estimate the data complexity parameter of a data matrix");
  detail::add_common(gam, common);
  detail::add_data(gam, data);
  std::size_t g_samples = 1000;
  gam->add_option("--samples", g_samples, "Random m-subsets for the lower estimate")->check(CLI::PositiveNumber);

  // check
  auto* chk = app.add_subcommand("check", "Run the invariant suite");
  detail::add_common(chk, common);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* shown = &app;
    for (const auto* s : app.get_subcommands()) shown = s;
    err << shown->help();
    return kExitUsage;
  }

  try {
    if (pre->parsed()) {
      const DenseMatrix A = detail::load_data(data, common.seed);
      const DenseMatrix W = detail::load_weights(pre_weights, A.cols(), 1, common.seed);
      if (pre_column >= W.cols()) throw Error(ErrorCode::invalid_parameter, "--column out of range");
      const DenseVector w = W.col(pre_column);
      const Method method = method_from_string(common.method);
      PreprocessResult res;
      double c = pre_cap.value_or(norm_inf(w));
      if (method == Method::linf) {
        const auto s = linf_minimize(A, w);
        c = s.value;
        res = detail::linf_as_preprocess(A, w, s);
      } else {
        res = preprocess(A, w, c, method);
      }
      const auto rep = verify_preprocess_contract(A, w, res.w_hat, c, A.rows());
      out << "method: " << to_string(res.method) << "\nm: " << A.rows() << "\nN0: " << A.cols()
          << "\ncap: " << format_double(c) << "\nsaturated: " << res.saturated.size()
          << "\niterations: " << res.iterations << "\nrefactorizations: " << res.refactorizations
          << "\nfell_back: " << (res.fell_back ? "yes" : "no") << '\n';
      detail::print_contract(rep, out);
      if (!common.out.empty())
        write_matrix_csv(common.out, DenseMatrix(res.w_hat.size(), 1, res.w_hat));
      return rep.passed() ? kExitOk : kExitViolation;
    }

    if (quant->parsed()) {
      const DenseMatrix Xt = detail::load_data(data, common.seed);
      const Method method = method_from_string(common.method);
      QuantizeOptions qopt;
      qopt.workers = q_workers;
      qopt.seed = derive_seed(common.seed, 2);
      BoundOptions bopt;
      bopt.enforce = false;
      bopt.seed = common.seed;
      nlohmann::json report;
      bool violated = false;
      if (q_mode == "network") {
        NetworkSpec net;
        std::size_t in = Xt.cols();
        const std::size_t depth = q_weights.empty() ? 2 : q_weights.size();
        for (std::size_t l = 0; l < depth; ++l) {
          LayerSpec L;
          L.W = q_weights.empty() ? gen_weights(in, q_n1, derive_seed(common.seed, 10 + l))
                                  : read_matrix_csv(q_weights[l]);
          if (!q_activations.empty())
            L.activation = activation_from_string(q_activations[std::min(l, q_activations.size() - 1)]);
          in = L.W.cols();
          net.layers.push_back(std::move(L));
        }
        const Propagation prop = q_propagation == "analytic" ? Propagation::analytic : Propagation::propagated;
        const auto nq = quantize_network(net, Xt, common.bits, method, prop, qopt);
        report["mode"] = "network";
        report["propagation"] = to_string(prop);
        report["output_abs_error"] = nq.output_abs_error;
        report["output_rel_error"] = nq.output_rel_error;
        report["layers"] = nlohmann::json::array();
        for (std::size_t l = 0; l < nq.layers.size(); ++l) {
          const auto& lq = nq.layers[l];
          report["layers"].push_back({{"c_shared", lq.c_shared},
                                      {"alphabet", to_json(lq.alphabet)},
                                      {"degenerate_activations", static_cast<bool>(nq.degenerate_activations[l])}});
          if (!common.out.empty())
            write_matrix_csv(detail::with_suffix(common.out, "_layer" + std::to_string(l)), lq.Q);
        }
      } else {
        const DenseMatrix W = q_weights.empty()
                                  ? detail::load_weights("", Xt.cols(), q_mode == "neuron" ? 1 : q_n1, common.seed)
                                  : read_matrix_csv(q_weights.front());
        DenseMatrix Q;
        ErrorReport rep;
        if (q_mode == "neuron") {
          if (W.cols() != 1) throw Error(ErrorCode::invalid_parameter, "neuron mode needs an N0 x 1 weight file");
          const DenseVector w = W.col(0);
          const auto nq = quantize_neuron(Xt, w, common.bits, method);
          Q = DenseMatrix(nq.q.size(), 1, nq.q);
          rep = evaluate_bounds(Xt, w, nq.q, nq.alphabet, bopt);
          report["alphabet"] = to_json(nq.alphabet);
          report["saturated"] = nq.preprocess.saturated.size();
          report["iterations"] = nq.preprocess.iterations;
        } else {
          const auto lq = quantize_layer(Xt, W, common.bits, method, qopt);
          Q = lq.Q;
          rep = evaluate_bounds(Xt, W, lq.Q, lq.alphabet, bopt);
          report["alphabet"] = to_json(lq.alphabet);
          report["c_shared"] = lq.c_shared;
        }
        report["mode"] = q_mode;
        report["method"] = common.method;
        report["errors"] = to_json(rep);
        const double slack = 1e-10 * (1.0 + frobenius(matmul(Xt, W)));
        violated = rep.absolute > rep.bound_deterministic + slack;
        report["bound_holds"] = !violated;
        if (!common.out.empty()) write_matrix_csv(common.out, Q);
      }
      out << report.dump(2) << '\n';
      if (violated) err << "error: measured error exceeds the deterministic bound\n";
      return violated ? kExitViolation : kExitOk;
    }

    if (sweep->parsed()) {
      ExperimentConfig cfg = load_config(sw_config);
      if (sweep->count("--seed")) cfg.master_seed = common.seed;
      if (!common.out.empty()) cfg.out = common.out;
      const auto rep = run_sweep(cfg, sw_workers);
      std::size_t failed = 0, violated = 0;
      for (const auto& r : rep.rows) {
        if (r.status != "ok") ++failed;
        if (r.status == "BoundViolated") ++violated;
      }
      out << "rows: " << rep.rows.size() << "\nfailed: " << failed << '\n';
      if (!cfg.out.empty()) {
        const auto [csv, json] = detail::report_paths(cfg.out);
        out << "csv: " << csv << "\njson: " << json << '\n';
      }
      return violated ? kExitViolation : kExitOk;
    }

    if (gam->parsed()) {
      const DenseMatrix Xt = detail::load_data(data, common.seed);
      const auto g = gamma_bounds(Xt, g_samples, derive_seed(common.seed, 3));
      nlohmann::json j = to_json(g);
      j["m"] = Xt.rows();
      j["N0"] = Xt.cols();
      const std::string text = j.dump(2) + "\n";
      out << text;
      if (!common.out.empty()) detail::write_text(common.out, text);
      return kExitOk;
    }

    if (chk->parsed()) {
      const auto rep = run_invariant_suite(common.seed);
      print(rep, out);
      return rep.ok() ? kExitOk : kExitViolation;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return detail::is_usage_error(e.code()) ? kExitUsage : kExitViolation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitViolation;
  }
  return kExitUsage;
}

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(args, out, err);
}

}  // namespace satq
