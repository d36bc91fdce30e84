#pragma once

// Experiment plumbing: data generation, CSV matrix files, declarative sweeps
// and their CSV/JSON reports.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "satq/analysis.hpp"
#include "satq/dense.hpp"
#include "satq/error.hpp"
#include "satq/parallel.hpp"
#include "satq/pipeline.hpp"
#include "satq/rng.hpp"

namespace satq {

inline constexpr const char* kVersion = "satq 1.0.0";

// ---- data generation ------------------------------------------------------

enum class Distribution { gaussian, frame_concat, file };

inline std::string to_string(Distribution d) {
  switch (d) {
    case Distribution::gaussian: return "gaussian";
    case Distribution::frame_concat: return "frame_concat";
    case Distribution::file: return "file";
  }
  return "gaussian";
}

inline Distribution distribution_from_string(const std::string& s) {
  if (s == "gaussian") return Distribution::gaussian;
  if (s == "frame_concat") return Distribution::frame_concat;
  if (s == "file") return Distribution::file;
  throw Error(ErrorCode::invalid_parameter, "unknown distribution '" + s + "'");
}

/// Orthogonal m x m factor of a Gaussian block (modified Gram-Schmidt).
inline DenseMatrix random_orthogonal(std::size_t m, std::uint64_t seed) {
  DenseMatrix G = gaussian_matrix(m, m, seed);
  for (std::size_t j = 0; j < m; ++j) {
    DenseVector v = G.col(j);
    for (std::size_t k = 0; k < j; ++k) {
      const DenseVector q = G.col(k);
      const double proj = dot(q, v);
      for (std::size_t r = 0; r < m; ++r) v[r] -= proj * q[r];
    }
    const double nv = norm2(v);
    if (nv == 0.0) throw Error(ErrorCode::singular_matrix, "degenerate Gaussian block");
    for (double& x : v) x /= nv;
    G.set_col(j, v);
  }
  return G;
}

/// Data matrix Xt (m x N0, one sample per row).
/// gaussian: i.i.d. N(0, 1). frame_concat: N0/m random orthonormal bases side by side.
inline DenseMatrix gen_data(Distribution dist, std::size_t m, std::size_t n0, std::uint64_t seed) {
  if (m == 0 || n0 <= m) throw Error(ErrorCode::invalid_dims, "need 0 < m < N0");
  switch (dist) {
    case Distribution::gaussian: return gaussian_matrix(m, n0, seed);
    case Distribution::frame_concat: {
      if (n0 % m != 0) throw Error(ErrorCode::invalid_dims, "frame_concat needs m | N0");
      DenseMatrix Xt(m, n0);
      for (std::size_t blk = 0; blk < n0 / m; ++blk) {
        const DenseMatrix Q = random_orthogonal(m, derive_seed(seed, blk));
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < m; ++c) Xt(r, blk * m + c) = Q(r, c);
      }
      return Xt;
    }
    case Distribution::file: break;
  }
  throw Error(ErrorCode::invalid_dims, "file data must be read with read_matrix_csv");
}

/// Weights W (N0 x N1), entries uniform on [-1, 1].
inline DenseMatrix gen_weights(std::size_t n0, std::size_t n1, std::uint64_t seed) {
  return uniform_matrix(n0, n1, -1.0, 1.0, seed);
}

// ---- CSV ------------------------------------------------------------------

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One matrix row per line, comma separated, preceded by "# rows cols".
inline void write_matrix_csv(const std::string& path, const DenseMatrix& M) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io_error, "cannot open '" + path + "' for writing");
  f << "# " << M.rows() << ' ' << M.cols() << '\n';
  for (std::size_t r = 0; r < M.rows(); ++r) {
    for (std::size_t c = 0; c < M.cols(); ++c) {
      if (c) f << ',';
      f << format_double(M(r, c));
    }
    f << '\n';
  }
  if (!f) throw Error(ErrorCode::io_error, "write to '" + path + "' failed");
}

inline DenseMatrix parse_matrix_csv(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::pair<std::size_t, std::size_t>> header;
  std::vector<double> data;
  std::size_t cols = 0, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[0] == '#') {
      if (rows > 0 || header)
        throw Error(ErrorCode::parse_error, name + ":" + std::to_string(lineno) + ":1: header must be the first line");
      std::istringstream hs(line.substr(1));
      std::size_t hr = 0, hc = 0;
      if (!(hs >> hr >> hc))
        throw Error(ErrorCode::parse_error, name + ":" + std::to_string(lineno) + ":1: malformed '# rows cols' header");
      header = {hr, hc};
      continue;
    }
    std::size_t fields = 0;
    std::size_t pos = 0;
    while (true) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      std::size_t b = pos, e = end;
      while (b < e && (line[b] == ' ' || line[b] == '\t')) ++b;
      while (e > b && (line[e - 1] == ' ' || line[e - 1] == '\t')) --e;
      double v = 0.0;
      const char* first = line.data() + b;
      const char* last = line.data() + e;
      if (b < e && *first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (b == e || ec != std::errc() || ptr != last || !std::isfinite(v))
        throw Error(ErrorCode::parse_error, name + ":" + std::to_string(lineno) + ":" + std::to_string(b + 1) +
                                                ": invalid number '" + line.substr(b, e - b) + "'");
      data.push_back(v);
      ++fields;
      if (end == line.size()) break;
      pos = end + 1;
    }
    if (rows == 0) {
      cols = fields;
    } else if (fields != cols) {
      throw Error(ErrorCode::parse_error, name + ":" + std::to_string(lineno) + ":1: row " + std::to_string(rows + 1) +
                                              " has " + std::to_string(fields) + " fields, expected " +
                                              std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::parse_error, name + ": no data rows");
  if (header && (header->first != rows || header->second != cols))
    throw Error(ErrorCode::parse_error, name + ": header declares " + std::to_string(header->first) + "x" +
                                            std::to_string(header->second) + " but data is " + std::to_string(rows) +
                                            "x" + std::to_string(cols));
  return DenseMatrix(rows, cols, std::move(data));
}

inline DenseMatrix read_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
  return parse_matrix_csv(f, path);
}

// ---- experiment configuration -----------------------------------------------

enum class ExperimentKind { neuron, layer, network, gamma, scaling };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::neuron: return "neuron";
    case ExperimentKind::layer: return "layer";
    case ExperimentKind::network: return "network";
    case ExperimentKind::gamma: return "gamma";
    case ExperimentKind::scaling: return "scaling";
  }
  return "neuron";
}

inline ExperimentKind kind_from_string(const std::string& s) {
  if (s == "neuron") return ExperimentKind::neuron;
  if (s == "layer") return ExperimentKind::layer;
  if (s == "network") return ExperimentKind::network;
  if (s == "gamma") return ExperimentKind::gamma;
  if (s == "scaling") return ExperimentKind::scaling;
  throw Error(ErrorCode::invalid_parameter, "unknown experiment kind '" + s + "'");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::neuron;
  Distribution distribution = Distribution::gaussian;
  std::size_t m = 4;
  std::size_t N0 = 64;
  std::size_t N1 = 1;
  std::vector<int> bits{3};
  std::vector<Method> methods{Method::baseline};
  std::vector<std::uint64_t> seeds{0};
  std::string out;
  // Optional dimension sweeps; when non-empty they replace m / N0.
  std::vector<std::size_t> m_values;
  std::vector<std::size_t> N0_values;
  std::string data_path;     // distribution = file
  std::string weights_path;  // optional, overrides generated weights
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  std::optional<bool> timing;  // default: on for scaling only
  std::size_t timing_reps = 3;
  std::size_t gamma_samples = 1000;
  std::size_t network_depth = 2;
  Activation activation = Activation::relu;
  Propagation propagation = Propagation::propagated;

  bool timing_enabled() const { return timing.value_or(kind == ExperimentKind::scaling); }

  void validate() const {
    for (std::size_t mv : m_values.empty() ? std::vector<std::size_t>{m} : m_values)
      for (std::size_t nv : N0_values.empty() ? std::vector<std::size_t>{N0} : N0_values)
        if (mv == 0 || nv <= mv) throw Error(ErrorCode::invalid_dims, "need 0 < m < N0");
    if (N1 == 0) throw Error(ErrorCode::invalid_dims, "N1 must be positive");
    if (bits.empty() || methods.empty() || seeds.empty())
      throw Error(ErrorCode::invalid_parameter, "bits, methods and seeds must be non-empty");
    for (int b : bits)
      if (b < 1) throw Error(ErrorCode::invalid_parameter, "bits must be >= 1");
    if (timing_reps < 3) throw Error(ErrorCode::invalid_parameter, "timing_reps must be >= 3");
    if (distribution == Distribution::file && data_path.empty())
      throw Error(ErrorCode::invalid_parameter, "distribution 'file' needs data_path");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["kind"] = to_string(c.kind);
  j["distribution"] = to_string(c.distribution);
  j["m"] = c.m;
  j["N0"] = c.N0;
  j["N1"] = c.N1;
  j["bits"] = c.bits;
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["seeds"] = c.seeds;
  j["out"] = c.out;
  if (!c.m_values.empty()) j["m_values"] = c.m_values;
  if (!c.N0_values.empty()) j["N0_values"] = c.N0_values;
  if (!c.data_path.empty()) j["data_path"] = c.data_path;
  if (!c.weights_path.empty()) j["weights_path"] = c.weights_path;
  j["master_seed"] = c.master_seed;
  j["timing"] = c.timing_enabled();
  j["timing_reps"] = c.timing_reps;
  j["gamma_samples"] = c.gamma_samples;
  j["network_depth"] = c.network_depth;
  j["activation"] = to_string(c.activation);
  j["propagation"] = to_string(c.propagation);
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.kind = kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("distribution")) c.distribution = distribution_from_string(j["distribution"].get<std::string>());
    if (j.contains("m")) c.m = j["m"].get<std::size_t>();
    if (j.contains("N0")) c.N0 = j["N0"].get<std::size_t>();
    if (j.contains("N1")) c.N1 = j["N1"].get<std::size_t>();
    if (j.contains("bits")) c.bits = j["bits"].get<std::vector<int>>();
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& s : j["methods"]) c.methods.push_back(method_from_string(s.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("m_values")) c.m_values = j["m_values"].get<std::vector<std::size_t>>();
    if (j.contains("N0_values")) c.N0_values = j["N0_values"].get<std::vector<std::size_t>>();
    if (j.contains("data_path")) c.data_path = j["data_path"].get<std::string>();
    if (j.contains("weights_path")) c.weights_path = j["weights_path"].get<std::string>();
    if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
    if (j.contains("timing")) c.timing = j["timing"].get<bool>();
    if (j.contains("timing_reps")) c.timing_reps = j["timing_reps"].get<std::size_t>();
    if (j.contains("gamma_samples")) c.gamma_samples = j["gamma_samples"].get<std::size_t>();
    if (j.contains("network_depth")) c.network_depth = j["network_depth"].get<std::size_t>();
    if (j.contains("activation")) c.activation = activation_from_string(j["activation"].get<std::string>());
    if (j.contains("propagation")) {
      const auto p = j["propagation"].get<std::string>();
      if (p == "analytic") c.propagation = Propagation::analytic;
      else if (p == "propagated") c.propagation = Propagation::propagated;
      else throw Error(ErrorCode::invalid_parameter, "unknown propagation '" + p + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io_error, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
  return config_from_json(j);
}

// ---- sweeps -----------------------------------------------------------------

struct SweepRow {
  std::string kind;
  std::string method;
  int B = 0;
  std::size_t m = 0, N0 = 0, N1 = 0;
  std::uint64_t seed = 0;
  double abs_err = std::nan("");
  double rel_err = std::nan("");
  double bound_det = std::nan("");
  double bound_gauss = std::nan("");
  std::size_t sat_count = 0;
  std::size_t iters = 0;
  double ms = 0.0;
  std::optional<double> gamma_lower, gamma_exact, gamma_upper;
  std::string status = "ok";
};

inline const char* kSweepCsvHeader =
    "kind,method,B,m,N0,N1,seed,abs_err,rel_err,bound_det,bound_gauss,sat_count,iters,ms,"
    "gamma_lower,gamma_exact,gamma_upper,status";

inline std::string to_csv(const SweepRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream s;
  s << r.kind << ',' << r.method << ',' << r.B << ',' << r.m << ',' << r.N0 << ',' << r.N1 << ',' << r.seed << ','
    << format_double(r.abs_err) << ',' << format_double(r.rel_err) << ',' << format_double(r.bound_det) << ','
    << format_double(r.bound_gauss) << ',' << r.sat_count << ',' << r.iters << ',' << format_double(r.ms) << ','
    << opt(r.gamma_lower) << ',' << opt(r.gamma_exact) << ',' << opt(r.gamma_upper) << ',' << r.status;
  return s.str();
}

inline nlohmann::json to_json(const SweepRow& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"kind", r.kind},          {"method", r.method},         {"B", r.B},
          {"m", r.m},                {"N0", r.N0},                 {"N1", r.N1},
          {"seed", r.seed},          {"abs_err", num(r.abs_err)},  {"rel_err", num(r.rel_err)},
          {"bound_det", num(r.bound_det)}, {"bound_gauss", num(r.bound_gauss)},
          {"sat_count", r.sat_count}, {"iters", r.iters},          {"ms", r.ms},
          {"gamma_lower", opt(r.gamma_lower)}, {"gamma_exact", opt(r.gamma_exact)},
          {"gamma_upper", opt(r.gamma_upper)}, {"status", r.status}};
}

inline nlohmann::json to_json(const Alphabet& a) {
  return {{"kind", to_string(a.kind())}, {"K", a.levels()}, {"c", a.scale()}, {"elements", a.elements()}};
}

inline nlohmann::json to_json(const ErrorReport& r) {
  return {{"absolute", r.absolute},
          {"relative", r.relative},
          {"bound_deterministic", r.bound_deterministic},
          {"bound_gaussian", r.bound_gaussian},
          {"distortion", r.distortion},
          {"gamma_upper", r.gamma_upper},
          {"gamma_exact", r.gamma_exact ? nlohmann::json(*r.gamma_exact) : nlohmann::json(nullptr)},
          {"gamma_used", r.gamma_used},
          {"B", r.B},
          {"m", r.m},
          {"N0", r.N0},
          {"N1", r.N1},
          {"seed", r.seed}};
}

inline nlohmann::json to_json(const GammaEstimate& g) {
  return {{"exact", g.exact ? nlohmann::json(*g.exact) : nlohmann::json(nullptr)},
          {"upper", g.upper},
          {"monte_carlo_lower", g.monte_carlo_lower},
          {"samples", g.samples}};
}

struct SweepReport {
  ExperimentConfig config;
  std::vector<SweepRow> rows;
  std::string version = kVersion;

  nlohmann::json to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) rows_json.push_back(satq::to_json(r));
    return {{"config", satq::to_json(config)}, {"version", version}, {"master_seed", config.master_seed},
            {"rows", rows_json}};
  }
};

struct SweepCell {
  std::size_t m = 0, N0 = 0;
  std::uint64_t seed = 0;
  int B = 0;
  Method method = Method::baseline;
};

/// Cells in report order: dimensions, then seed, then bits, then method. The
/// gamma kind ignores bits and methods (one row per dimension and seed).
inline std::vector<SweepCell> enumerate_cells(const ExperimentConfig& c) {
  std::vector<SweepCell> cells;
  const auto ms = c.m_values.empty() ? std::vector<std::size_t>{c.m} : c.m_values;
  const auto ns = c.N0_values.empty() ? std::vector<std::size_t>{c.N0} : c.N0_values;
  for (std::size_t m : ms)
    for (std::size_t n0 : ns)
      for (std::uint64_t s : c.seeds) {
        if (c.kind == ExperimentKind::gamma) {
          cells.push_back({m, n0, s, 0, Method::baseline});
          continue;
        }
        for (int B : c.bits)
          for (Method meth : c.methods) cells.push_back({m, n0, s, B, meth});
      }
  return cells;
}

namespace detail {

template <class Fn>
double median_ms(std::size_t reps, Fn&& fn) {
  std::vector<double> t;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    t.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

inline DenseMatrix cell_data(const ExperimentConfig& c, const SweepCell& cell) {
  if (c.distribution == Distribution::file) return read_matrix_csv(c.data_path);
  return gen_data(c.distribution, cell.m, cell.N0, derive_seed(derive_seed(c.master_seed, cell.seed), 0));
}

inline DenseMatrix cell_weights(const ExperimentConfig& c, const SweepCell& cell, std::size_t n0, std::size_t n1) {
  if (!c.weights_path.empty()) return read_matrix_csv(c.weights_path);
  return gen_weights(n0, n1, derive_seed(derive_seed(c.master_seed, cell.seed), 1));
}

inline SweepRow run_cell(const ExperimentConfig& c, const SweepCell& cell) {
  SweepRow row;
  row.kind = to_string(c.kind);
  row.method = c.kind == ExperimentKind::gamma ? "-" : to_string(cell.method);
  row.B = cell.B;
  row.m = cell.m;
  row.N0 = cell.N0;
  row.N1 = c.kind == ExperimentKind::neuron || c.kind == ExperimentKind::scaling ? 1 : c.N1;
  row.seed = cell.seed;
  const std::uint64_t cell_seed = derive_seed(c.master_seed, cell.seed);
  try {
    const DenseMatrix Xt = cell_data(c, cell);
    row.m = Xt.rows();
    row.N0 = Xt.cols();
    BoundOptions bopt;
    bopt.enforce = false;
    bopt.seed = cell.seed;
    switch (c.kind) {
      case ExperimentKind::neuron:
      case ExperimentKind::scaling: {
        const DenseMatrix W = cell_weights(c, cell, Xt.cols(), 1);
        const DenseVector w = W.col(0);
        const auto nq = quantize_neuron(Xt, w, cell.B, cell.method);
        const auto rep = evaluate_bounds(Xt, w, nq.q, nq.alphabet, bopt);
        row.abs_err = rep.absolute;
        row.rel_err = rep.relative;
        row.bound_det = rep.bound_deterministic;
        row.bound_gauss = rep.bound_gaussian;
        row.sat_count = nq.preprocess.saturated.size();
        row.iters = nq.preprocess.iterations;
        if (c.timing_enabled()) {
          if (cell.method == Method::linf) {
            row.ms = median_ms(c.timing_reps, [&] { (void)linf_minimize(Xt, w); });
          } else {
            const double cap = norm_inf(w);
            row.ms = median_ms(c.timing_reps, [&] { (void)preprocess(Xt, w, cap, cell.method); });
          }
        }
        if (rep.absolute > rep.bound_deterministic + 1e-10 * (1.0 + norm2(matvec(Xt, w))))
          row.status = "BoundViolated";
        break;
      }
      case ExperimentKind::layer: {
        const DenseMatrix W = cell_weights(c, cell, Xt.cols(), c.N1);
        QuantizeOptions qopt;
        qopt.seed = cell_seed;
        const auto lq = quantize_layer(Xt, W, cell.B, cell.method, qopt);
        row.N1 = W.cols();
        const auto rep = evaluate_bounds(Xt, W, lq.Q, lq.alphabet, bopt);
        row.abs_err = rep.absolute;
        row.rel_err = rep.relative;
        row.bound_det = rep.bound_deterministic;
        row.bound_gauss = rep.bound_gaussian;
        for (const auto& n : lq.per_neuron) {
          row.sat_count += n.saturated_count;
          row.iters += n.iterations;
        }
        if (c.timing_enabled())
          row.ms = median_ms(c.timing_reps, [&] { (void)quantize_layer(Xt, W, cell.B, cell.method, qopt); });
        if (rep.absolute > rep.bound_deterministic + 1e-10 * (1.0 + frobenius(matmul(Xt, W))))
          row.status = "BoundViolated";
        break;
      }
      case ExperimentKind::network: {
        NetworkSpec net;
        std::size_t in = Xt.cols();
        for (std::size_t l = 0; l < std::max<std::size_t>(c.network_depth, 1); ++l) {
          net.layers.push_back({gen_weights(in, c.N1, derive_seed(cell_seed, 10 + l)), std::nullopt, c.activation});
          in = c.N1;
        }
        QuantizeOptions qopt;
        qopt.seed = cell_seed;
        const auto nq = quantize_network(net, Xt, cell.B, cell.method, c.propagation, qopt);
        row.abs_err = nq.output_abs_error;
        row.rel_err = nq.output_rel_error;
        for (const auto& lq : nq.layers)
          for (const auto& n : lq.per_neuron) {
            row.sat_count += n.saturated_count;
            row.iters += n.iterations;
          }
        if (c.timing_enabled())
          row.ms = median_ms(c.timing_reps,
                             [&] { (void)quantize_network(net, Xt, cell.B, cell.method, c.propagation, qopt); });
        break;
      }
      case ExperimentKind::gamma: {
        const auto g = gamma_bounds(Xt, c.gamma_samples, cell_seed);
        row.gamma_lower = g.monte_carlo_lower;
        row.gamma_exact = g.exact;
        row.gamma_upper = g.upper;
        break;
      }
    }
  } catch (const Error& e) {
    row.status = std::string(to_string(e.code()));
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  return row;
}

inline std::pair<std::string, std::string> report_paths(const std::string& out) {
  std::string stem = out;
  for (const char* ext : {".csv", ".json"}) {
    const std::string e(ext);
    if (stem.size() > e.size() && stem.compare(stem.size() - e.size(), e.size(), e) == 0)
      stem.resize(stem.size() - e.size());
  }
  return {stem + ".csv", stem + ".json"};
}

}  // namespace detail

/// Runs every cell of the sweep on `workers` threads. Rows come back in cell
/// order and, when `config.out` is set, are appended to the CSV report as soon
/// as every earlier row is done; the JSON report is written at the end. A cell
/// that fails yields a row whose status names the error.
inline SweepReport run_sweep(const ExperimentConfig& config, std::optional<std::size_t> workers = std::nullopt) {
  config.validate();
  const auto cells = enumerate_cells(config);
  SweepReport report;
  report.config = config;
  std::vector<std::optional<SweepRow>> slots(cells.size());

  std::ofstream csv;
  std::string json_path;
  if (!config.out.empty()) {
    const auto [csv_path, jp] = detail::report_paths(config.out);
    json_path = jp;
    csv.open(csv_path);
    if (!csv) throw Error(ErrorCode::io_error, "cannot open '" + csv_path + "' for writing");
    csv << kSweepCsvHeader << '\n';
  }

  std::mutex mu;
  std::condition_variable cv;
  std::exception_ptr failure;
  std::thread runner([&] {
    try {
      parallel_for(cells.size(), workers.value_or(config.workers), [&](std::size_t i) {
        SweepRow row = detail::run_cell(config, cells[i]);
        std::lock_guard lock(mu);
        slots[i] = std::move(row);
        cv.notify_all();
      });
    } catch (...) {
      std::lock_guard lock(mu);
      failure = std::current_exception();
      cv.notify_all();
    }
  });
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return slots[i].has_value() || failure; });
    if (!slots[i]) break;
    report.rows.push_back(*slots[i]);
    lock.unlock();
    if (csv.is_open()) csv << to_csv(report.rows.back()) << '\n' << std::flush;
  }
  runner.join();
  if (failure) std::rethrow_exception(failure);

  if (!json_path.empty()) {
    std::ofstream jf(json_path);
    if (!jf) throw Error(ErrorCode::io_error, "cannot open '" + json_path + "' for writing");
    jf << report.to_json().dump(2) << '\n';
  }
  return report;
}

/// Scaling-fit input drawn from sweep rows.
inline std::vector<ScalingPoint> scaling_points(const std::vector<SweepRow>& rows, ScalingAxis axis) {
  std::vector<ScalingPoint> pts;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    switch (axis) {
      case ScalingAxis::bits: pts.push_back({static_cast<double>(r.B), r.abs_err}); break;
      case ScalingAxis::n0: pts.push_back({static_cast<double>(r.N0), r.rel_err}); break;
      case ScalingAxis::m: pts.push_back({static_cast<double>(r.m), r.rel_err}); break;
      case ScalingAxis::runtime_n: pts.push_back({static_cast<double>(r.N0), r.ms}); break;
      case ScalingAxis::runtime_m: pts.push_back({static_cast<double>(r.m), r.ms}); break;
    }
  }
  return pts;
}

inline ScalingFit fit_scaling(const std::vector<SweepRow>& rows, ScalingAxis axis) {
  const auto pts = scaling_points(rows, axis);
  return fit_scaling(std::span<const ScalingPoint>(pts), axis);
}

}  // namespace satq
