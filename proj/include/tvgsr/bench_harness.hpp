// Experiment grids over synthetic or user-supplied datasets: corrupt,
// recover with every requested method and lambda, score by PSNR, and pick
// the best lambda per (method, setting) by mean PSNR over seeds.

#pragma once

#include "tvgsr/graph_core.hpp"
#include "tvgsr/io.hpp"
#include "tvgsr/recovery.hpp"
#include "tvgsr/synthetic_world.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace tvgsr {

/// 20 log10(1 / RMSE) with RMSE = ||truth - estimate||_F / sqrt(n p), i.e.
/// the Frobenius error normalized per entry with peak value 1. Returns +inf
/// for identical inputs.
inline double psnr(const Matrix& truth, const Matrix& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
    throw std::invalid_argument("psnr: dimension mismatch");
  const double err = (truth - estimate).norm();
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  const double rmse = err / std::sqrt(static_cast<double>(truth.size()));
  return -20.0 * std::log10(rmse);
}

inline double psnr(const TimeVaryingSignal& truth, const TimeVaryingSignal& estimate) {
  return psnr(truth.values(), estimate.values());
}

inline std::string format_fixed4(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

inline double parse_fixed(std::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return io::parse_double(s);
}

inline constexpr const char* kObservationRow = "OBS";

struct ResultRow {
  std::string method;  // "A".."J", or "OBS" for the raw observation
  std::string variant;
  Index n = 0;
  Index p = 0;
  double v = 0.0;
  double sigma = 0.0;
  double ps = 0.0;
  double pp = 0.0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double psnr_db = 0.0;
  int iterations = 0;
  double runtime_ms = 0.0;
  bool constraints_satisfied = false;
  std::string status = "ok";

  auto key() const { return std::tie(variant, n, p, v, sigma, ps, pp, method, lambda, seed); }

  friend bool operator==(const ResultRow& a, const ResultRow& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.key() == b.key() && same(a.psnr_db, b.psnr_db) && a.iterations == b.iterations &&
           same(a.runtime_ms, b.runtime_ms) && a.constraints_satisfied == b.constraints_satisfied &&
           a.status == b.status;
  }
};

/// Winning lambda and its mean PSNR for one (method, setting) cell.
struct SummaryRow {
  std::string method;
  std::string variant;
  Index n = 0;
  Index p = 0;
  double v = 0.0;
  double sigma = 0.0;
  double ps = 0.0;
  double pp = 0.0;
  double lambda = 0.0;
  double mean_psnr_db = 0.0;
  int seeds = 0;
};

namespace detail {

inline std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

inline void emit_setting(std::ostream& out, const std::string& method, const std::string& variant, Index n, Index p,
                         double v, double sigma, double ps, double pp) {
  out << method << ',' << variant << ',' << n << ',' << p << ',' << io::format_double(v) << ','
      << io::format_double(sigma) << ',' << io::format_double(ps) << ',' << io::format_double(pp);
}

}  // namespace detail

/// runtime_ms is wall-clock dependent and only written when requested, so the
/// default output is reproducible byte for byte.
inline void emit_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool with_timing = false) {
  out << "method,variant,n,p,v,sigma,ps,pp,seed,lambda,psnr_db,iterations,";
  if (with_timing) out << "runtime_ms,";
  out << "constraints_satisfied,status\n";
  for (const auto& r : rows) {
    detail::emit_setting(out, r.method, r.variant, r.n, r.p, r.v, r.sigma, r.ps, r.pp);
    out << ',' << r.seed << ',' << io::format_double(r.lambda) << ',' << format_fixed4(r.psnr_db) << ','
        << r.iterations << ',';
    if (with_timing) out << format_fixed4(r.runtime_ms) << ',';
    out << (r.constraints_satisfied ? "true" : "false") << ',' << detail::csv_safe(r.status) << '\n';
  }
}

inline std::vector<ResultRow> parse_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw io::FormatError("empty results CSV");
  const bool with_timing = line.find("runtime_ms") != std::string::npos;
  const std::size_t fields = with_timing ? 15 : 14;
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split(line);
    if (f.size() != fields) throw io::FormatError("results CSV row has wrong field count: " + line);
    ResultRow r;
    std::size_t c = 0;
    r.method = std::string(f[c++]);
    r.variant = std::string(f[c++]);
    r.n = static_cast<Index>(io::parse_double(f[c++]));
    r.p = static_cast<Index>(io::parse_double(f[c++]));
    r.v = io::parse_double(f[c++]);
    r.sigma = io::parse_double(f[c++]);
    r.ps = io::parse_double(f[c++]);
    r.pp = io::parse_double(f[c++]);
    r.seed = std::stoull(std::string(f[c++]));
    r.lambda = io::parse_double(f[c++]);
    r.psnr_db = parse_fixed(f[c++]);
    r.iterations = std::stoi(std::string(f[c++]));
    if (with_timing) r.runtime_ms = parse_fixed(f[c++]);
    r.constraints_satisfied = f[c++] == "true";
    r.status = std::string(f[c++]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void emit_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "method,variant,n,p,v,sigma,ps,pp,lambda,mean_psnr_db,seeds\n";
  for (const auto& r : rows) {
    detail::emit_setting(out, r.method, r.variant, r.n, r.p, r.v, r.sigma, r.ps, r.pp);
    out << ',' << io::format_double(r.lambda) << ',' << format_fixed4(r.mean_psnr_db) << ',' << r.seeds << '\n';
  }
}

struct CorruptionSetting {
  double sigma = 0.0;
  double ps = 0.0;
  double pp = 0.0;
};

struct ExperimentConfig {
  // Synthetic dataset.
  Index n = 64;
  Index p = 100;
  std::vector<double> velocities{0.5};
  std::vector<FieldVariant> variants{FieldVariant::Smooth};
  /// Unset: every seed draws its own field with that seed.
  std::optional<std::uint64_t> field_seed;
  WorldOptions world;
  // External dataset; replaces the synthetic one when set.
  std::optional<std::string> truth_csv;
  std::optional<std::string> graphs_csv;

  std::vector<CorruptionSetting> corruption{{0.05, 0.05, 0.05}};
  std::vector<MethodId> methods;
  std::vector<double> lambdas{1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0, 10.0, 30.0};
  std::vector<std::uint64_t> seeds{1};
  RecoverOptions solver;
  bool include_observation = true;

  void validate() const {
    if (methods.empty()) throw std::invalid_argument("experiment config: no methods");
    if (seeds.empty()) throw std::invalid_argument("experiment config: no seeds");
    if (corruption.empty()) throw std::invalid_argument("experiment config: no corruption settings");
    const bool any_lambda =
        std::any_of(methods.begin(), methods.end(), [](MethodId m) { return MethodSpec::of(m).uses_lambda(); });
    if (any_lambda && lambdas.empty()) throw std::invalid_argument("experiment config: empty lambda grid");
    for (double l : lambdas)
      if (!(l > 0.0)) throw std::invalid_argument("experiment config: lambdas must be positive");
    if (!truth_csv && (velocities.empty() || variants.empty()))
      throw std::invalid_argument("experiment config: synthetic dataset needs velocities and a variant");
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    const auto& ds = j.at("dataset");
    if (ds.contains("truth_csv")) {
      c.truth_csv = ds.at("truth_csv").get<std::string>();
      if (ds.contains("graphs_csv")) c.graphs_csv = ds.at("graphs_csv").get<std::string>();
    } else {
      c.n = ds.at("n").get<Index>();
      c.p = ds.at("p").get<Index>();
      c.velocities = ds.at("v").get<std::vector<double>>();
      c.variants.clear();
      if (ds.at("variant").is_array()) {
        for (const auto& s : ds.at("variant")) c.variants.push_back(parse_variant(s.get<std::string>()));
      } else {
        c.variants.push_back(parse_variant(ds.at("variant").get<std::string>()));
      }
      if (ds.contains("field_seed")) c.field_seed = ds.at("field_seed").get<std::uint64_t>();
      c.world.side = ds.value("side", c.world.side);
      c.world.k = ds.value("k", c.world.k);
    }
    c.corruption.clear();
    for (const auto& e : j.at("corruption"))
      c.corruption.push_back({e.at("sigma").get<double>(), e.at("ps").get<double>(), e.at("pp").get<double>()});
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    if (j.contains("lambdas")) c.lambdas = j.at("lambdas").get<std::vector<double>>();
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      c.solver.max_iter = s.value("max_iter", c.solver.max_iter);
      c.solver.tol = s.value("tol", c.solver.tol);
      if (s.contains("gamma2") && s.at("gamma2").is_string()) {
        if (s.at("gamma2").get<std::string>() != "auto")
          throw std::invalid_argument("experiment config: gamma2 must be a number or \"auto\"");
        c.solver.auto_gamma2 = true;
      } else {
        c.solver.gamma2 = s.value("gamma2", c.solver.gamma2);
      }
      c.solver.analytic_norm_bound = s.value("analytic_norm_bound", c.solver.analytic_norm_bound);
    }
    c.include_observation = j.value("include_observation", c.include_observation);
    c.validate();
    return c;
  }
};

struct GridResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
};

/// Worker count from TVGSR_WORKERS, else the number of hardware threads.
inline unsigned worker_count() {
  if (const char* env = std::getenv("TVGSR_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return static_cast<unsigned>(w);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Seed of the corruption stream for a dataset seed and corruption index.
inline std::uint64_t field_seed_for(const ExperimentConfig& config, std::uint64_t seed) {
  return config.field_seed.value_or(seed);
}

inline std::uint64_t corruption_seed(std::uint64_t seed, std::size_t corruption_index) {
  return seed * 1000003ULL + 7919ULL * (corruption_index + 1);
}

/// Best lambda per (method, setting) by mean PSNR over seeds; ties go to the
/// smaller lambda. Failed rows count as -inf.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  using Setting = std::tuple<std::string, std::string, Index, Index, double, double, double, double>;
  std::map<Setting, std::map<double, std::pair<double, int>>> acc;
  for (const auto& r : rows) {
    auto& cell = acc[{r.method, r.variant, r.n, r.p, r.v, r.sigma, r.ps, r.pp}][r.lambda];
    const double x = std::isnan(r.psnr_db) ? -std::numeric_limits<double>::infinity() : r.psnr_db;
    cell.first += x;
    cell.second += 1;
  }
  std::vector<SummaryRow> out;
  for (const auto& [setting, by_lambda] : acc) {
    SummaryRow s;
    std::tie(s.method, s.variant, s.n, s.p, s.v, s.sigma, s.ps, s.pp) = setting;
    s.mean_psnr_db = -std::numeric_limits<double>::infinity();
    bool first = true;
    for (const auto& [lambda, sum] : by_lambda) {
      const double mean = sum.first / sum.second;
      if (first || mean > s.mean_psnr_db) {
        s.lambda = lambda;
        s.mean_psnr_db = mean;
        s.seeds = sum.second;
        first = false;
      }
    }
    out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const SummaryRow& a, const SummaryRow& b) {
    return std::tie(a.variant, a.n, a.p, a.v, a.sigma, a.ps, a.pp, a.method) <
           std::tie(b.variant, b.n, b.p, b.v, b.sigma, b.ps, b.pp, b.method);
  });
  return out;
}

namespace detail {

struct GridDataset {
  std::string variant;
  double v = 0.0;
  std::uint64_t seed = 0;
  TimeVaryingSignal truth;
  DynamicGraphSequence graphs;
};

inline std::vector<GridDataset> load_datasets(const ExperimentConfig& config, unsigned workers) {
  std::vector<GridDataset> out;
  if (config.truth_csv) {
    TimeVaryingSignal truth(io::read_matrix(*config.truth_csv));
    DynamicGraphSequence graphs;
    if (config.graphs_csv) {
      graphs = io::read_graphs(*config.graphs_csv, truth.n(), truth.p());
    } else {
      std::vector<Laplacian> ls;
      for (Index k = 0; k < truth.p(); ++k)
        ls.emplace_back(knn_graph_from_signal(truth.values().col(k), config.world.k));
      graphs = DynamicGraphSequence(std::move(ls));
    }
    for (auto seed : config.seeds) out.push_back({"external", 0.0, seed, truth, graphs});
    return out;
  }
  for (auto variant : config.variants) {
    std::map<std::uint64_t, ScalarField> fields;
    for (auto seed : config.seeds) {
      const auto fs = field_seed_for(config, seed);
      if (!fields.count(fs)) fields.emplace(fs, make_field(variant, fs));
    }
    for (double v : config.velocities)
      for (auto seed : config.seeds) out.push_back({std::string(variant_name(variant)), v, seed, {}, {}});
    const std::size_t begin = out.size() - config.velocities.size() * config.seeds.size();
    parallel_for(out.size() - begin, workers, [&](std::size_t i) {
      auto& d = out[begin + i];
      const auto& field = fields.at(field_seed_for(config, d.seed));
      auto world = simulate(config.n, config.p, d.v, field, d.seed, config.world);
      d.truth = std::move(world.truth);
      d.graphs = std::move(world.graphs);
    });
  }
  return out;
}

}  // namespace detail

inline GridResult run_grid(const ExperimentConfig& config) {
  config.validate();
  const unsigned workers = worker_count();
  const auto datasets = detail::load_datasets(config, workers);

  std::vector<Observation> observations;
  struct Cell {
    std::size_t dataset;
    std::size_t corruption;
  };
  std::vector<Cell> cells;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (std::size_t c = 0; c < config.corruption.size(); ++c) {
      const auto& cs = config.corruption[c];
      auto data = corrupt(datasets[d].truth, {cs.sigma, cs.ps, cs.pp, corruption_seed(datasets[d].seed, c)});
      observations.push_back(std::move(data.obs));
      cells.push_back({d, c});
    }
  }

  struct Task {
    std::size_t cell;
    MethodId method;
    double lambda;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (MethodId m : config.methods) {
      if (MethodSpec::of(m).uses_lambda()) {
        for (double l : config.lambdas) tasks.push_back({c, m, l});
      } else {
        tasks.push_back({c, m, 1.0});
      }
    }
  }

  auto base_row = [&](std::size_t cell) {
    const auto& d = datasets[cells[cell].dataset];
    const auto& cs = config.corruption[cells[cell].corruption];
    ResultRow r;
    r.variant = d.variant;
    r.n = d.truth.n();
    r.p = d.truth.p();
    r.v = d.v;
    r.sigma = cs.sigma;
    r.ps = cs.ps;
    r.pp = cs.pp;
    r.seed = d.seed;
    return r;
  };

  std::vector<ResultRow> rows(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    const Task& task = tasks[t];
    const auto& d = datasets[cells[task.cell].dataset];
    ResultRow r = base_row(task.cell);
    r.method = std::string(1, method_letter(task.method));
    r.lambda = task.lambda;
    try {
      RecoverOptions opts = config.solver;
      opts.record_trace = false;
      const auto result =
          recover(observations[task.cell], d.graphs, MethodSpec::of(task.method, task.lambda), {}, opts);
      r.psnr_db = psnr(d.truth, result.Y);
      r.iterations = result.trace.iterations;
      r.runtime_ms = result.trace.wall_ms;
      r.constraints_satisfied = result.constraints_satisfied;
      r.status = result.converged ? "ok" : "max_iter";
    } catch (const std::exception& e) {
      r.psnr_db = std::numeric_limits<double>::quiet_NaN();
      r.status = std::string("error: ") + e.what();
    }
    rows[t] = std::move(r);
  });

  if (config.include_observation) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      ResultRow r = base_row(c);
      r.method = kObservationRow;
      r.psnr_db = psnr(datasets[cells[c].dataset].truth.values(), observations[c].data());
      r.constraints_satisfied = true;
      rows.push_back(std::move(r));
    }
  }

  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.key() < b.key(); });
  GridResult out;
  out.summary = summarize(rows);
  out.rows = std::move(rows);
  return out;
}

inline void write_grid_outputs(const std::filesystem::path& dir, const GridResult& result, bool with_timing = false) {
  std::filesystem::create_directories(dir);
  auto results = io::open_out((dir / "results.csv").string());
  emit_results_csv(results, result.rows, with_timing);
  auto summary = io::open_out((dir / "summary.csv").string());
  emit_summary_csv(summary, result.summary);
}

}  // namespace tvgsr
