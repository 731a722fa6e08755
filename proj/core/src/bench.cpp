#include "selclust/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "selclust/csv.hpp"
#include "selclust/errors.hpp"
#include "selclust/metrics.hpp"
#include "selclust/rng.hpp"

namespace selclust {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t method_seed(std::uint64_t replicate_seed, Method m) {
  return derive_seed(replicate_seed,
                     {0x4d45U, static_cast<std::uint64_t>(m) + 1});
}

std::vector<int> all_columns(int p) {
  std::vector<int> out(p);
  for (int j = 0; j < p; ++j) out[j] = j;
  return out;
}

double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

struct MethodOutcome {
  std::vector<int> labels;
  std::vector<int> selected;
  std::optional<VariableRoles> roles;
  std::optional<Eigen::VectorXd> weights;
  double chosen_t = 0.0;
};

MethodOutcome run_method(Method m, const DataMatrix& data,
                         const RunConfig& cfg, std::uint64_t seed) {
  MethodOutcome out;
  const int p = static_cast<int>(data.p());

  switch (m) {
    case Method::KMeans: {
      KMeansResult km = kmeans(data.values, *cfg.K, cfg.kmeans_baseline, seed);
      out.labels = std::move(km.labels);
      out.selected = all_columns(p);
      break;
    }
    case Method::SparseKMeans: {
      SparseKMeansConfig fit_cfg;
      fit_cfg.max_iter = cfg.sparse_max_iter;
      fit_cfg.inner = cfg.kmeans_inner;
      fit_cfg.seed = seed;
      TuneConfig tune_cfg{cfg.n_perm, fit_cfg};
      const std::vector<double> grid = default_t_grid(p, cfg.t_grid_size);
      const GapCurve curve = tune_t(data, *cfg.K, grid, tune_cfg);

      fit_cfg.seed = derive_seed(seed, {0x4649U});
      SparseFit fit = sparse_kmeans_fit(data, *cfg.K, curve.chosen_t, fit_cfg);
      out.labels = std::move(fit.labels);
      for (int j = 0; j < p; ++j)
        if (fit.w[j] > 0.0) out.selected.push_back(j);
      out.weights = std::move(fit.w);
      out.chosen_t = curve.chosen_t;
      break;
    }
    case Method::Rdmcm: {
      RoleSearchConfig search;
      search.K_set = cfg.K_set.empty() ? std::vector<int>{*cfg.K} : cfg.K_set;
      search.families = cfg.families;
      search.em = cfg.em;
      search.em.seed = seed;
      search.move_em = cfg.move_em;
      if (search.move_em) search.move_em->seed = seed;
      SelectedModel model = select_roles(data, search);
      out.labels = model.mixture.labels;
      out.selected = model.roles.relevant;
      out.roles = std::move(model.roles);
      break;
    }
  }
  return out;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::KMeans: return "kmeans";
    case Method::SparseKMeans: return "sparse_kmeans";
    case Method::Rdmcm: return "rdmcm";
  }
  return "unknown";
}

std::optional<Method> method_from_string(std::string_view name) {
  if (name == "kmeans") return Method::KMeans;
  if (name == "sparse_kmeans") return Method::SparseKMeans;
  if (name == "rdmcm") return Method::Rdmcm;
  return std::nullopt;
}

void RunConfig::validate() const {
  if (scenario.has_value() == !csv_path.empty())
    throw ConfigError("exactly one of scenario / csv_path must be set");
  if (methods.empty()) throw ConfigError("no methods requested");
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (K && *K < 1) throw ConfigError("K must be positive");
  for (int k : K_set)
    if (k < 1) throw ConfigError("K_set entries must be positive");

  const bool needs_fixed_k =
      std::find(methods.begin(), methods.end(), Method::KMeans) !=
          methods.end() ||
      std::find(methods.begin(), methods.end(), Method::SparseKMeans) !=
          methods.end();
  if (needs_fixed_k && !K)
    throw ConfigError("kmeans / sparse_kmeans need a fixed K");
  const bool has_rdmcm =
      std::find(methods.begin(), methods.end(), Method::Rdmcm) != methods.end();
  if (has_rdmcm) {
    if (!K && K_set.empty())
      throw ConfigError("rdmcm needs K or K_set");
    if (K && !K_set.empty())
      throw ConfigError("give rdmcm either K or K_set, not both");
    if (families.empty())
      throw ConfigError("rdmcm needs at least one covariance family");
  }
  if (t_grid_size < 1) throw ConfigError("t_grid_size must be >= 1");
  if (n_perm < 2) throw ConfigError("n_perm must be >= 2");
}

void apply_scenario_defaults(RunConfig& config) {
  const Experiment exp = config.scenario
                             ? config.scenario->experiment
                             : Experiment::Waveform;  // CSV: generic default
  if (!config.K && config.K_set.empty()) {
    if (config.scenario) {
      switch (exp) {
        case Experiment::Exp1: config.K = 3; break;
        case Experiment::Exp2: config.K = 4; break;
        case Experiment::Waveform: config.K = 3; break;
      }
    }
  }
  if (config.families.empty()) {
    if (config.scenario && exp == Experiment::Exp1) {
      config.families = {CovarianceFamily::SphericalEqual};
    } else {
      config.families = {
          CovarianceFamily::SphericalEqual, CovarianceFamily::SphericalVarying,
          CovarianceFamily::DiagonalEqual, CovarianceFamily::DiagonalVarying};
    }
  }
  if (!config.move_em) {
    // Candidate moves only need BIC differences well above log(n); a lighter
    // EM keeps the search an order of magnitude cheaper than the final refit
    // settings without changing the selected roles.
    EmConfig move = config.em;
    move.n_starts = 4;
    move.tol = std::max(config.em.tol, 1e-5);
    move.max_iter = std::min(config.em.max_iter, 150);
    config.move_em = move;
  }
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  struct Acc {
    std::vector<double> values;
  };
  std::map<std::pair<std::string, std::string>, std::map<std::string, Acc>>
      groups;
  for (const ResultRow& row : rows) {
    if (!row.ok()) continue;
    auto& metrics = groups[{row.scenario, row.method}];
    if (std::isfinite(row.ari)) metrics["ari"].values.push_back(row.ari);
    if (std::isfinite(row.vser)) metrics["vser"].values.push_back(row.vser);
    metrics["n_selected"].values.push_back(row.n_selected);
    metrics["runtime_seconds"].values.push_back(row.runtime_seconds);
  }

  const std::vector<std::string> metric_order = {"ari", "vser", "n_selected",
                                                 "runtime_seconds"};
  std::vector<SummaryRow> out;
  for (const auto& [key, metrics] : groups) {
    for (const std::string& metric : metric_order) {
      auto it = metrics.find(metric);
      if (it == metrics.end() || it->second.values.empty()) continue;
      const std::vector<double>& v = it->second.values;
      const double mean =
          std::accumulate(v.begin(), v.end(), 0.0) / v.size();
      double sd = 0.0;
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / (v.size() - 1));
      }
      out.push_back({key.first, key.second, metric, mean, sd});
    }
  }
  return out;
}

BenchmarkResult run_benchmark(const RunConfig& config) {
  config.validate();

  std::optional<LoadedCsv> csv;
  if (!config.csv_path.empty()) csv = load_dataset_csv(config.csv_path);

  const std::string scenario_id =
      config.scenario ? config.scenario->id()
                      : std::filesystem::path(config.csv_path).stem().string();

  if (!config.out_dir.empty())
    std::filesystem::create_directories(config.out_dir);

  BenchmarkResult result;
  for (int r = 0; r < config.replicates; ++r) {
    const std::uint64_t replicate_seed = config.base_seed + r;

    DataMatrix data;
    std::vector<int> truth_labels;
    std::vector<int> truth_relevant;
    bool has_labels = false, has_relevant = false;
    if (config.scenario) {
      ScenarioSpec spec = *config.scenario;
      spec.seed = replicate_seed;
      LabeledDataset ds = generate(spec);
      data = std::move(ds.data);
      truth_labels = std::move(ds.true_labels);
      truth_relevant = std::move(ds.true_relevant);
      has_labels = has_relevant = true;
    } else {
      data = csv->data;
      truth_labels = csv->labels;
      has_labels = csv->has_labels;
    }
    result.p = static_cast<int>(data.p());

    if (config.dump_data && !config.out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "data_rep%03d.csv", r);
      write_dataset_csv(
          (std::filesystem::path(config.out_dir) / name).string(), data,
          has_labels ? &truth_labels : nullptr);
    }

    for (Method m : config.methods) {
      ResultRow row;
      row.scenario = scenario_id;
      row.method = to_string(m);
      row.replicate = r;
      row.seed = replicate_seed;
      row.ari = kNaN;
      row.vser = kNaN;

      const auto start = std::chrono::steady_clock::now();
      try {
        MethodOutcome outcome =
            run_method(m, data, config, method_seed(replicate_seed, m));
        if (has_labels)
          row.ari = adjusted_rand_index(outcome.labels, truth_labels);
        if (has_relevant)
          row.vser = vser(outcome.selected, truth_relevant, result.p);
        row.n_selected = num_selected(outcome.selected);
        if (outcome.roles) result.rdmcm_roles.push_back(*outcome.roles);
        if (outcome.weights) {
          result.sparse_weights.push_back(*outcome.weights);
          result.sparse_t.push_back(outcome.chosen_t);
        }
      } catch (const Error& e) {
        row.error = e.what();
      }
      if (config.timings) {
        row.runtime_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
      }
      result.rows.push_back(std::move(row));
    }
  }

  std::sort(result.rows.begin(), result.rows.end(),
            [](const ResultRow& a, const ResultRow& b) {
              return std::tie(a.scenario, a.method, a.replicate) <
                     std::tie(b.scenario, b.method, b.replicate);
            });
  result.summary = summarize(result.rows);

  if (!config.out_dir.empty()) {
    const std::filesystem::path dir(config.out_dir);
    write_results_csv((dir / "results.csv").string(), result.rows);
    write_summary_csv((dir / "summary.csv").string(), result.summary);
    if (!result.rdmcm_roles.empty())
      emit_role_frequencies((dir / "roles.csv").string(), result.rdmcm_roles,
                            result.p);
    if (!result.sparse_weights.empty())
      emit_weight_summaries((dir / "weights.csv").string(),
                            result.sparse_weights, result.p);
    write_manifest((dir / "manifest.json").string(), config);
  }
  return result;
}

void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const ResultRow& row : rows) {
    cells.push_back({row.scenario, row.method, std::to_string(row.replicate),
                     std::isfinite(row.ari) ? format_double(row.ari) : "",
                     std::isfinite(row.vser) ? format_double(row.vser) : "",
                     std::to_string(row.n_selected),
                     format_double(row.runtime_seconds),
                     std::to_string(row.seed), row.error});
  }
  write_csv(path,
            {"scenario", "method", "replicate", "ari", "vser", "n_selected",
             "runtime_seconds", "seed", "error"},
            cells);
}

void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& summary) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(summary.size());
  for (const SummaryRow& row : summary)
    cells.push_back({row.scenario, row.method, row.metric,
                     format_double(row.mean), format_double(row.sd)});
  write_csv(path, {"scenario", "method", "metric", "mean", "sd"}, cells);
}

void emit_role_frequencies(const std::string& path,
                           const std::vector<VariableRoles>& roles, int p) {
  if (roles.empty()) throw NoRoleData("no role-search results recorded");

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(p, 3);
  for (const VariableRoles& r : roles) {
    for (int j : r.relevant) counts(j, 0) += 1.0;
    for (int j : r.redundant) counts(j, 1) += 1.0;
    for (int j : r.independent) counts(j, 2) += 1.0;
  }
  counts /= static_cast<double>(roles.size());

  std::vector<std::vector<std::string>> cells;
  for (int j = 0; j < p; ++j)
    cells.push_back({std::to_string(j + 1), format_double(counts(j, 0)),
                     format_double(counts(j, 1)), format_double(counts(j, 2))});
  write_csv(path, {"variable", "relevant", "redundant", "independent"}, cells);
}

void emit_weight_summaries(const std::string& path,
                           const std::vector<Eigen::VectorXd>& weights, int p) {
  if (weights.empty()) throw NoWeightData("no sparse K-means weights recorded");

  std::vector<std::vector<std::string>> cells;
  for (int j = 0; j < p; ++j) {
    std::vector<double> w;
    w.reserve(weights.size());
    for (const Eigen::VectorXd& v : weights) w.push_back(v[j]);
    cells.push_back({std::to_string(j + 1),
                     format_double(*std::min_element(w.begin(), w.end())),
                     format_double(quantile(w, 0.25)),
                     format_double(quantile(w, 0.5)),
                     format_double(quantile(w, 0.75)),
                     format_double(*std::max_element(w.begin(), w.end()))});
  }
  write_csv(path, {"variable", "min", "q1", "median", "q3", "max"}, cells);
}

void write_manifest(const std::string& path, const RunConfig& config) {
  nlohmann::json j;
  j["tool"] = "selclust";
  j["version"] = "0.1.0";

  if (config.scenario) {
    j["scenario"] = {{"experiment", to_string(config.scenario->experiment)},
                     {"scenario", config.scenario->scenario},
                     {"n", config.scenario->n},
                     {"p", config.scenario->p},
                     {"mu", config.scenario->mu}};
  } else {
    j["csv_path"] = config.csv_path;
  }

  std::vector<std::string> methods;
  for (Method m : config.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["replicates"] = config.replicates;
  j["base_seed"] = config.base_seed;
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < config.replicates; ++r)
    seeds.push_back(config.base_seed + r);
  j["replicate_seeds"] = seeds;
  if (config.K) j["K"] = *config.K;
  if (!config.K_set.empty()) j["K_set"] = config.K_set;
  std::vector<std::string> families;
  for (CovarianceFamily f : config.families) families.push_back(to_string(f));
  j["families"] = families;
  j["em"] = {{"n_starts", config.em.n_starts},
             {"tol", config.em.tol},
             {"max_iter", config.em.max_iter}};
  if (config.move_em)
    j["move_em"] = {{"n_starts", config.move_em->n_starts},
                    {"tol", config.move_em->tol},
                    {"max_iter", config.move_em->max_iter}};
  j["t_grid_size"] = config.t_grid_size;
  j["n_perm"] = config.n_perm;
  j["sparse_max_iter"] = config.sparse_max_iter;
  j["kmeans_inner"] = {{"restarts", config.kmeans_inner.restarts},
                       {"max_iter", config.kmeans_inner.max_iter}};
  j["kmeans_baseline"] = {{"restarts", config.kmeans_baseline.restarts},
                          {"max_iter", config.kmeans_baseline.max_iter}};
  j["timings"] = config.timings;
  j["outputs"] = {"results.csv", "summary.csv", "roles.csv", "weights.csv",
                  "manifest.json"};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace selclust
