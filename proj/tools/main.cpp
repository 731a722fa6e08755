// selclust: benchmark and fit variable-selecting clustering methods.
//
// Subcommands:
//   simulate  run scenario replications and write result tables
//   fit       cluster a single CSV dataset and report roles / weights
//   tune      emit the sparse K-means gap curve for a CSV dataset

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "selclust/bench.hpp"
#include "selclust/csv.hpp"
#include "selclust/errors.hpp"
#include "selclust/metrics.hpp"
#include "selclust/rng.hpp"

namespace {

using namespace selclust;

std::vector<int> parse_k_set(const std::string& text) {
  std::vector<int> out;
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const int lo = std::stoi(text.substr(0, colon));
    const int hi = std::stoi(text.substr(colon + 1));
    for (int k = lo; k <= hi; ++k) out.push_back(k);
    return out;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

std::vector<CovarianceFamily> parse_families(
    const std::vector<std::string>& names) {
  std::vector<CovarianceFamily> out;
  for (const std::string& name : names) {
    const auto f = family_from_string(name);
    if (!f) throw ConfigError("unknown covariance family: " + name);
    out.push_back(*f);
  }
  return out;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const std::string& name : names) {
    const auto m = method_from_string(name);
    if (!m) throw ConfigError("unknown method: " + name);
    out.push_back(*m);
  }
  return out;
}

std::string join_indices(const std::vector<int>& idx) {
  std::string out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(idx[i] + 1);  // 1-based in user-facing output
  }
  return out.empty() ? "-" : out;
}

void print_summary(const std::vector<SummaryRow>& summary) {
  std::printf("%-12s %-14s %-16s %12s %12s\n", "scenario", "method", "metric",
              "mean", "sd");
  for (const SummaryRow& row : summary) {
    if (row.metric == "runtime_seconds") continue;
    std::printf("%-12s %-14s %-16s %12.3f %12.3f\n", row.scenario.c_str(),
                row.method.c_str(), row.metric.c_str(), row.mean, row.sd);
  }
}

struct CommonOpts {
  std::uint64_t seed = 1;
  int k = 0;
  std::string k_set_text;
  std::vector<std::string> family_names;
  int n_starts = 0;
  double tol = 1e-6;
  int em_max_iter = 500;
  int move_starts = 0;
  int t_grid_size = 10;
  int n_perm = 25;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "Base RNG seed");
  cmd->add_option("--k", opts.k, "Fixed number of clusters");
  cmd->add_option("--kset", opts.k_set_text,
                  "K grid for the role search, e.g. 2:6 or 2,3,4");
  cmd->add_option("--families", opts.family_names,
                  "Covariance families for the role search")
      ->delimiter(',');
  cmd->add_option("--n-starts", opts.n_starts, "EM starts (0 = automatic)");
  cmd->add_option("--tol", opts.tol, "EM relative log-likelihood tolerance");
  cmd->add_option("--em-max-iter", opts.em_max_iter, "EM iteration cap");
  cmd->add_option("--move-starts", opts.move_starts,
                  "Cheaper EM starts for role-search move evaluation "
                  "(0 = same as --n-starts)");
  cmd->add_option("--t-grid-size", opts.t_grid_size,
                  "Grid size for sparse K-means tuning");
  cmd->add_option("--n-perm", opts.n_perm,
                  "Permutations for the gap statistic");
}

void fill_config(RunConfig& config, const CommonOpts& opts) {
  config.base_seed = opts.seed;
  if (opts.k > 0) config.K = opts.k;
  if (!opts.k_set_text.empty()) config.K_set = parse_k_set(opts.k_set_text);
  config.families = parse_families(opts.family_names);
  config.em.n_starts = opts.n_starts;
  config.em.tol = opts.tol;
  config.em.max_iter = opts.em_max_iter;
  if (opts.move_starts > 0) {
    config.move_em = config.em;
    config.move_em->n_starts = opts.move_starts;
  }
  config.t_grid_size = opts.t_grid_size;
  config.n_perm = opts.n_perm;
}

int cmd_simulate(const std::string& experiment, int scenario, int replicates,
                 bool desk, const std::vector<std::string>& method_names,
                 const CommonOpts& opts, int n_override, double mu_override,
                 const std::string& out_dir, bool timings, bool dump_data) {
  ScenarioSpec spec;
  if (experiment == "exp1")
    spec = ScenarioSpec::exp1(scenario, opts.seed);
  else if (experiment == "exp2")
    spec = ScenarioSpec::exp2(scenario, opts.seed);
  else if (experiment == "waveform")
    spec = ScenarioSpec::waveform(opts.seed);
  else
    throw ConfigError("unknown experiment: " + experiment);
  if (n_override > 0) spec.n = n_override;
  if (mu_override > 0) spec.mu = mu_override;

  RunConfig config;
  config.scenario = spec;
  config.methods = parse_methods(method_names);
  if (replicates > 0) {
    config.replicates = replicates;
  } else if (desk) {
    config.replicates = 10;
  } else {
    config.replicates = spec.experiment == Experiment::Exp1   ? 25
                        : spec.experiment == Experiment::Exp2 ? 50
                                                              : 1;
  }
  config.out_dir = out_dir;
  config.timings = timings;
  config.dump_data = dump_data;
  fill_config(config, opts);
  apply_scenario_defaults(config);

  const BenchmarkResult result = run_benchmark(config);
  print_summary(result.summary);
  int failures = 0;
  for (const ResultRow& row : result.rows)
    if (!row.ok()) ++failures;
  if (failures > 0)
    std::fprintf(stderr, "%d method run(s) failed; see results.csv\n",
                 failures);
  if (!out_dir.empty())
    std::printf("results written to %s\n", out_dir.c_str());
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& method_name,
            const CommonOpts& opts, const std::string& out_dir) {
  RunConfig config;
  config.csv_path = data_path;
  config.methods = parse_methods({method_name});
  config.out_dir = out_dir;
  fill_config(config, opts);
  apply_scenario_defaults(config);
  if (!config.K && config.K_set.empty())
    throw ConfigError("fit needs --k or --kset");
  config.validate();

  const LoadedCsv csv = load_dataset_csv(data_path);
  const int p = static_cast<int>(csv.data.p());
  const std::uint64_t seed = derive_seed(opts.seed, {0x464954U});

  const Method method = config.methods.front();
  if (method == Method::Rdmcm) {
    RoleSearchConfig search;
    search.K_set = config.K_set.empty() ? std::vector<int>{*config.K}
                                        : config.K_set;
    search.families = config.families;
    search.em = config.em;
    search.em.seed = seed;
    search.move_em = config.move_em;
    if (search.move_em) search.move_em->seed = seed;
    const SelectedModel model = select_roles(csv.data, search);

    std::printf("K: %d\nfamily: %s\ncriterion: %s\n", model.mixture.K,
                to_string(model.mixture.family).c_str(),
                format_double(model.criterion).c_str());
    std::printf("relevant (S): %s\n",
                join_indices(model.roles.relevant).c_str());
    std::printf("redundant (U): %s\n",
                join_indices(model.roles.redundant).c_str());
    std::printf("predictors (R): %s\n",
                join_indices(model.roles.predictors).c_str());
    std::printf("independent (W): %s\n",
                join_indices(model.roles.independent).c_str());
    if (csv.has_labels)
      std::printf("ARI vs label column: %s\n",
                  format_double(adjusted_rand_index(model.mixture.labels,
                                                    csv.labels))
                      .c_str());
    std::printf("labels:");
    for (int l : model.mixture.labels) std::printf(" %d", l + 1);
    std::printf("\n");
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      emit_role_frequencies(
          (std::filesystem::path(out_dir) / "roles.csv").string(),
          {model.roles}, p);
      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < model.mixture.labels.size(); ++i)
        rows.push_back({std::to_string(i + 1),
                        std::to_string(model.mixture.labels[i] + 1)});
      write_csv((std::filesystem::path(out_dir) / "labels.csv").string(),
                {"observation", "cluster"}, rows);
    }
    return 0;
  }

  if (method == Method::SparseKMeans) {
    SparseKMeansConfig fit_cfg;
    fit_cfg.max_iter = config.sparse_max_iter;
    fit_cfg.seed = seed;
    TuneConfig tune_cfg{config.n_perm, fit_cfg};
    const GapCurve curve =
        tune_t(csv.data, *config.K, default_t_grid(p, config.t_grid_size),
               tune_cfg);
    fit_cfg.seed = derive_seed(seed, {0x4649U});
    const SparseFit fit =
        sparse_kmeans_fit(csv.data, *config.K, curve.chosen_t, fit_cfg);

    std::printf("chosen t: %s\nobjective: %s\nselected: %d of %d\n",
                format_double(fit.t).c_str(),
                format_double(fit.objective).c_str(),
                static_cast<int>((fit.w.array() > 0.0).count()), p);
    std::printf("weights:");
    for (int j = 0; j < p; ++j)
      std::printf(" %s", format_double(fit.w[j]).c_str());
    std::printf("\n");
    if (csv.has_labels)
      std::printf("ARI vs label column: %s\n",
                  format_double(adjusted_rand_index(fit.labels, csv.labels))
                      .c_str());
    std::printf("labels:");
    for (int l : fit.labels) std::printf(" %d", l + 1);
    std::printf("\n");
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      emit_weight_summaries(
          (std::filesystem::path(out_dir) / "weights.csv").string(), {fit.w},
          p);
    }
    return 0;
  }

  const KMeansResult km =
      kmeans(csv.data.values, *config.K, config.kmeans_baseline, seed);
  if (csv.has_labels)
    std::printf("ARI vs label column: %s\n",
                format_double(adjusted_rand_index(km.labels, csv.labels))
                    .c_str());
  std::printf("labels:");
  for (int l : km.labels) std::printf(" %d", l + 1);
  std::printf("\n");
  return 0;
}

int cmd_tune(const std::string& data_path, const CommonOpts& opts,
             const std::string& out_dir) {
  const LoadedCsv csv = load_dataset_csv(data_path);
  if (opts.k < 2) throw ConfigError("tune needs --k >= 2");
  const int p = static_cast<int>(csv.data.p());

  SparseKMeansConfig fit_cfg;
  fit_cfg.seed = derive_seed(opts.seed, {0x54554eU});
  TuneConfig tune_cfg{opts.n_perm, fit_cfg};
  const GapCurve curve = tune_t(
      csv.data, opts.k, default_t_grid(p, opts.t_grid_size), tune_cfg);

  std::printf("%12s %12s %12s\n", "t", "gap", "se");
  for (std::size_t i = 0; i < curve.t_grid.size(); ++i)
    std::printf("%12.4f %12.4f %12.4f\n", curve.t_grid[i], curve.gap[i],
                curve.se[i]);
  std::printf("chosen t: %s\n", format_double(curve.chosen_t).c_str());

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < curve.t_grid.size(); ++i)
      rows.push_back({format_double(curve.t_grid[i]),
                      format_double(curve.gap[i]), format_double(curve.se[i]),
                      curve.t_grid[i] == curve.chosen_t ? "1" : "0"});
    write_csv((std::filesystem::path(out_dir) / "gap_curve.csv").string(),
              {"t", "gap", "se", "chosen"}, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-selecting clustering benchmarks"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run scenario replications");
  std::string experiment = "exp1";
  int scenario = 1, replicates = 0, n_override = 0;
  double mu_override = 0.0;
  bool desk = false, timings = false, dump_data = false;
  std::vector<std::string> method_names = {"kmeans", "sparse_kmeans", "rdmcm"};
  std::string sim_out;
  CommonOpts sim_opts;
  sim->add_option("--experiment", experiment, "exp1 | exp2 | waveform")
      ->required();
  sim->add_option("--scenario", scenario, "Scenario number");
  sim->add_option("--replicates", replicates,
                  "Replicates (default: 25 exp1, 50 exp2, 1 waveform)");
  sim->add_flag("--desk", desk, "Desk preset: 10 replicates");
  sim->add_option("--methods", method_names,
                  "Subset of kmeans,sparse_kmeans,rdmcm")
      ->delimiter(',');
  sim->add_option("--n", n_override, "Override the scenario sample size");
  sim->add_option("--mu", mu_override, "Override the exp1 separation");
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_flag("--timings", timings,
                "Record wall-clock runtimes in results.csv (makes outputs "
                "non-reproducible byte-for-byte)");
  sim->add_flag("--dump-data", dump_data,
                "Write each replicate's dataset as CSV");
  add_common(sim, sim_opts);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit one method to a CSV dataset");
  std::string fit_data, fit_method = "rdmcm", fit_out;
  CommonOpts fit_opts;
  fit->add_option("--data", fit_data, "Input CSV")->required();
  fit->add_option("--method", fit_method, "kmeans | sparse_kmeans | rdmcm");
  fit->add_option("--out", fit_out, "Optional output directory");
  add_common(fit, fit_opts);

  // tune
  auto* tune = app.add_subcommand("tune", "Emit the sparse K-means gap curve");
  std::string tune_data, tune_out;
  CommonOpts tune_opts;
  tune->add_option("--data", tune_data, "Input CSV")->required();
  tune->add_option("--out", tune_out, "Optional output directory");
  add_common(tune, tune_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(experiment, scenario, replicates, desk, method_names,
                          sim_opts, n_override, mu_override, sim_out, timings,
                          dump_data);
    if (fit->parsed()) return cmd_fit(fit_data, fit_method, fit_opts, fit_out);
    if (tune->parsed()) return cmd_tune(tune_data, tune_opts, tune_out);
  } catch (const DataLoadError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
