#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selclust/data.hpp"
#include "selclust/gmm.hpp"
#include "selclust/simgen.hpp"
#include "selclust/sparse_kmeans.hpp"
#include "selclust/varsel.hpp"

namespace selclust {

enum class Method { KMeans, SparseKMeans, Rdmcm };

std::string to_string(Method m);
std::optional<Method> method_from_string(std::string_view name);

struct RunConfig {
  /// Exactly one of scenario / csv_path is set.
  std::optional<ScenarioSpec> scenario;
  std::string csv_path;

  std::vector<Method> methods;
  int replicates = 1;
  std::optional<int> K;     // fixed-K mode
  std::vector<int> K_set;   // selection mode (role search only)
  std::uint64_t base_seed = 0;
  std::string out_dir;      // empty: keep results in memory only

  std::vector<CovarianceFamily> families;  // role-search mixture families
  EmConfig em;
  std::optional<EmConfig> move_em;
  int t_grid_size = 10;
  int n_perm = 25;
  int sparse_max_iter = 15;
  KMeansConfig kmeans_inner;                  // Lloyd solver inside sparse K-means
  KMeansConfig kmeans_baseline{.restarts = 1};  // plain K-means comparator

  bool timings = false;    // record wall-clock runtimes (breaks byte-level
                           // reproducibility of the output files)
  bool dump_data = false;  // write each replicate's dataset as CSV

  void validate() const;  // throws ConfigError
};

/// Fills empty K / families fields with the protocol defaults of the
/// configured scenario: experiment 1 fixes K=3 with the spherical-equal
/// family; experiment 2 fixes K=4 and the waveform K=3, both searching over
/// the spherical and diagonal families (also the CSV-input default).
void apply_scenario_defaults(RunConfig& config);

struct ResultRow {
  std::string scenario;
  std::string method;
  int replicate = 0;
  double ari = 0.0;   // percent; NaN when no ground truth
  double vser = 0.0;  // percent; NaN when no ground truth
  int n_selected = 0;
  double runtime_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

struct SummaryRow {
  std::string scenario;
  std::string method;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
};

struct BenchmarkResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  // Per-replicate method artifacts, for the role/weight frequency outputs.
  std::vector<VariableRoles> rdmcm_roles;
  std::vector<Eigen::VectorXd> sparse_weights;
  std::vector<double> sparse_t;
  int p = 0;
};

/// Runs every (replicate, method) cell, scores against ground truth when
/// available and, when out_dir is set, writes results.csv, summary.csv,
/// roles.csv, weights.csv and manifest.json. Method failures are recorded in
/// the affected row and never abort the run.
BenchmarkResult run_benchmark(const RunConfig& config);

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows);
void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& summary);

/// Per-variable frequency of each role over the recorded search results.
/// Throws NoRoleData when `roles` is empty.
void emit_role_frequencies(const std::string& path,
                           const std::vector<VariableRoles>& roles, int p);

/// Per-variable five-number summary of the sparse weights across replicates.
/// Throws NoWeightData when `weights` is empty.
void emit_weight_summaries(const std::string& path,
                           const std::vector<Eigen::VectorXd>& weights, int p);

void write_manifest(const std::string& path, const RunConfig& config);

}  // namespace selclust
