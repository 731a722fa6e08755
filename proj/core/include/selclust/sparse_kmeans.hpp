#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "selclust/data.hpp"

namespace selclust {

struct KMeansConfig {
  int restarts = 10;
  int max_iter = 100;
};

struct KMeansResult {
  std::vector<int> labels;  // 0-based cluster ids
  Eigen::MatrixXd centers;  // K x p
  double wcss = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; the best of `restarts` runs by
/// within-cluster sum of squares wins. A cluster that empties is re-seeded
/// at the point farthest from its assigned centroid.
KMeansResult kmeans(const Eigen::MatrixXd& data, int K, const KMeansConfig& cfg,
                    std::uint64_t seed);

/// Lloyd refinement started from the centroids implied by `labels`.
KMeansResult kmeans_refine(const Eigen::MatrixXd& data, int K,
                           const std::vector<int>& labels, int max_iter);

/// Per-variable between-cluster sum of squares, in the pairwise-dispersion
/// scaling: a_j = (1/n) sum_{i,i'} (y_ij - y_i'j)^2
///             - sum_k (1/n_k) sum_{i,i' in P_k} (y_ij - y_i'j)^2,
/// computed via the O(n) centroid identity. When K > 0 the labels must use
/// ids 0..K-1 with every cluster non-empty (EmptyCluster otherwise); with
/// K = 0 the clusters are inferred from the distinct labels.
Eigen::VectorXd bcss_per_variable(const DataMatrix& data,
                                  const std::vector<int>& labels, int K = 0);

/// Maximizer of w'a subject to w >= 0, ||w||_2 <= 1, ||w||_1 <= t:
/// soft-thresholding of the positive part of a, normalized to unit L2 norm,
/// with the threshold found by bisection on the L1 norm (tolerance 1e-8).
/// Throws AllNonpositive when a has no positive entry.
Eigen::VectorXd update_weights(const Eigen::VectorXd& a, double t);

struct SparseFit {
  std::vector<int> labels;
  Eigen::VectorXd w;
  double t = 0.0;
  double objective = 0.0;  // sum_j w_j a_j at the final state
  int n_iter = 0;          // weight/partition alternations
  std::vector<double> objective_trace;        // per alternation (record_trace)
  std::vector<Eigen::VectorXd> weight_trace;  // per alternation (record_trace)
};

struct SparseKMeansConfig {
  int max_iter = 15;   // alternations of clustering and weight updates
  int n_starts = 1;
  KMeansConfig inner;  // Lloyd solver used within each alternation
  std::uint64_t seed = 0;
  bool record_trace = false;
};

/// Alternates K-means on the sqrt(w)-scaled data (zero-weight columns
/// excluded) with the closed-form weight update, stopping when the relative
/// L1 change of w drops below 1e-4 or max_iter is reached. Best of n_starts
/// by final objective.
SparseFit sparse_kmeans_fit(const DataMatrix& data, int K, double t,
                            const SparseKMeansConfig& cfg);

struct GapCurve {
  std::vector<double> t_grid;
  std::vector<double> gap;
  std::vector<double> se;
  double chosen_t = 0.0;
};

struct TuneConfig {
  int n_perm = 25;
  SparseKMeansConfig fit;
};

/// Permutation gap statistic over the t grid: gap(t) is the real-data log
/// objective minus the mean log objective over datasets with independently
/// permuted columns; chosen_t maximizes the gap (ties to the smaller t).
GapCurve tune_t(const DataMatrix& data, int K, const std::vector<double>& t_grid,
                const TuneConfig& cfg);

/// Logarithmically spaced grid of `size` values in [1.1, sqrt(p)].
std::vector<double> default_t_grid(int p, int size = 10);

}  // namespace selclust
