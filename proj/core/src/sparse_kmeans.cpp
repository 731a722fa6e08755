#include "selclust/sparse_kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "selclust/errors.hpp"
#include "selclust/rng.hpp"

namespace selclust {

namespace {

// One assignment pass; returns the within-cluster sum of squares and fixes
// empty clusters by stealing the point farthest from its assigned centroid.
double assign(const Eigen::MatrixXd& data, const Eigen::VectorXd& row_sq,
              Eigen::MatrixXd& centers, std::vector<int>& labels) {
  const Eigen::Index n = data.rows();
  const int K = static_cast<int>(centers.rows());

  Eigen::MatrixXd dist = -2.0 * (data * centers.transpose());
  dist.colwise() += row_sq;
  dist.rowwise() += centers.rowwise().squaredNorm().transpose();

  labels.resize(n);
  Eigen::VectorXd best(n);
  std::vector<int> counts(K, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index k = 0;
    best[i] = dist.row(i).minCoeff(&k);
    labels[i] = static_cast<int>(k);
    ++counts[k];
  }

  for (int k = 0; k < K; ++k) {
    if (counts[k] > 0) continue;
    // Re-seed at the farthest point that is not the last member of its
    // cluster.
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (counts[labels[i]] < 2) continue;
      if (best[i] > far_d) {
        far_d = best[i];
        far = i;
      }
    }
    if (far < 0) throw EmptyCluster("cannot repopulate empty cluster");
    --counts[labels[far]];
    labels[far] = k;
    ++counts[k];
    centers.row(k) = data.row(far);
    best[far] = 0.0;
  }
  return best.cwiseMax(0.0).sum();
}

void recompute_centers(const Eigen::MatrixXd& data,
                       const std::vector<int>& labels, int K,
                       Eigen::MatrixXd& centers) {
  centers.setZero(K, data.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    centers.row(labels[i]) += data.row(i);
    counts[labels[i]] += 1.0;
  }
  for (int k = 0; k < K; ++k)
    if (counts[k] > 0.0) centers.row(k) /= counts[k];
}

KMeansResult lloyd(const Eigen::MatrixXd& data, Eigen::MatrixXd centers,
                   int max_iter) {
  const Eigen::VectorXd row_sq = data.rowwise().squaredNorm();
  const int K = static_cast<int>(centers.rows());
  KMeansResult res;
  std::vector<int> prev;
  for (int iter = 0; iter < max_iter; ++iter) {
    res.wcss = assign(data, row_sq, centers, res.labels);
    if (res.labels == prev) break;
    prev = res.labels;
    recompute_centers(data, res.labels, K, centers);
  }
  res.wcss = assign(data, row_sq, centers, res.labels);
  res.centers = std::move(centers);
  return res;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& data, int K, Rng& rng) {
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd centers(K, data.cols());
  centers.row(0) = data.row(rng.uniform_int(0, static_cast<int>(n) - 1));
  Eigen::VectorXd d2 =
      (data.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int k = 1; k < K; ++k) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(0, static_cast<int>(n) - 1);
    }
    centers.row(k) = data.row(pick);
    d2 = d2.cwiseMin(
        (data.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& data, int K, const KMeansConfig& cfg,
                    std::uint64_t seed) {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (data.rows() < K) throw ConfigError("fewer observations than clusters");

  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(derive_seed(seed, {0x4b4dU, static_cast<std::uint64_t>(r)}));
    KMeansResult res = lloyd(data, kmeanspp_init(data, K, rng), cfg.max_iter);
    if (res.wcss < best.wcss) best = std::move(res);
  }
  return best;
}

KMeansResult kmeans_refine(const Eigen::MatrixXd& data, int K,
                           const std::vector<int>& labels, int max_iter) {
  Eigen::MatrixXd centers;
  recompute_centers(data, labels, K, centers);
  return lloyd(data, std::move(centers), max_iter);
}

Eigen::VectorXd bcss_per_variable(const DataMatrix& data,
                                  const std::vector<int>& labels, int K) {
  const Eigen::Index n = data.n();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw LengthMismatch("label count does not match observation count");

  std::vector<int> compact(labels);
  int n_clusters = K;
  if (K == 0) {
    std::map<int, int> ids;
    for (int l : labels)
      ids.emplace(l, static_cast<int>(ids.size()));
    for (std::size_t i = 0; i < compact.size(); ++i)
      compact[i] = ids[labels[i]];
    n_clusters = static_cast<int>(ids.size());
  } else {
    for (int l : labels)
      if (l < 0 || l >= K) throw Error("label outside 0..K-1");
  }

  Eigen::MatrixXd cluster_sums =
      Eigen::MatrixXd::Zero(n_clusters, data.p());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_clusters);
  for (Eigen::Index i = 0; i < n; ++i) {
    cluster_sums.row(compact[i]) += data.values.row(i);
    counts[compact[i]] += 1.0;
  }
  if (counts.minCoeff() <= 0.0)
    throw EmptyCluster("a cluster has no observations");

  const Eigen::RowVectorXd total = data.values.colwise().sum();
  Eigen::RowVectorXd between =
      -(total.array().square() / static_cast<double>(n)).matrix();
  for (int k = 0; k < n_clusters; ++k)
    between += (cluster_sums.row(k).array().square() / counts[k]).matrix();
  return 2.0 * between.transpose();
}

Eigen::VectorXd update_weights(const Eigen::VectorXd& a, double t) {
  if (t < 1.0) throw ConfigError("L1 bound t must be >= 1");
  const Eigen::VectorXd pos = a.cwiseMax(0.0);
  const double a_max = pos.maxCoeff();
  if (a_max <= 0.0)
    throw AllNonpositive("no variable has positive between-cluster scatter");

  auto weights_at = [&](double delta) -> Eigen::VectorXd {
    Eigen::VectorXd s = (pos.array() - delta).cwiseMax(0.0);
    return s / s.norm();
  };

  Eigen::VectorXd w = weights_at(0.0);
  if (w.lpNorm<1>() <= t) return w;

  double lo = 0.0, hi = a_max * (1.0 - 1e-12);
  for (int iter = 0; iter < 300; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double l1 = weights_at(mid).lpNorm<1>();
    if (std::abs(l1 - t) <= 1e-8) return weights_at(mid);
    if (l1 > t)
      lo = mid;
    else
      hi = mid;
  }
  w = weights_at(hi);
  if (w.lpNorm<1>() > t + 1e-8) {
    // Exact ties at the maximum make the thresholded L1 norm jump past t;
    // fall back to the first maximal coordinate.
    Eigen::Index arg = 0;
    pos.maxCoeff(&arg);
    w.setZero();
    w[arg] = 1.0;
  }
  return w;
}

SparseFit sparse_kmeans_fit(const DataMatrix& data, int K, double t,
                            const SparseKMeansConfig& cfg) {
  data.validate();
  const Eigen::Index n = data.n();
  const int p = static_cast<int>(data.p());
  if (K < 2) throw ConfigError("sparse K-means needs K >= 2");
  if (n <= K) throw ConfigError("need more observations than clusters");
  if (t < 1.0 || t > std::sqrt(static_cast<double>(p)) + 1e-9)
    throw ConfigError("t must lie in [1, sqrt(p)]");

  SparseFit best;
  best.objective = -std::numeric_limits<double>::infinity();

  for (int s = 0; s < cfg.n_starts; ++s) {
    const std::uint64_t start_seed =
        derive_seed(cfg.seed, {0x534bU, static_cast<std::uint64_t>(s)});
    SparseFit fit;
    fit.t = t;
    fit.w = Eigen::VectorXd::Constant(p, 1.0 / std::sqrt(double(p)));

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
      std::vector<int> active;
      for (int j = 0; j < p; ++j)
        if (fit.w[j] > 0.0) active.push_back(j);
      Eigen::MatrixXd scaled(n, active.size());
      for (std::size_t j = 0; j < active.size(); ++j)
        scaled.col(j) =
            data.values.col(active[j]) * std::sqrt(fit.w[active[j]]);

      KMeansResult km =
          iter == 0 ? kmeans(scaled, K, cfg.inner, start_seed)
                    : kmeans_refine(scaled, K, fit.labels, cfg.inner.max_iter);
      fit.labels = km.labels;

      const Eigen::VectorXd a = bcss_per_variable(data, fit.labels, K);
      const Eigen::VectorXd w_new = update_weights(a, t);
      fit.objective = w_new.dot(a);
      fit.n_iter = iter + 1;
      if (cfg.record_trace) {
        fit.objective_trace.push_back(fit.objective);
        fit.weight_trace.push_back(w_new);
      }

      const double change =
          (w_new - fit.w).lpNorm<1>() / std::max(fit.w.lpNorm<1>(), 1e-300);
      fit.w = w_new;
      if (change < 1e-4) break;
    }

    if (fit.objective > best.objective) best = std::move(fit);
  }
  return best;
}

GapCurve tune_t(const DataMatrix& data, int K, const std::vector<double>& t_grid,
                const TuneConfig& cfg) {
  if (t_grid.empty()) throw ConfigError("t grid is empty");
  if (cfg.n_perm < 2) throw ConfigError("need at least two permutations");

  const Eigen::Index n = data.n();
  const int p = static_cast<int>(data.p());

  // Permuted datasets are shared across the grid; column shuffles draw from
  // per-(permutation, column) substreams.
  std::vector<DataMatrix> permuted(cfg.n_perm);
  for (int b = 0; b < cfg.n_perm; ++b) {
    permuted[b].values.resize(n, p);
    for (int j = 0; j < p; ++j) {
      std::vector<int> order(n);
      for (Eigen::Index i = 0; i < n; ++i) order[i] = static_cast<int>(i);
      Rng rng(derive_seed(cfg.fit.seed,
                          {0x5045U, static_cast<std::uint64_t>(b),
                           static_cast<std::uint64_t>(j)}));
      rng.shuffle(order);
      for (Eigen::Index i = 0; i < n; ++i)
        permuted[b].values(i, j) = data.values(order[i], j);
    }
  }

  GapCurve curve;
  curve.t_grid = t_grid;
  curve.gap.resize(t_grid.size());
  curve.se.resize(t_grid.size());

  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    SparseKMeansConfig fit_cfg = cfg.fit;
    fit_cfg.record_trace = false;
    fit_cfg.seed = derive_seed(cfg.fit.seed,
                               {0x5245U, static_cast<std::uint64_t>(i)});
    const double real_log =
        std::log(sparse_kmeans_fit(data, K, t_grid[i], fit_cfg).objective);

    Eigen::VectorXd perm_logs(cfg.n_perm);
    for (int b = 0; b < cfg.n_perm; ++b) {
      fit_cfg.seed = derive_seed(cfg.fit.seed,
                                 {0x5042U, static_cast<std::uint64_t>(b),
                                  static_cast<std::uint64_t>(i)});
      perm_logs[b] =
          std::log(sparse_kmeans_fit(permuted[b], K, t_grid[i], fit_cfg)
                       .objective);
    }
    const double mean = perm_logs.mean();
    const double sd = std::sqrt((perm_logs.array() - mean).square().mean());
    curve.gap[i] = real_log - mean;
    curve.se[i] = sd * std::sqrt(1.0 + 1.0 / cfg.n_perm);
  }

  std::size_t arg = 0;
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (curve.gap[i] > curve.gap[arg] ||
        (curve.gap[i] == curve.gap[arg] && t_grid[i] < t_grid[arg]))
      arg = i;
  curve.chosen_t = t_grid[arg];
  return curve;
}

std::vector<double> default_t_grid(int p, int size) {
  const double hi = std::sqrt(static_cast<double>(p));
  const double lo = std::min(1.1, hi);
  std::vector<double> grid(size);
  if (size == 1) {
    grid[0] = hi;
    return grid;
  }
  const double step = (std::log(hi) - std::log(lo)) / (size - 1);
  for (int i = 0; i < size; ++i) grid[i] = std::exp(std::log(lo) + i * step);
  return grid;
}

}  // namespace selclust
