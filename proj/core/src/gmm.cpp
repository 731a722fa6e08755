#include "selclust/gmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "selclust/errors.hpp"
#include "selclust/rng.hpp"

namespace selclust {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr int kMaxFloorTriggers = 50;
constexpr int kVeeInnerIters = 20;

bool is_spherical(CovarianceFamily f) {
  return f == CovarianceFamily::SphericalEqual ||
         f == CovarianceFamily::SphericalVarying;
}

bool is_diagonal(CovarianceFamily f) {
  return f == CovarianceFamily::DiagonalEqual ||
         f == CovarianceFamily::DiagonalVarying;
}

bool is_full(CovarianceFamily f) { return !is_spherical(f) && !is_diagonal(f); }

// Compact covariance state; only the block matching the family is used.
struct CovState {
  Eigen::VectorXd spherical;           // K (lambda_k)
  Eigen::MatrixXd diagonal;            // K x p (v_k)
  std::vector<Eigen::MatrixXd> full;   // K matrices (EEE stores copies)
  Eigen::VectorXd vee_volume;          // K (c_k), VEE only
  Eigen::MatrixXd vee_shape;           // p x p with det 1, VEE only
};

struct StartOutcome {
  bool collapsed = false;
  double loglik = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd pi;
  Eigen::MatrixXd mu;
  CovState cov;
  Eigen::MatrixXd resp;
  std::vector<double> trace;
};

// Raises the smallest eigenvalue of a full matrix to at least floor.
void lift_full(Eigen::MatrixXd& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < floor) {
    const double shift = floor + std::max(0.0, -min_eig);
    m.diagonal().array() += shift;
  }
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

class EmEngine {
 public:
  EmEngine(const Eigen::MatrixXd& y, int K, CovarianceFamily family,
           const EmConfig& cfg)
      : y_(y),
        n_(y.rows()),
        p_(y.cols()),
        K_(K),
        family_(family),
        cfg_(cfg) {
    y_sq_ = y_.array().square();
    row_sq_ = y_sq_.rowwise().sum();

    global_mean_ = y_.colwise().mean();
    Eigen::MatrixXd centered = y_.rowwise() - global_mean_.transpose();
    global_cov_ = centered.transpose() * centered / static_cast<double>(n_);
    floor_ = 1e-6 * global_cov_.diagonal().mean();
  }

  double variance_floor() const { return floor_; }
  const Eigen::MatrixXd& global_cov() const { return global_cov_; }

  StartOutcome run_start(const std::vector<int>& init_rows) {
    StartOutcome out;
    floor_triggers_ = 0;

    Eigen::VectorXd pi = Eigen::VectorXd::Constant(K_, 1.0 / K_);
    Eigen::MatrixXd mu(K_, p_);
    for (int k = 0; k < K_; ++k) mu.row(k) = y_.row(init_rows[k]);
    CovState cov = init_cov();

    Eigen::MatrixXd logdens(n_, K_);
    Eigen::MatrixXd resp(n_, K_);
    double prev_ll = -std::numeric_limits<double>::infinity();
    double ll = prev_ll;

    for (int iter = 0; iter <= cfg_.max_iter; ++iter) {
      component_log_density(mu, cov, logdens);
      for (int k = 0; k < K_; ++k)
        logdens.col(k).array() += std::log(pi[k]);
      ll = normalize_resp(logdens, resp);
      out.trace.push_back(ll);

      const bool converged =
          iter > 0 && std::abs(ll - prev_ll) <=
                          cfg_.tol * (std::abs(prev_ll) + 1e-12);
      if (converged || iter == cfg_.max_iter) break;
      prev_ll = ll;

      if (!m_step(resp, pi, mu, cov)) {
        out.collapsed = true;
        return out;
      }
      if (floor_triggers_ > kMaxFloorTriggers) {
        out.collapsed = true;
        return out;
      }
    }

    out.loglik = ll;
    out.pi = std::move(pi);
    out.mu = std::move(mu);
    out.cov = std::move(cov);
    out.resp = std::move(resp);
    return out;
  }

  std::vector<Eigen::MatrixXd> materialize_sigma(const CovState& cov) const {
    std::vector<Eigen::MatrixXd> sigma(K_);
    for (int k = 0; k < K_; ++k) {
      if (is_spherical(family_)) {
        sigma[k] = cov.spherical[k] *
                   Eigen::MatrixXd::Identity(p_, p_);
      } else if (is_diagonal(family_)) {
        sigma[k] = cov.diagonal.row(k).asDiagonal();
      } else if (family_ == CovarianceFamily::FullEqualShapeOrientation) {
        sigma[k] = cov.vee_volume[k] * cov.vee_shape;
      } else {
        sigma[k] = cov.full[k];
      }
    }
    return sigma;
  }

 private:
  CovState init_cov() const {
    CovState cov;
    switch (family_) {
      case CovarianceFamily::SphericalEqual:
      case CovarianceFamily::SphericalVarying: {
        double lambda = std::max(global_cov_.diagonal().mean(), floor_);
        cov.spherical = Eigen::VectorXd::Constant(K_, lambda);
        break;
      }
      case CovarianceFamily::DiagonalEqual:
      case CovarianceFamily::DiagonalVarying: {
        Eigen::VectorXd v = global_cov_.diagonal().cwiseMax(floor_);
        cov.diagonal = v.transpose().replicate(K_, 1);
        break;
      }
      case CovarianceFamily::FullEqualShapeOrientation: {
        Eigen::MatrixXd c = global_cov_;
        lift_full(c, floor_);
        Eigen::LLT<Eigen::MatrixXd> llt(c);
        const double logdet =
            2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        const double volume = std::exp(logdet / p_);
        cov.vee_shape = c / volume;
        cov.vee_volume = Eigen::VectorXd::Constant(K_, volume);
        break;
      }
      default: {
        Eigen::MatrixXd c = global_cov_;
        lift_full(c, floor_);
        cov.full.assign(K_, c);
        break;
      }
    }
    return cov;
  }

  void component_log_density(const Eigen::MatrixXd& mu, const CovState& cov,
                             Eigen::MatrixXd& logdens) const {
    if (is_spherical(family_)) {
      for (int k = 0; k < K_; ++k) {
        const double lambda = cov.spherical[k];
        Eigen::VectorXd sq = row_sq_ - 2.0 * (y_ * mu.row(k).transpose());
        sq.array() += mu.row(k).squaredNorm();
        logdens.col(k) =
            -0.5 * (p_ * (kLog2Pi + std::log(lambda)) +
                    (sq.array() / lambda)).matrix();
      }
      return;
    }
    if (is_diagonal(family_)) {
      for (int k = 0; k < K_; ++k) {
        const Eigen::ArrayXd v = cov.diagonal.row(k).transpose().array();
        const Eigen::VectorXd inv_v = (1.0 / v).matrix();
        const Eigen::VectorXd mu_over_v =
            (mu.row(k).transpose().array() / v).matrix();
        const double c0 = 0.5 * ((kLog2Pi + v.log()).sum() +
                                 (mu.row(k).transpose().array().square() / v).sum());
        logdens.col(k) = -(0.5 * (y_sq_.matrix() * inv_v) - y_ * mu_over_v)
                              .array() - c0;
      }
      return;
    }
    // Full families: Cholesky-based Mahalanobis distances.
    Eigen::MatrixXd centered(n_, p_);
    if (family_ == CovarianceFamily::FullEqualShapeOrientation) {
      Eigen::LLT<Eigen::MatrixXd> llt(cov.vee_shape);
      for (int k = 0; k < K_; ++k) {
        const double c_k = cov.vee_volume[k];
        centered = y_.rowwise() - mu.row(k);
        Eigen::MatrixXd z =
            llt.matrixL().solve(centered.transpose());  // det(shape) = 1
        logdens.col(k) =
            -0.5 * (p_ * (kLog2Pi + std::log(c_k)) +
                    z.colwise().squaredNorm().transpose().array() / c_k)
                       .matrix();
      }
      return;
    }
    for (int k = 0; k < K_; ++k) {
      Eigen::LLT<Eigen::MatrixXd> llt(cov.full[k]);
      const double logdet =
          2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      centered = y_.rowwise() - mu.row(k);
      Eigen::MatrixXd z = llt.matrixL().solve(centered.transpose());
      logdens.col(k) =
          -0.5 * (p_ * kLog2Pi + logdet +
                  z.colwise().squaredNorm().transpose().array())
                     .matrix();
    }
  }

  // Row-wise log-sum-exp normalization; returns the observed log-likelihood.
  static double normalize_resp(const Eigen::MatrixXd& logdens,
                               Eigen::MatrixXd& resp) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < logdens.rows(); ++i) {
      const double m = logdens.row(i).maxCoeff();
      const double lse = m + std::log((logdens.row(i).array() - m).exp().sum());
      ll += lse;
      resp.row(i) = (logdens.row(i).array() - lse).exp();
      resp.row(i) /= resp.row(i).sum();
    }
    return ll;
  }

  bool m_step(const Eigen::MatrixXd& resp, Eigen::VectorXd& pi,
              Eigen::MatrixXd& mu, CovState& cov) {
    const Eigen::VectorXd n_k = resp.colwise().sum();
    if (n_k.minCoeff() < 1e-8) return false;  // component lost all mass
    pi = n_k / static_cast<double>(n_);

    mu = resp.transpose() * y_;
    mu.array().colwise() /= n_k.array();

    if (is_spherical(family_) || is_diagonal(family_)) {
      // Weighted scatter diagonals: d_k = resp_k' y^2 - n_k mu_k^2.
      Eigen::MatrixXd d = resp.transpose() * y_sq_.matrix();
      d.array() -= mu.array().square().colwise() * n_k.array();
      d = d.cwiseMax(0.0);

      switch (family_) {
        case CovarianceFamily::SphericalEqual: {
          double lambda = d.sum() / static_cast<double>(n_ * p_);
          if (lambda < floor_) {
            lambda += floor_;
            ++floor_triggers_;
          }
          cov.spherical.setConstant(lambda);
          break;
        }
        case CovarianceFamily::SphericalVarying: {
          for (int k = 0; k < K_; ++k) {
            double lambda = d.row(k).sum() / (n_k[k] * p_);
            if (lambda < floor_) {
              lambda += floor_;
              ++floor_triggers_;
            }
            cov.spherical[k] = lambda;
          }
          break;
        }
        case CovarianceFamily::DiagonalEqual: {
          Eigen::VectorXd v =
              d.colwise().sum().transpose() / static_cast<double>(n_);
          if (v.minCoeff() < floor_) {
            v.array() += floor_;
            ++floor_triggers_;
          }
          cov.diagonal = v.transpose().replicate(K_, 1);
          break;
        }
        default: {  // DiagonalVarying
          for (int k = 0; k < K_; ++k) {
            Eigen::VectorXd v = d.row(k).transpose() / n_k[k];
            if (v.minCoeff() < floor_) {
              v.array() += floor_;
              ++floor_triggers_;
            }
            cov.diagonal.row(k) = v.transpose();
          }
          break;
        }
      }
      return true;
    }

    // Full families need the component scatter matrices.
    std::vector<Eigen::MatrixXd> scatter(K_);
    for (int k = 0; k < K_; ++k) {
      Eigen::MatrixXd weighted =
          y_.array().colwise() * resp.col(k).array();
      scatter[k] = y_.transpose() * weighted.matrix() -
                   n_k[k] * mu.row(k).transpose() * mu.row(k);
      scatter[k] = 0.5 * (scatter[k] + scatter[k].transpose());
    }

    switch (family_) {
      case CovarianceFamily::FullEqual: {
        Eigen::MatrixXd s = scatter[0];
        for (int k = 1; k < K_; ++k) s += scatter[k];
        s /= static_cast<double>(n_);
        if (min_eigenvalue(s) < floor_) {
          lift_full(s, floor_);
          ++floor_triggers_;
        }
        cov.full.assign(K_, s);
        break;
      }
      case CovarianceFamily::FullVarying: {
        for (int k = 0; k < K_; ++k) {
          Eigen::MatrixXd s = scatter[k] / n_k[k];
          if (min_eigenvalue(s) < floor_) {
            lift_full(s, floor_);
            ++floor_triggers_;
          }
          cov.full[k] = s;
        }
        break;
      }
      default: {  // VEE: alternate volume and shared-shape updates.
        Eigen::VectorXd c = cov.vee_volume;
        Eigen::MatrixXd shape = cov.vee_shape;
        for (int inner = 0; inner < kVeeInnerIters; ++inner) {
          Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p_, p_);
          for (int k = 0; k < K_; ++k) m += scatter[k] / c[k];
          if (min_eigenvalue(m) < floor_) {
            lift_full(m, floor_);
            ++floor_triggers_;
          }
          Eigen::LLT<Eigen::MatrixXd> llt(m);
          const double logdet =
              2.0 *
              llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
          shape = m * std::exp(-logdet / p_);

          Eigen::LLT<Eigen::MatrixXd> shape_llt(shape);
          double max_rel = 0.0;
          for (int k = 0; k < K_; ++k) {
            double c_new =
                shape_llt.solve(scatter[k]).trace() / (p_ * n_k[k]);
            if (!(c_new > 0.0) || !std::isfinite(c_new)) return false;
            max_rel = std::max(max_rel, std::abs(c_new - c[k]) /
                                            (std::abs(c[k]) + 1e-300));
            c[k] = c_new;
          }
          if (max_rel < 1e-8) break;
        }
        const double shape_min_eig = min_eigenvalue(shape);
        for (int k = 0; k < K_; ++k) {
          if (c[k] * shape_min_eig < floor_) {
            c[k] = floor_ / shape_min_eig;
            ++floor_triggers_;
          }
        }
        cov.vee_volume = c;
        cov.vee_shape = shape;
        break;
      }
    }
    return true;
  }

  const Eigen::MatrixXd& y_;
  Eigen::Index n_, p_;
  int K_;
  CovarianceFamily family_;
  EmConfig cfg_;

  Eigen::ArrayXXd y_sq_;
  Eigen::VectorXd row_sq_;
  Eigen::VectorXd global_mean_;
  Eigen::MatrixXd global_cov_;
  double floor_ = 0.0;
  int floor_triggers_ = 0;
};

}  // namespace

std::string to_string(CovarianceFamily family) {
  switch (family) {
    case CovarianceFamily::SphericalEqual: return "spherical_equal";
    case CovarianceFamily::SphericalVarying: return "spherical_varying";
    case CovarianceFamily::DiagonalEqual: return "diagonal_equal";
    case CovarianceFamily::DiagonalVarying: return "diagonal_varying";
    case CovarianceFamily::FullEqual: return "eee";
    case CovarianceFamily::FullEqualShapeOrientation: return "vee";
    case CovarianceFamily::FullVarying: return "vvv";
  }
  return "unknown";
}

std::optional<CovarianceFamily> family_from_string(std::string_view name) {
  for (CovarianceFamily f : kAllFamilies)
    if (to_string(f) == name) return f;
  return std::nullopt;
}

int param_count(int K, int p, CovarianceFamily family) {
  int cov = 0;
  switch (family) {
    case CovarianceFamily::SphericalEqual: cov = 1; break;
    case CovarianceFamily::SphericalVarying: cov = K; break;
    case CovarianceFamily::DiagonalEqual: cov = p; break;
    case CovarianceFamily::DiagonalVarying: cov = K * p; break;
    case CovarianceFamily::FullEqual: cov = p * (p + 1) / 2; break;
    case CovarianceFamily::FullEqualShapeOrientation:
      cov = p * (p + 1) / 2 + (K - 1);
      break;
    case CovarianceFamily::FullVarying: cov = K * p * (p + 1) / 2; break;
  }
  return (K - 1) + K * p + cov;
}

MixtureFit em_fit(const DataMatrix& data, int K, CovarianceFamily family,
                  const EmConfig& cfg) {
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  if (K < 1) throw ConfigError("K must be >= 1");
  if (n <= K) throw SingularData("need more observations than components");

  // Zero-variance columns break any family with per-column variance terms;
  // under spherical forms only an all-constant matrix is unusable.
  const Eigen::RowVectorXd mean = data.values.colwise().mean();
  const Eigen::RowVectorXd var =
      (data.values.rowwise() - mean).array().square().colwise().mean();
  if (is_spherical(family)) {
    if (var.maxCoeff() <= 0.0)
      throw SingularData("all columns are constant");
  } else if (var.minCoeff() <= 0.0) {
    throw SingularData("zero-variance column under family " +
                       to_string(family));
  }

  EmEngine engine(data.values, K, family, cfg);
  const int n_starts = K == 1 ? 1 : cfg.resolved_starts(K);

  StartOutcome best;
  bool any_ok = false;
  std::vector<std::vector<double>> traces;
  for (int s = 0; s < n_starts; ++s) {
    Rng rng(derive_seed(cfg.seed, {0x5354u, static_cast<std::uint64_t>(s)}));
    const std::vector<int> rows =
        rng.sample_without_replacement(static_cast<int>(n), K);
    StartOutcome out = engine.run_start(rows);
    if (out.collapsed) continue;
    if (cfg.record_traces) traces.push_back(out.trace);
    if (!any_ok || out.loglik > best.loglik) {
      best = std::move(out);
      any_ok = true;
    }
  }
  if (!any_ok)
    throw DegenerateFit("every EM start collapsed (K=" + std::to_string(K) +
                        ", family=" + to_string(family) + ")");

  MixtureFit fit;
  fit.K = K;
  fit.family = family;
  fit.pi = std::move(best.pi);
  fit.mu = std::move(best.mu);
  fit.sigma = engine.materialize_sigma(best.cov);
  fit.loglik = best.loglik;
  fit.resp = std::move(best.resp);
  fit.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index arg = 0;
    fit.resp.row(i).maxCoeff(&arg);
    fit.labels[i] = static_cast<int>(arg);
  }
  fit.bic = 2.0 * fit.loglik -
            param_count(K, static_cast<int>(p), family) *
                std::log(static_cast<double>(n));
  fit.traces = std::move(traces);
  return fit;
}

double bic_mixture(const MixtureFit& fit, Eigen::Index n) {
  return 2.0 * fit.loglik -
         param_count(fit.K, static_cast<int>(fit.p()), fit.family) *
             std::log(static_cast<double>(n));
}

MixtureFit best_mixture(const DataMatrix& data, const std::vector<int>& K_set,
                        const std::vector<CovarianceFamily>& families,
                        const EmConfig& cfg) {
  if (K_set.empty() || families.empty())
    throw ConfigError("best_mixture needs a non-empty model grid");

  bool have_best = false;
  MixtureFit best;
  int best_nu = 0;
  std::exception_ptr degenerate, other;
  for (int K : K_set) {
    for (CovarianceFamily family : families) {
      EmConfig cell_cfg = cfg;
      cell_cfg.seed = derive_seed(
          cfg.seed, {static_cast<std::uint64_t>(K),
                     static_cast<std::uint64_t>(family)});
      MixtureFit fit;
      try {
        fit = em_fit(data, K, family, cell_cfg);
      } catch (const DegenerateFit&) {
        degenerate = std::current_exception();
        continue;
      } catch (const SingularData&) {
        other = std::current_exception();
        continue;
      }
      const int nu = param_count(K, static_cast<int>(data.p()), family);
      const bool better =
          !have_best || fit.bic > best.bic ||
          (fit.bic == best.bic &&
           (nu < best_nu || (nu == best_nu && fit.K < best.K)));
      if (better) {
        best = std::move(fit);
        best_nu = nu;
        have_best = true;
      }
    }
  }
  if (!have_best) {
    if (degenerate) std::rethrow_exception(degenerate);
    if (other) std::rethrow_exception(other);
    throw DegenerateFit("no grid cell produced a fit");
  }
  return best;
}

}  // namespace selclust
