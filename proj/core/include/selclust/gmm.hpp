#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selclust/data.hpp"

namespace selclust {

/// Structural constraints on the component covariance matrices. The three
/// full forms are the EEE / VEE / VVV models of the usual volume-shape-
/// orientation decomposition; the spherical and diagonal forms are their
/// axis-aligned counterparts.
enum class CovarianceFamily {
  SphericalEqual,             // lambda * I, shared
  SphericalVarying,           // lambda_k * I
  DiagonalEqual,              // diag(v), shared
  DiagonalVarying,            // diag(v_k)
  FullEqual,                  // EEE: one full matrix, shared
  FullEqualShapeOrientation,  // VEE: c_k * C with det(C) = 1
  FullVarying,                // VVV: unrestricted per component
};

inline constexpr CovarianceFamily kAllFamilies[] = {
    CovarianceFamily::SphericalEqual,
    CovarianceFamily::SphericalVarying,
    CovarianceFamily::DiagonalEqual,
    CovarianceFamily::DiagonalVarying,
    CovarianceFamily::FullEqual,
    CovarianceFamily::FullEqualShapeOrientation,
    CovarianceFamily::FullVarying,
};

std::string to_string(CovarianceFamily family);
std::optional<CovarianceFamily> family_from_string(std::string_view name);

/// Free parameters of a K-component mixture in dimension p:
/// (K-1) mixing proportions + K*p means + covariance parameters.
int param_count(int K, int p, CovarianceFamily family);

struct EmConfig {
  int n_starts = 0;    // 0 = automatic: 10 for K <= 10, else 20
  double tol = 1e-6;   // relative log-likelihood change
  int max_iter = 500;
  std::uint64_t seed = 0;
  bool record_traces = false;  // keep per-start log-likelihood paths

  int resolved_starts(int K) const {
    if (n_starts > 0) return n_starts;
    return K <= 10 ? 10 : 20;
  }
};

struct MixtureFit {
  int K = 0;
  CovarianceFamily family = CovarianceFamily::SphericalEqual;
  Eigen::VectorXd pi;                  // K
  Eigen::MatrixXd mu;                  // K x p
  std::vector<Eigen::MatrixXd> sigma;  // K matrices, each p x p
  double loglik = 0.0;
  double bic = 0.0;                    // 2*loglik - nu*log(n)
  Eigen::MatrixXd resp;                // n x K, rows sum to 1
  std::vector<int> labels;             // 0-based argmax of each resp row
  std::vector<std::vector<double>> traces;  // filled when record_traces

  Eigen::Index p() const { return mu.cols(); }
};

/// Multi-start EM. The best start by final log-likelihood wins (ties go to
/// the lower start index). Throws SingularData when n <= K or a data column
/// has zero variance under a family that needs per-column variance, and
/// DegenerateFit when every start collapses.
MixtureFit em_fit(const DataMatrix& data, int K, CovarianceFamily family,
                  const EmConfig& cfg);

/// BIC of a fit rescored at sample size n (maximization convention).
double bic_mixture(const MixtureFit& fit, Eigen::Index n);

/// Best fit over the (K_set x families) grid by BIC; ties prefer fewer
/// parameters, then smaller K. Propagates a fitting error only when every
/// grid cell fails.
MixtureFit best_mixture(const DataMatrix& data, const std::vector<int>& K_set,
                        const std::vector<CovarianceFamily>& families,
                        const EmConfig& cfg);

}  // namespace selclust
