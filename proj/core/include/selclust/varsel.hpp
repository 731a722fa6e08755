#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selclust/data.hpp"
#include "selclust/gmm.hpp"

namespace selclust {

/// Partition of the variable indices into relevant (S), redundant (U) and
/// independent (W) roles, plus the predictor subset R of S that explains U.
struct VariableRoles {
  std::vector<int> relevant;     // S, sorted, never empty
  std::vector<int> predictors;   // R, subset of S; empty iff U is empty
  std::vector<int> redundant;    // U, sorted
  std::vector<int> independent;  // W, sorted

  /// Throws Error unless S, U, W partition {0..p-1}, S is non-empty,
  /// R is a subset of S, and R is empty exactly when U is.
  void validate(int p) const;
};

enum class RegressionForm { Spherical, Diagonal, General };
enum class IndepForm { Spherical, Diagonal };

inline constexpr RegressionForm kAllRegressionForms[] = {
    RegressionForm::Spherical, RegressionForm::Diagonal,
    RegressionForm::General};
inline constexpr IndepForm kAllIndepForms[] = {IndepForm::Spherical,
                                               IndepForm::Diagonal};

std::string to_string(RegressionForm form);
std::string to_string(IndepForm form);

/// Linear regression block: y^U = a + y^R b + eps, eps ~ N(0, omega), with
/// omega constrained to the chosen form.
struct RegressionFit {
  Eigen::VectorXd a;      // |U|
  Eigen::MatrixXd b;      // |R| x |U|
  Eigen::MatrixXd omega;  // |U| x |U|
  RegressionForm form = RegressionForm::Diagonal;
  double loglik = 0.0;
  double bic = 0.0;
};

/// Independent Gaussian block: y^W ~ N(gamma, tau), tau diagonal (equal
/// entries under the spherical form).
struct IndepFit {
  Eigen::VectorXd gamma;  // |W|
  Eigen::MatrixXd tau;    // |W| x |W| diagonal
  IndepForm form = IndepForm::Diagonal;
  double loglik = 0.0;
  double bic = 0.0;
};

struct SelectedModel {
  VariableRoles roles;
  MixtureFit mixture;  // fitted on the relevant columns
  std::optional<RegressionFit> regression;
  std::optional<IndepFit> indep;
  double criterion = 0.0;  // sum of the block BICs
};

/// MLE of the regression block by least squares; the residual covariance is
/// projected to the requested form. An empty predictor set reduces to a
/// Gaussian fit of the redundant columns. Throws RankDeficient when
/// [1, y^R] loses full column rank and SingularOmega when the full residual
/// covariance is not positive definite under the general form.
RegressionFit fit_regression(const DataMatrix& data,
                             const std::vector<int>& redundant,
                             const std::vector<int>& predictors,
                             RegressionForm form);

IndepFit fit_indep(const DataMatrix& data, const std::vector<int>& independent,
                   IndepForm form);

/// Fits the three blocks on their column subsets and sums their BICs.
SelectedModel criterion(const DataMatrix& data, const VariableRoles& roles,
                        int K, CovarianceFamily family, RegressionForm form_r,
                        IndepForm form_l, const EmConfig& cfg);

struct PredictorSelection {
  std::vector<int> predictors;  // sorted, possibly empty
  RegressionForm form = RegressionForm::Diagonal;
  double bic = 0.0;
};

/// Backward stepwise predictor selection: starts from the full candidate
/// set and keeps dropping the predictor whose removal most improves the
/// regression BIC (each allowed form is scored and the best kept).
PredictorSelection select_predictors(const DataMatrix& data,
                                     const std::vector<int>& response,
                                     const std::vector<int>& candidates,
                                     const std::vector<RegressionForm>& forms);

/// One accepted state of the role search. The first step is the initial
/// all-relevant model. reg_bic scores the whole redundant block regressed
/// jointly on roles.predictors (the union of the per-variable predictor
/// sets) at the recorded form.
struct SearchStep {
  VariableRoles roles;
  std::map<int, std::vector<int>> u_predictors;
  double mix_bic = 0.0;
  double reg_bic = 0.0;
  double indep_bic = 0.0;
  double criterion = 0.0;
  int K = 0;
  CovarianceFamily family = CovarianceFamily::SphericalEqual;
  RegressionForm reg_form = RegressionForm::Diagonal;
  IndepForm indep_form = IndepForm::Spherical;
  int move_evaluations = 0;
};

struct RoleSearchConfig {
  std::vector<int> K_set;
  std::vector<CovarianceFamily> families;
  EmConfig em;
  /// Cheaper EM settings for candidate-move evaluation; the final model is
  /// always refit with `em`. Defaults to `em`.
  std::optional<EmConfig> move_em;
};

/// Seed used for the mixture fit on a given column subset. Exposed so that
/// callers can reproduce individual grid cells of a role search exactly.
std::uint64_t subset_seed(std::uint64_t base, const std::vector<int>& columns);

/// Backward stepwise search over variable roles. Starts from the
/// all-relevant model and applies one best role move per step while the
/// BIC-sum criterion strictly improves; re-inclusion moves are considered.
/// The mixture block is re-optimized over (K_set x families) at every
/// candidate relevant set. Throws SearchFailed when the initial all-relevant
/// model cannot be fit at any grid cell.
SelectedModel select_roles(const DataMatrix& data, const RoleSearchConfig& cfg,
                           std::vector<SearchStep>* steps = nullptr);

}  // namespace selclust
