#include "selclust/varsel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "selclust/errors.hpp"
#include "selclust/rng.hpp"

namespace selclust {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kVarFloor = 1e-8;  // residual / independent variance floor

bool contains(const std::vector<int>& sorted, int x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

std::vector<int> without(const std::vector<int>& sorted, int x) {
  std::vector<int> out;
  out.reserve(sorted.size());
  for (int v : sorted)
    if (v != x) out.push_back(v);
  return out;
}

std::vector<int> with(const std::vector<int>& sorted, int x) {
  std::vector<int> out = sorted;
  out.insert(std::upper_bound(out.begin(), out.end(), x), x);
  return out;
}

int omega_params(RegressionForm form, int u) {
  switch (form) {
    case RegressionForm::Spherical: return 1;
    case RegressionForm::Diagonal: return u;
    case RegressionForm::General: return u * (u + 1) / 2;
  }
  return 0;
}

// Gaussian log-likelihood of an n-sample residual block whose MLE residual
// covariance is s_hat, evaluated at the form-projected (and floored)
// covariance. Returns false for a general form that is not positive definite.
bool block_loglik(const Eigen::MatrixXd& s_hat, double n, RegressionForm form,
                  double& loglik, Eigen::MatrixXd* omega = nullptr) {
  const int u = static_cast<int>(s_hat.rows());
  switch (form) {
    case RegressionForm::Spherical: {
      const double s2 = std::max(s_hat.trace() / u, kVarFloor);
      loglik = -0.5 * (n * u * (kLog2Pi + std::log(s2)) +
                       n * s_hat.trace() / s2);
      if (omega) *omega = s2 * Eigen::MatrixXd::Identity(u, u);
      return true;
    }
    case RegressionForm::Diagonal: {
      const Eigen::VectorXd v = s_hat.diagonal().cwiseMax(kVarFloor);
      loglik = 0.0;
      for (int j = 0; j < u; ++j)
        loglik -= 0.5 * (n * (kLog2Pi + std::log(v[j])) +
                         n * s_hat(j, j) / v[j]);
      if (omega) *omega = v.asDiagonal();
      return true;
    }
    case RegressionForm::General: {
      Eigen::LLT<Eigen::MatrixXd> llt(s_hat);
      if (llt.info() != Eigen::Success) return false;
      const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
      if (diag.minCoeff() <= 0.0) return false;
      const double logdet = 2.0 * diag.array().log().sum();
      loglik = -0.5 * n * (u * kLog2Pi + logdet + u);
      if (omega) *omega = s_hat;
      return true;
    }
  }
  return false;
}

double reg_bic_from(double loglik, int u, int q, RegressionForm form, double n) {
  const int nu = u * (1 + q) + omega_params(form, u);
  return 2.0 * loglik - nu * std::log(n);
}

std::string subset_key(const std::vector<int>& v) {
  std::string key;
  for (int x : v) {
    key += std::to_string(x);
    key += ',';
  }
  return key;
}

}  // namespace

std::string to_string(RegressionForm form) {
  switch (form) {
    case RegressionForm::Spherical: return "spherical";
    case RegressionForm::Diagonal: return "diagonal";
    case RegressionForm::General: return "general";
  }
  return "unknown";
}

std::string to_string(IndepForm form) {
  return form == IndepForm::Spherical ? "spherical" : "diagonal";
}

void VariableRoles::validate(int p) const {
  if (relevant.empty()) throw Error("relevant set must be non-empty");
  std::vector<char> seen(p, 0);
  auto mark = [&](const std::vector<int>& set, const char* name) {
    for (int j : set) {
      if (j < 0 || j >= p)
        throw Error(std::string(name) + " index out of range");
      if (seen[j]) throw Error("variable roles overlap");
      seen[j] = 1;
    }
  };
  mark(relevant, "relevant");
  mark(redundant, "redundant");
  mark(independent, "independent");
  for (int j = 0; j < p; ++j)
    if (!seen[j]) throw Error("variable roles do not cover all variables");
  for (int j : predictors)
    if (!contains(relevant, j))
      throw Error("predictors must be relevant variables");
  if (predictors.empty() != redundant.empty())
    throw Error("predictors are empty exactly when redundant set is");
}

RegressionFit fit_regression(const DataMatrix& data,
                             const std::vector<int>& redundant,
                             const std::vector<int>& predictors,
                             RegressionForm form) {
  if (redundant.empty()) throw Error("regression needs a non-empty response");
  const Eigen::Index n = data.n();
  const int q = static_cast<int>(predictors.size());
  const int u = static_cast<int>(redundant.size());
  if (n <= q + 1)
    throw RankDeficient("too few observations for the predictor count");

  Eigen::MatrixXd x(n, q + 1);
  x.col(0).setOnes();
  for (int j = 0; j < q; ++j) x.col(j + 1) = data.values.col(predictors[j]);
  Eigen::MatrixXd y(n, u);
  for (int j = 0; j < u; ++j) y.col(j) = data.values.col(redundant[j]);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < q + 1)
    throw RankDeficient("design matrix is rank deficient");
  Eigen::MatrixXd coef = qr.solve(y);

  Eigen::MatrixXd resid = y - x * coef;
  Eigen::MatrixXd s_hat = resid.transpose() * resid / static_cast<double>(n);
  s_hat = 0.5 * (s_hat + s_hat.transpose());

  RegressionFit fit;
  fit.a = coef.row(0).transpose();
  fit.b = coef.bottomRows(q);
  fit.form = form;
  if (!block_loglik(s_hat, static_cast<double>(n), form, fit.loglik,
                    &fit.omega))
    throw SingularOmega("residual covariance is not positive definite");
  fit.bic = reg_bic_from(fit.loglik, u, q, form, static_cast<double>(n));
  return fit;
}

IndepFit fit_indep(const DataMatrix& data, const std::vector<int>& independent,
                   IndepForm form) {
  if (independent.empty()) throw Error("independent set must be non-empty");
  const Eigen::Index n = data.n();
  if (n < 2) throw Error("independent fit needs at least two observations");
  const int w = static_cast<int>(independent.size());

  IndepFit fit;
  fit.form = form;
  fit.gamma.resize(w);
  Eigen::VectorXd var(w);
  for (int j = 0; j < w; ++j) {
    const Eigen::VectorXd col = data.values.col(independent[j]);
    fit.gamma[j] = col.mean();
    var[j] = (col.array() - fit.gamma[j]).square().mean();
  }

  const double dn = static_cast<double>(n);
  double loglik = 0.0;
  Eigen::VectorXd tau_diag(w);
  if (form == IndepForm::Spherical) {
    const double v = std::max(var.mean(), kVarFloor);
    tau_diag.setConstant(v);
    for (int j = 0; j < w; ++j)
      loglik -= 0.5 * (dn * (kLog2Pi + std::log(v)) + dn * var[j] / v);
  } else {
    for (int j = 0; j < w; ++j) {
      const double v = std::max(var[j], kVarFloor);
      tau_diag[j] = v;
      loglik -= 0.5 * (dn * (kLog2Pi + std::log(v)) + dn * var[j] / v);
    }
  }
  fit.tau = tau_diag.asDiagonal();
  fit.loglik = loglik;
  const int nu = w + (form == IndepForm::Spherical ? 1 : w);
  fit.bic = 2.0 * loglik - nu * std::log(dn);
  return fit;
}

SelectedModel criterion(const DataMatrix& data, const VariableRoles& roles,
                        int K, CovarianceFamily family, RegressionForm form_r,
                        IndepForm form_l, const EmConfig& cfg) {
  roles.validate(static_cast<int>(data.p()));

  SelectedModel model;
  model.roles = roles;
  model.mixture = em_fit(data.select_columns(roles.relevant), K, family, cfg);
  model.criterion = model.mixture.bic;
  if (!roles.redundant.empty()) {
    model.regression =
        fit_regression(data, roles.redundant, roles.predictors, form_r);
    model.criterion += model.regression->bic;
  }
  if (!roles.independent.empty()) {
    model.indep = fit_indep(data, roles.independent, form_l);
    model.criterion += model.indep->bic;
  }
  return model;
}

namespace {

// Backward elimination engine over the Gram matrix of [1, candidates].
// Drop-one residual matrices come from the rank-one identity
//   RSS(-r) = RSS + beta_r beta_r' / [(X'X)^{-1}]_rr,
// so one factorization per elimination step scores every drop.
class GramSelector {
 public:
  GramSelector(const DataMatrix& data, const std::vector<int>& response,
               const std::vector<int>& candidates,
               const std::vector<RegressionForm>& forms)
      : n_(static_cast<double>(data.n())),
        u_(static_cast<int>(response.size())),
        q0_(static_cast<int>(candidates.size())),
        forms_(forms) {
    Eigen::MatrixXd x(data.n(), q0_ + 1);
    x.col(0).setOnes();
    for (int j = 0; j < q0_; ++j)
      x.col(j + 1) = data.values.col(candidates[j]);
    Eigen::MatrixXd y(data.n(), u_);
    for (int j = 0; j < u_; ++j) y.col(j) = data.values.col(response[j]);
    gram_ = x.transpose() * x;
    cross_ = x.transpose() * y;
    yy_ = y.transpose() * y;
  }

  // Returns positions (into the candidate list) of the kept predictors.
  std::vector<int> run(RegressionForm& best_form, double& best_bic) {
    std::vector<int> active(q0_);
    for (int j = 0; j < q0_; ++j) active[j] = j;

    Eigen::MatrixXd inv, coef, rss;
    factorize(active, inv, coef, rss, /*initial=*/true);
    double cur_bic;
    RegressionForm cur_form;
    score(rss, static_cast<int>(active.size()), cur_bic, cur_form);

    while (!active.empty()) {
      int best_drop = -1;
      double drop_bic = cur_bic;
      RegressionForm drop_form = cur_form;
      Eigen::LLT<Eigen::MatrixXd> rss_llt(rss / n_);
      const bool have_llt = rss_llt.info() == Eigen::Success;
      double logdet = 0.0;
      if (have_llt)
        logdet = 2.0 * rss_llt.matrixL()
                           .toDenseMatrix()
                           .diagonal()
                           .array()
                           .log()
                           .sum();

      for (std::size_t pos = 0; pos < active.size(); ++pos) {
        const int row = static_cast<int>(pos) + 1;  // skip intercept
        const double d = inv(row, row);
        if (!(d > 0.0)) continue;
        const Eigen::VectorXd beta = coef.row(row).transpose();
        const Eigen::VectorXd bump = beta / std::sqrt(d * n_);
        // Summary statistics of the dropped-term residual covariance.
        const double tr = rss.trace() / n_ + bump.squaredNorm();
        double cand_bic = -std::numeric_limits<double>::infinity();
        RegressionForm cand_form = RegressionForm::Spherical;
        const int q = static_cast<int>(active.size()) - 1;
        for (RegressionForm form : forms_) {
          double ll;
          if (form == RegressionForm::Spherical) {
            const double s2 = std::max(tr / u_, kVarFloor);
            ll = -0.5 * (n_ * u_ * (kLog2Pi + std::log(s2)) + n_ * tr / s2);
          } else if (form == RegressionForm::Diagonal) {
            ll = 0.0;
            for (int j = 0; j < u_; ++j) {
              const double sj = rss(j, j) / n_ + bump[j] * bump[j];
              const double v = std::max(sj, kVarFloor);
              ll -= 0.5 * (n_ * (kLog2Pi + std::log(v)) + n_ * sj / v);
            }
          } else {
            if (!have_llt) continue;
            const double quad = rss_llt.matrixL().solve(bump).squaredNorm();
            const double ld = logdet + std::log1p(quad);
            ll = -0.5 * n_ * (u_ * kLog2Pi + ld + u_);
          }
          const double bic = reg_bic_from(ll, u_, q, form, n_);
          if (bic > cand_bic) {
            cand_bic = bic;
            cand_form = form;
          }
        }
        if (cand_bic > drop_bic) {
          drop_bic = cand_bic;
          drop_form = cand_form;
          best_drop = static_cast<int>(pos);
        }
      }

      if (best_drop < 0) break;
      active.erase(active.begin() + best_drop);
      factorize(active, inv, coef, rss, /*initial=*/false);
      score(rss, static_cast<int>(active.size()), cur_bic, cur_form);
    }

    best_form = cur_form;
    best_bic = cur_bic;
    return active;
  }

 private:
  void factorize(const std::vector<int>& active, Eigen::MatrixXd& inv,
                 Eigen::MatrixXd& coef, Eigen::MatrixXd& rss, bool initial) {
    const int q = static_cast<int>(active.size());
    Eigen::MatrixXd g(q + 1, q + 1);
    Eigen::MatrixXd c(q + 1, u_);
    std::vector<int> design(q + 1);
    design[0] = 0;
    for (int j = 0; j < q; ++j) design[j + 1] = active[j] + 1;
    for (int r = 0; r <= q; ++r) {
      c.row(r) = cross_.row(design[r]);
      for (int s = 0; s <= q; ++s) g(r, s) = gram_(design[r], design[s]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) {
      if (initial)
        throw RankDeficient("design matrix is rank deficient");
      throw Error("Gram factorization failed during predictor selection");
    }
    const Eigen::VectorXd ldiag = llt.matrixL().toDenseMatrix().diagonal();
    if (initial && ldiag.minCoeff() < 1e-10 * ldiag.maxCoeff())
      throw RankDeficient("design matrix is numerically rank deficient");
    inv = llt.solve(Eigen::MatrixXd::Identity(q + 1, q + 1));
    coef = llt.solve(c);
    rss = yy_ - c.transpose() * coef;
    rss = 0.5 * (rss + rss.transpose());
  }

  void score(const Eigen::MatrixXd& rss, int q, double& bic,
             RegressionForm& form) {
    bic = -std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd s_hat = rss / n_;
    for (RegressionForm f : forms_) {
      double ll;
      if (!block_loglik(s_hat, n_, f, ll)) continue;
      const double b = reg_bic_from(ll, u_, q, f, n_);
      if (b > bic) {
        bic = b;
        form = f;
      }
    }
    if (!std::isfinite(bic))
      throw SingularOmega("no regression form is usable");
  }

  double n_;
  int u_, q0_;
  std::vector<RegressionForm> forms_;
  Eigen::MatrixXd gram_, cross_, yy_;
};

}  // namespace

PredictorSelection select_predictors(const DataMatrix& data,
                                     const std::vector<int>& response,
                                     const std::vector<int>& candidates,
                                     const std::vector<RegressionForm>& forms) {
  if (response.empty())
    throw Error("predictor selection needs a response set");
  if (forms.empty()) throw ConfigError("no regression forms to search");
  if (data.n() <= static_cast<Eigen::Index>(candidates.size()) + 1)
    throw RankDeficient("too few observations for the candidate count");

  GramSelector selector(data, response, candidates, forms);
  PredictorSelection sel;
  const std::vector<int> kept = selector.run(sel.form, sel.bic);
  sel.predictors.reserve(kept.size());
  for (int pos : kept) sel.predictors.push_back(candidates[pos]);
  std::sort(sel.predictors.begin(), sel.predictors.end());
  return sel;
}

std::uint64_t subset_seed(std::uint64_t base, const std::vector<int>& columns) {
  std::uint64_t s = mix64(base ^ 0x524f4c4553ULL);
  for (int c : columns) s = mix64(s ^ mix64(static_cast<std::uint64_t>(c) + 1));
  return s;
}

namespace {

struct MixCell {
  bool ok = false;
  double bic = -std::numeric_limits<double>::infinity();
  int K = 0;
  CovarianceFamily family = CovarianceFamily::SphericalEqual;
};

struct RegBlock {
  double bic = 0.0;
  RegressionForm form = RegressionForm::Diagonal;
};

class RoleSearch {
 public:
  RoleSearch(const DataMatrix& data, const RoleSearchConfig& cfg)
      : data_(data),
        cfg_(cfg),
        p_(static_cast<int>(data.p())),
        move_em_(cfg.move_em.value_or(cfg.em)) {}

  SelectedModel run(std::vector<SearchStep>* steps) {
    State cur;
    cur.S.resize(p_);
    for (int j = 0; j < p_; ++j) cur.S[j] = j;
    cur.mix = mixture_cell(cur.S);
    if (!cur.mix.ok)
      throw SearchFailed(
          "initial all-relevant mixture failed at every grid cell");
    if (steps) record(*steps, cur, 0);

    while (true) {
      int evaluated = 0;
      bool have_best = false;
      bool best_removal = false;
      int best_var = -1;
      State best;

      auto consider = [&](State&& cand, bool removal, int var) {
        ++evaluated;
        if (!cand.mix.ok) return;
        const double c = cand.crit();
        if (!have_best || c > best.crit() ||
            (c == best.crit() &&
             ((removal && !best_removal) ||
              (removal == best_removal && var < best_var)))) {
          best = std::move(cand);
          best_removal = removal;
          best_var = var;
          have_best = true;
        }
      };

      if (cur.S.size() > 1)
        for (int j : cur.S) consider(removal_candidate(cur, j), true, j);
      for (const auto& [u, preds] : cur.U)
        consider(inclusion_candidate(cur, u), false, u);
      for (int j : cur.W) consider(inclusion_candidate(cur, j), false, j);

      if (have_best && best.crit() > cur.crit()) {
        cur = std::move(best);
        if (steps) record(*steps, cur, evaluated);
        continue;
      }

      // No single reassignment improves. Correlated variables can hold a
      // proxy of a clustering variable inside S (each one-variable move then
      // loses either the mixture or the regression side), so try exchanging
      // an S member with an excluded variable before giving up.
      bool have_swap = false;
      int swap_out = -1, swap_in = -1;
      State swapped;
      auto consider_swap = [&](State&& cand, int out, int in) {
        ++evaluated;
        if (!cand.mix.ok) return;
        const double c = cand.crit();
        if (!have_swap || c > swapped.crit() ||
            (c == swapped.crit() &&
             (out < swap_out || (out == swap_out && in < swap_in)))) {
          swapped = std::move(cand);
          swap_out = out;
          swap_in = in;
          have_swap = true;
        }
      };
      std::vector<int> outside = cur.W;
      for (const auto& [u, preds] : cur.U)
        outside.insert(std::upper_bound(outside.begin(), outside.end(), u), u);
      for (int out : cur.S)
        for (int in : outside)
          consider_swap(swap_candidate(cur, out, in), out, in);

      if (!have_swap || swapped.crit() <= cur.crit()) break;
      cur = std::move(swapped);
      if (steps) record(*steps, cur, evaluated);
    }

    return finalize(cur);
  }

 private:
  struct State {
    std::vector<int> S, W;
    std::map<int, std::vector<int>> U;  // redundant var -> its predictors
    MixCell mix;
    RegBlock reg;  // joint fit of the U block on the pooled predictors
    double ind_bic = 0.0;
    IndepForm ind_form = IndepForm::Spherical;

    double crit() const {
      double c = mix.bic;
      if (!U.empty()) c += reg.bic;
      if (!W.empty()) c += ind_bic;
      return c;
    }
  };

  std::vector<int> pooled_predictors(const State& st) const {
    std::set<int> preds;
    for (const auto& [u, r] : st.U) preds.insert(r.begin(), r.end());
    return {preds.begin(), preds.end()};
  }

  MixCell mixture_cell(const std::vector<int>& S) {
    const std::string key = subset_key(S);
    auto it = mix_cache_.find(key);
    if (it != mix_cache_.end()) return it->second;

    MixCell cell;
    EmConfig em = move_em_;
    em.seed = subset_seed(cfg_.em.seed, S);
    em.record_traces = false;
    try {
      MixtureFit fit =
          best_mixture(data_.select_columns(S), cfg_.K_set, cfg_.families, em);
      cell.ok = true;
      cell.bic = fit.bic;
      cell.K = fit.K;
      cell.family = fit.family;
    } catch (const Error&) {
      cell.ok = false;
    }
    mix_cache_.emplace(key, cell);
    return cell;
  }

  // The whole redundant block regressed jointly on the pooled predictors,
  // best form by BIC (general skipped when singular).
  RegBlock joint_regression(const std::vector<int>& redundant,
                            const std::vector<int>& predictors) {
    const std::string key = subset_key(redundant) + '|' + subset_key(predictors);
    auto it = joint_cache_.find(key);
    if (it != joint_cache_.end()) return it->second;

    RegBlock block;
    block.bic = -std::numeric_limits<double>::infinity();
    for (RegressionForm form : kAllRegressionForms) {
      try {
        const RegressionFit fit =
            fit_regression(data_, redundant, predictors, form);
        if (fit.bic > block.bic) {
          block.bic = fit.bic;
          block.form = form;
        }
      } catch (const SingularOmega&) {
      }
    }
    joint_cache_.emplace(key, block);
    return block;
  }

  // Per-variable predictor selection; used to pick R_u one variable at a
  // time (the joint block is rescored afterwards).
  const std::vector<int>& per_var_predictors(int u,
                                             const std::vector<int>& S,
                                             double* bic = nullptr) {
    const std::string key = std::to_string(u) + '|' + subset_key(S);
    auto it = sel_cache_.find(key);
    if (it == sel_cache_.end()) {
      PredictorSelection sel = select_predictors(
          data_, {u}, S,
          {RegressionForm::Spherical, RegressionForm::Diagonal,
           RegressionForm::General});
      it = sel_cache_.emplace(key, std::move(sel)).first;
    }
    if (bic) *bic = it->second.bic;
    return it->second.predictors;
  }

  double per_var_ind(int u) {
    auto it = ind_cache_.find(u);
    if (it != ind_cache_.end()) return it->second;
    const double bic = fit_indep(data_, {u}, IndepForm::Spherical).bic;
    ind_cache_.emplace(u, bic);
    return bic;
  }

  void refit_blocks(State& st) {
    if (st.U.empty()) {
      st.reg = RegBlock{};
    } else {
      st.reg = joint_regression(
          [&] {
            std::vector<int> keys;
            for (const auto& [u, r] : st.U) keys.push_back(u);
            return keys;
          }(),
          pooled_predictors(st));
    }
    if (st.W.empty()) {
      st.ind_bic = 0.0;
      return;
    }
    st.ind_bic = -std::numeric_limits<double>::infinity();
    for (IndepForm form : kAllIndepForms) {
      const double bic = fit_indep(data_, st.W, form).bic;
      if (bic > st.ind_bic) {
        st.ind_bic = bic;
        st.ind_form = form;
      }
    }
  }

  State removal_candidate(const State& cur, int j) {
    State cand;
    cand.S = without(cur.S, j);
    cand.mix = mixture_cell(cand.S);
    if (!cand.mix.ok) return cand;
    cand.W = cur.W;

    for (const auto& [u, preds] : cur.U) {
      if (contains(preds, j)) {
        const std::vector<int>& fresh = per_var_predictors(u, cand.S);
        if (fresh.empty())
          cand.W = with(cand.W, u);
        else
          cand.U[u] = fresh;
      } else {
        cand.U[u] = preds;
      }
    }

    double reg_bic = 0.0;
    const std::vector<int>& own = per_var_predictors(j, cand.S, &reg_bic);
    if (own.empty() || per_var_ind(j) > reg_bic)
      cand.W = with(cand.W, j);
    else
      cand.U[j] = own;

    refit_blocks(cand);
    return cand;
  }

  State inclusion_candidate(const State& cur, int j) {
    State cand;
    cand.S = with(cur.S, j);
    cand.mix = mixture_cell(cand.S);
    if (!cand.mix.ok) return cand;
    cand.U = cur.U;
    cand.U.erase(j);
    cand.W = cur.W;
    if (contains(cand.W, j)) cand.W = without(cand.W, j);
    refit_blocks(cand);
    return cand;
  }

  State swap_candidate(const State& cur, int out, int in) {
    State cand;
    cand.S = with(without(cur.S, out), in);
    cand.mix = mixture_cell(cand.S);
    if (!cand.mix.ok) return cand;
    cand.W = cur.W;
    if (contains(cand.W, in)) cand.W = without(cand.W, in);

    for (const auto& [u, preds] : cur.U) {
      if (u == in) continue;
      if (contains(preds, out)) {
        const std::vector<int>& fresh = per_var_predictors(u, cand.S);
        if (fresh.empty())
          cand.W = with(cand.W, u);
        else
          cand.U[u] = fresh;
      } else {
        cand.U[u] = preds;
      }
    }

    double reg_bic = 0.0;
    const std::vector<int>& own = per_var_predictors(out, cand.S, &reg_bic);
    if (own.empty() || per_var_ind(out) > reg_bic)
      cand.W = with(cand.W, out);
    else
      cand.U[out] = own;

    refit_blocks(cand);
    return cand;
  }

  VariableRoles roles_of(const State& st) const {
    VariableRoles roles;
    roles.relevant = st.S;
    roles.independent = st.W;
    for (const auto& [u, preds] : st.U) roles.redundant.push_back(u);
    roles.predictors = pooled_predictors(st);
    return roles;
  }

  void record(std::vector<SearchStep>& steps, const State& st,
              int evaluated) const {
    SearchStep step;
    step.roles = roles_of(st);
    for (const auto& [u, preds] : st.U) step.u_predictors[u] = preds;
    step.mix_bic = st.mix.bic;
    step.reg_bic = st.U.empty() ? 0.0 : st.reg.bic;
    step.indep_bic = st.W.empty() ? 0.0 : st.ind_bic;
    step.criterion = st.crit();
    step.K = st.mix.K;
    step.family = st.mix.family;
    step.reg_form = st.reg.form;
    step.indep_form = st.ind_form;
    step.move_evaluations = evaluated;
    steps.push_back(std::move(step));
  }

  SelectedModel finalize(const State& st) {
    SelectedModel model;
    model.roles = roles_of(st);

    EmConfig em = cfg_.em;
    em.seed = subset_seed(cfg_.em.seed, st.S);
    model.mixture = best_mixture(data_.select_columns(st.S), cfg_.K_set,
                                 cfg_.families, em);
    model.criterion = model.mixture.bic;

    if (!model.roles.redundant.empty()) {
      RegressionFit best_fit;
      double best = -std::numeric_limits<double>::infinity();
      for (RegressionForm form : kAllRegressionForms) {
        try {
          RegressionFit fit = fit_regression(data_, model.roles.redundant,
                                             model.roles.predictors, form);
          if (fit.bic > best) {
            best = fit.bic;
            best_fit = std::move(fit);
          }
        } catch (const SingularOmega&) {
        }
      }
      if (!std::isfinite(best))
        throw SingularOmega("no usable regression form for the final model");
      model.regression = std::move(best_fit);
      model.criterion += model.regression->bic;
    }

    if (!model.roles.independent.empty()) {
      IndepFit best_fit;
      double best = -std::numeric_limits<double>::infinity();
      for (IndepForm form : kAllIndepForms) {
        IndepFit fit = fit_indep(data_, model.roles.independent, form);
        if (fit.bic > best) {
          best = fit.bic;
          best_fit = std::move(fit);
        }
      }
      model.indep = std::move(best_fit);
      model.criterion += model.indep->bic;
    }

    model.roles.validate(p_);
    return model;
  }

  const DataMatrix& data_;
  const RoleSearchConfig& cfg_;
  int p_;
  EmConfig move_em_;
  std::unordered_map<std::string, MixCell> mix_cache_;
  std::unordered_map<std::string, RegBlock> joint_cache_;
  std::unordered_map<std::string, PredictorSelection> sel_cache_;
  std::unordered_map<int, double> ind_cache_;
};

}  // namespace

SelectedModel select_roles(const DataMatrix& data, const RoleSearchConfig& cfg,
                           std::vector<SearchStep>* steps) {
  data.validate();
  if (cfg.K_set.empty() || cfg.families.empty())
    throw ConfigError("role search needs a non-empty model grid");
  RoleSearch search(data, cfg);
  return search.run(steps);
}

}  // namespace selclust
