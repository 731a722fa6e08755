#include "selclust/simgen.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

#include "selclust/errors.hpp"
#include "selclust/rng.hpp"

namespace selclust {

namespace {

constexpr std::uint64_t kLabelStream = 0x4c41U;
constexpr std::uint64_t kColumnStream = 0x434fU;
constexpr std::uint64_t kMixStream = 0x4d58U;

std::uint64_t scenario_seed(const ScenarioSpec& spec) {
  return derive_seed(spec.seed,
                     {static_cast<std::uint64_t>(spec.experiment),
                      static_cast<std::uint64_t>(spec.scenario)});
}

Rng label_rng(std::uint64_t base) {
  return Rng(derive_seed(base, {kLabelStream}));
}

Rng column_rng(std::uint64_t base, int column) {
  return Rng(derive_seed(base, {kColumnStream,
                                static_cast<std::uint64_t>(column)}));
}

std::vector<std::string> default_names(int p) {
  std::vector<std::string> names(p);
  for (int j = 0; j < p; ++j) names[j] = "V" + std::to_string(j + 1);
  return names;
}

std::vector<int> iota_set(int lo, int hi) {  // inclusive bounds
  std::vector<int> out;
  for (int j = lo; j <= hi; ++j) out.push_back(j);
  return out;
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Exp1: return "exp1";
    case Experiment::Exp2: return "exp2";
    case Experiment::Waveform: return "waveform";
  }
  return "unknown";
}

ScenarioSpec ScenarioSpec::exp1(int scenario, std::uint64_t seed) {
  if (scenario < 1 || scenario > 5)
    throw ConfigError("experiment 1 has scenarios 1..5");
  ScenarioSpec spec;
  spec.experiment = Experiment::Exp1;
  spec.scenario = scenario;
  spec.n = scenario <= 2 ? 30 : 300;
  spec.p = scenario == 5 ? 100 : 25;
  spec.mu = (scenario == 1 || scenario == 3) ? 0.6 : 1.7;
  spec.seed = seed;
  return spec;
}

ScenarioSpec ScenarioSpec::exp2(int scenario, std::uint64_t seed) {
  if (scenario < 1 || scenario > 3)
    throw ConfigError("experiment 2 has scenarios 1..3");
  ScenarioSpec spec;
  spec.experiment = Experiment::Exp2;
  spec.scenario = scenario;
  spec.n = 2000;
  spec.p = scenario == 3 ? 101 : 14;
  spec.seed = seed;
  return spec;
}

ScenarioSpec ScenarioSpec::waveform(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.experiment = Experiment::Waveform;
  spec.scenario = 1;
  spec.n = 5000;
  spec.p = 40;
  spec.seed = seed;
  return spec;
}

std::string ScenarioSpec::id() const {
  if (experiment == Experiment::Waveform) return "waveform";
  return to_string(experiment) + "-s" + std::to_string(scenario);
}

Eigen::Matrix2d rotation(double theta) {
  Eigen::Matrix2d r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

LabeledDataset gen_exp1(const ScenarioSpec& spec) {
  if (spec.experiment != Experiment::Exp1)
    throw ConfigError("spec is not an experiment-1 scenario");
  const int n = spec.n;
  const int p = spec.p;
  const double mu = spec.mu;
  const std::uint64_t base = scenario_seed(spec);

  LabeledDataset out;
  out.data.values.resize(n, p);
  out.data.col_names = default_names(p);
  out.true_labels.resize(n);

  Rng labels = label_rng(base);
  for (int i = 0; i < n; ++i) out.true_labels[i] = labels.uniform_int(0, 2);

  // Component means per relevant column: (+mu, -mu, 0).
  for (int j = 0; j < p; ++j) {
    Rng rng = column_rng(base, j);
    for (int i = 0; i < n; ++i) {
      double v = rng.normal();
      if (j < 5) {
        const int k = out.true_labels[i];
        v += k == 0 ? mu : (k == 1 ? -mu : 0.0);
      }
      out.data.values(i, j) = v;
    }
  }

  out.true_relevant = iota_set(0, 4);
  out.true_roles.relevant = out.true_relevant;
  out.true_roles.independent = iota_set(5, p - 1);
  return out;
}

LabeledDataset gen_exp2(const ScenarioSpec& spec) {
  if (spec.experiment != Experiment::Exp2)
    throw ConfigError("spec is not an experiment-2 scenario");
  const int n = spec.n;
  const int p = spec.p;
  const int scenario = spec.scenario;
  const std::uint64_t base = scenario_seed(spec);

  LabeledDataset out;
  out.data.values.resize(n, p);
  out.data.col_names = default_names(p);
  out.true_labels.resize(n);

  // Four bivariate components at (0,0), (4,0), (0,2), (4,2).
  const double mx[4] = {0.0, 4.0, 0.0, 4.0};
  const double my[4] = {0.0, 0.0, 2.0, 2.0};
  const double props1[4] = {0.2, 0.3, 0.3, 0.2};

  Rng labels = label_rng(base);
  for (int i = 0; i < n; ++i) {
    if (scenario == 1) {
      const double u = labels.uniform();
      int k = 0;
      double acc = props1[0];
      while (k < 3 && u >= acc) acc += props1[++k];
      out.true_labels[i] = k;
    } else {
      out.true_labels[i] = labels.uniform_int(0, 3);
    }
  }

  for (int j = 0; j < 2; ++j) {
    Rng rng = column_rng(base, j);
    for (int i = 0; i < n; ++i) {
      const int k = out.true_labels[i];
      out.data.values(i, j) = (j == 0 ? mx[k] : my[k]) + rng.normal();
    }
  }

  if (scenario == 1) {
    // y3 = 3 y1 + eps, eps ~ N(0, 0.5); then eleven independent columns.
    Rng eps = column_rng(base, 2);
    for (int i = 0; i < n; ++i)
      out.data.values(i, 2) =
          3.0 * out.data.values(i, 0) + std::sqrt(0.5) * eps.normal();
    for (int j = 3; j < 14; ++j) {
      Rng rng = column_rng(base, j);
      const double mean = 0.4 * (j - 3);
      for (int i = 0; i < n; ++i)
        out.data.values(i, j) = mean + rng.normal();
    }
    out.true_roles.relevant = {0, 1};
    out.true_roles.redundant = {2};
    out.true_roles.predictors = {0};
    out.true_roles.independent = iota_set(3, 13);
  } else {
    // Nine redundant columns: offsets + y^{1,2} b + eps with block Omega.
    Eigen::MatrixXd b(2, 9);
    b << 0.5, 2.0, 0.0, -1.0, 2.0, 0.5, 4.0, 3.0, 2.0,
         1.0, 0.0, 3.0,  2.0, -4.0, 0.0, 0.5, 0.0, 1.0;
    Eigen::VectorXd offsets(9);
    offsets << 0.0, 0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.4, 2.8;

    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(9, 9);
    omega.block<3, 3>(0, 0).setIdentity();
    omega.block<2, 2>(3, 3) = 0.5 * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d rot1 = rotation(std::numbers::pi / 3.0);
    const Eigen::Matrix2d rot2 = rotation(std::numbers::pi / 6.0);
    omega.block<2, 2>(5, 5) =
        rot1.transpose() * Eigen::Vector2d(1.0, 3.0).asDiagonal() * rot1;
    omega.block<2, 2>(7, 7) =
        rot2.transpose() * Eigen::Vector2d(2.0, 6.0).asDiagonal() * rot2;
    const Eigen::MatrixXd chol = omega.llt().matrixL();

    Rng eps = column_rng(base, 2);
    Eigen::VectorXd z(9);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 9; ++j) z[j] = eps.normal();
      const Eigen::Vector2d y12(out.data.values(i, 0), out.data.values(i, 1));
      out.data.values.block<1, 9>(i, 2) =
          (offsets + b.transpose() * y12 + chol * z).transpose();
    }

    if (scenario == 2) {
      const double means[3] = {3.2, 3.6, 4.0};
      for (int j = 11; j < 14; ++j) {
        Rng rng = column_rng(base, j);
        for (int i = 0; i < n; ++i)
          out.data.values(i, j) = means[j - 11] + rng.normal();
      }
    } else {
      for (int j = 11; j < 101; ++j) {
        Rng rng = column_rng(base, j);
        const double mean = j < 41 ? 0.0 : (j < 71 ? 2.0 : 4.0);
        for (int i = 0; i < n; ++i)
          out.data.values(i, j) = mean + rng.normal();
      }
    }
    out.true_roles.relevant = {0, 1};
    out.true_roles.redundant = iota_set(2, 10);
    out.true_roles.predictors = {0, 1};
    out.true_roles.independent = iota_set(11, p - 1);
  }

  out.true_relevant = {0, 1};
  return out;
}

LabeledDataset gen_waveform(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("waveform needs n >= 1");
  constexpr int p = 40;

  ScenarioSpec spec = ScenarioSpec::waveform(seed);
  spec.n = n;
  const std::uint64_t base = scenario_seed(spec);

  LabeledDataset out;
  out.data.values.resize(n, p);
  out.data.col_names = default_names(p);
  out.true_labels.resize(n);

  // Triangular bases sampled at j = 1..21 and the class wave pairs.
  auto h1 = [](int j) { return std::max(6.0 - std::abs(j - 11), 0.0); };
  auto h2 = [&](int j) { return h1(j - 4); };
  auto h3 = [&](int j) { return h1(j + 4); };
  const int pair_a[3] = {1, 1, 2};
  const int pair_b[3] = {2, 3, 3};
  auto wave = [&](int which, int j) {
    return which == 1 ? h1(j) : (which == 2 ? h2(j) : h3(j));
  };

  Rng labels = label_rng(base);
  Rng mix = Rng(derive_seed(base, {kMixStream}));
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) {
    out.true_labels[i] = labels.uniform_int(0, 2);
    u[i] = mix.uniform();
  }

  for (int j = 0; j < p; ++j) {
    Rng rng = column_rng(base, j);
    for (int i = 0; i < n; ++i) {
      double v = rng.normal();
      if (j < 21) {
        const int c = out.true_labels[i];
        v += u[i] * wave(pair_a[c], j + 1) +
             (1.0 - u[i]) * wave(pair_b[c], j + 1);
      }
      out.data.values(i, j) = v;
    }
  }

  out.true_relevant = iota_set(0, 20);
  out.true_roles.relevant = out.true_relevant;
  out.true_roles.independent = iota_set(21, p - 1);
  return out;
}

LabeledDataset generate(const ScenarioSpec& spec) {
  switch (spec.experiment) {
    case Experiment::Exp1: return gen_exp1(spec);
    case Experiment::Exp2: return gen_exp2(spec);
    case Experiment::Waveform: {
      LabeledDataset out = gen_waveform(spec.n, spec.seed);
      return out;
    }
  }
  throw ConfigError("unknown experiment");
}

}  // namespace selclust
