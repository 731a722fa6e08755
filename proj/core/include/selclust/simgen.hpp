#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "selclust/data.hpp"
#include "selclust/varsel.hpp"

namespace selclust {

enum class Experiment { Exp1, Exp2, Waveform };

std::string to_string(Experiment e);

/// Declarative description of one synthetic setting. Factory helpers fill in
/// the published defaults (n, p, mu) per scenario; n and mu may be
/// overridden afterwards, p is fixed by the construction.
struct ScenarioSpec {
  Experiment experiment = Experiment::Exp1;
  int scenario = 1;
  int n = 0;
  int p = 0;
  double mu = 0.0;  // Exp1 cluster separation
  std::uint64_t seed = 0;

  static ScenarioSpec exp1(int scenario, std::uint64_t seed);
  static ScenarioSpec exp2(int scenario, std::uint64_t seed);
  static ScenarioSpec waveform(std::uint64_t seed);

  /// Identifier such as "exp1-s4" or "waveform", used in result files.
  std::string id() const;
};

struct LabeledDataset {
  DataMatrix data;
  std::vector<int> true_labels;    // 0-based class ids
  std::vector<int> true_relevant;  // 0-based column indices
  VariableRoles true_roles;
};

/// Plane rotation [[cos t, -sin t], [sin t, cos t]].
Eigen::Matrix2d rotation(double theta);

/// Three equiprobable spherical Gaussians on the first five columns, means
/// (-mu..), 0, (+mu..); standard normal noise columns after that.
LabeledDataset gen_exp1(const ScenarioSpec& spec);

/// Four-component bivariate mixture on the first two columns plus redundant
/// regression blocks and independent noise blocks, per scenario.
LabeledDataset gen_exp2(const ScenarioSpec& spec);

/// Waveform data: random convex combinations of two of three triangular
/// waveforms sampled at 1..21 with unit noise, plus 19 noise columns.
LabeledDataset gen_waveform(int n, std::uint64_t seed);

LabeledDataset generate(const ScenarioSpec& spec);

}  // namespace selclust
