#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace selclust {

/// n x p observation matrix with optional column labels. Variables are
/// addressed by 0-based column index throughout the library.
struct DataMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> col_names;  // empty, or exactly p entries

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index p() const { return values.cols(); }

  /// Copy of the given columns, in the given order. Column names follow.
  DataMatrix select_columns(const std::vector<int>& idx) const;

  /// Throws Error unless n >= 1, p >= 1, all entries finite and the
  /// column-name count (when present) matches p.
  void validate() const;
};

}  // namespace selclust
