#include "selclust/data.hpp"

#include <cmath>

#include "selclust/errors.hpp"

namespace selclust {

DataMatrix DataMatrix::select_columns(const std::vector<int>& idx) const {
  DataMatrix out;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] < 0 || idx[j] >= values.cols())
      throw Error("column index out of range: " + std::to_string(idx[j]));
    out.values.col(static_cast<Eigen::Index>(j)) = values.col(idx[j]);
  }
  if (!col_names.empty()) {
    out.col_names.reserve(idx.size());
    for (int j : idx) out.col_names.push_back(col_names[j]);
  }
  return out;
}

void DataMatrix::validate() const {
  if (values.rows() < 1 || values.cols() < 1)
    throw Error("data matrix must have at least one row and one column");
  if (!values.allFinite()) throw Error("data matrix contains non-finite entries");
  if (!col_names.empty() &&
      col_names.size() != static_cast<std::size_t>(values.cols()))
    throw Error("column-name count does not match column count");
}

}  // namespace selclust
