#pragma once

#include <string>
#include <vector>

#include "selclust/data.hpp"

namespace selclust {

/// Shortest round-trip decimal representation (locale independent).
std::string format_double(double v);

struct LoadedCsv {
  DataMatrix data;
  std::vector<int> labels;  // contents of a `label` column, when present
  bool has_labels = false;
};

/// Reads a numeric CSV with a header row. A column named `label` is split
/// off as integer class labels and excluded from the data matrix. Throws
/// DataLoadError on malformed input.
LoadedCsv load_dataset_csv(const std::string& path);

/// Writes a dataset with one header row; labels, when given, go into a
/// trailing `label` column.
void write_dataset_csv(const std::string& path, const DataMatrix& data,
                       const std::vector<int>* labels = nullptr);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace selclust
