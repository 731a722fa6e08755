#include "selclust/metrics.hpp"

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>

#include "selclust/errors.hpp"

namespace selclust {

namespace {

double choose2(double m) { return m * (m - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw LengthMismatch("partitions have different lengths");
  if (a.empty()) throw LengthMismatch("partitions are empty");

  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> row_sums, col_sums;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    row_sums[a[i]] += 1.0;
    col_sums[b[i]] += 1.0;
  }

  double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, v] : cells) sum_cells += choose2(v);
  for (const auto& [key, v] : row_sums) sum_rows += choose2(v);
  for (const auto& [key, v] : col_sums) sum_cols += choose2(v);

  const double total = choose2(static_cast<double>(a.size()));
  if (total == 0.0) return 0.0;  // single observation
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (denom == 0.0) return 0.0;
  return 100.0 * (sum_cells - expected) / denom;
}

double vser(const std::vector<int>& selected, const std::vector<int>& truth, int p) {
  std::set<int> s(selected.begin(), selected.end());
  std::set<int> t(truth.begin(), truth.end());
  int errors = 0;
  for (int j : s)
    if (!t.count(j)) ++errors;
  for (int j : t)
    if (!s.count(j)) ++errors;
  return 100.0 * static_cast<double>(errors) / static_cast<double>(p);
}

int num_selected(const std::vector<int>& selected) {
  std::set<int> s(selected.begin(), selected.end());
  return static_cast<int>(s.size());
}

}  // namespace selclust
