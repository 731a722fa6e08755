#pragma once

#include <vector>

namespace selclust {

/// Hubert-Arabie adjusted Rand index between two label vectors, in percent.
/// 100 for identical partitions (up to relabeling); 0 when the expected-index
/// denominator vanishes (e.g. one side is a single cluster). Labels need not
/// be contiguous. Throws LengthMismatch on unequal lengths.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

/// Variable selection error rate: |selected symmetric-difference truth| / p,
/// in percent. Index sets are subsets of {0, ..., p-1}.
double vser(const std::vector<int>& selected, const std::vector<int>& truth, int p);

/// Number of selected variables.
int num_selected(const std::vector<int>& selected);

}  // namespace selclust
