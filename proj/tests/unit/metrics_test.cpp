#include <doctest.h>

#include <algorithm>
#include <vector>

#include "selclust/errors.hpp"
#include "selclust/metrics.hpp"
#include "selclust/rng.hpp"

using namespace selclust;

namespace {

// Pair-counting route to the ARI, independent of the contingency-table
// implementation under test.
double ari_pair_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, first = 0, second = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      both += sa && sb;
      first += sa;
      second += sb;
    }
  }
  const double total = static_cast<double>(n) * (n - 1) / 2.0;
  const double expected = first * second / total;
  const double denom = 0.5 * (first + second) - expected;
  if (denom == 0.0) return 0.0;
  return 100.0 * (both - expected) / denom;
}

std::vector<int> random_partition(Rng& rng, int n, int max_clusters) {
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = rng.uniform_int(0, max_clusters - 1);
  return labels;
}

}  // namespace

TEST_CASE("ARI is 100 for identical partitions and relabelings") {
  const std::vector<int> a = {0, 0, 1, 1, 2, 2, 2};
  CHECK(adjusted_rand_index(a, a) == doctest::Approx(100.0));
  const std::vector<int> relabeled = {5, 5, 9, 9, 1, 1, 1};
  CHECK(adjusted_rand_index(a, relabeled) == doctest::Approx(100.0));
}

TEST_CASE("ARI against the single-cluster partition is 0 by convention") {
  const std::vector<int> a = {0, 1, 2, 0, 1, 2};
  const std::vector<int> ones(a.size(), 7);
  CHECK(adjusted_rand_index(a, ones) == 0.0);
  CHECK(adjusted_rand_index(ones, ones) == 0.0);
}

TEST_CASE("ARI on the worked six-point example") {
  const std::vector<int> p1 = {1, 1, 2, 2, 3, 3};
  const std::vector<int> p2 = {1, 1, 2, 3, 3, 3};
  const double expected = 100.0 * 1.2 / 2.7;  // contingency table by hand
  CHECK(adjusted_rand_index(p1, p2) == doctest::Approx(expected));
  CHECK(adjusted_rand_index(p1, p2) ==
        doctest::Approx(ari_pair_oracle(p1, p2)));
}

TEST_CASE("ARI matches the pair-counting oracle on random partitions") {
  Rng rng(20240901);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = rng.uniform_int(2, 30);
    const std::vector<int> a = random_partition(rng, n, rng.uniform_int(1, 5));
    const std::vector<int> b = random_partition(rng, n, rng.uniform_int(1, 5));
    const double got = adjusted_rand_index(a, b);
    CHECK(got == doctest::Approx(ari_pair_oracle(a, b)).epsilon(1e-12));
    CHECK(got == adjusted_rand_index(b, a));  // symmetry, exact
    CHECK(got <= 100.0 + 1e-12);

    // Relabeling invariance under a random bijection.
    std::vector<int> ids(6);
    for (int i = 0; i < 6; ++i) ids[i] = i;
    rng.shuffle(ids);
    std::vector<int> remapped(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) remapped[i] = ids[a[i]];
    CHECK(adjusted_rand_index(remapped, b) == got);
  }
}

TEST_CASE("ARI rejects length mismatches") {
  CHECK_THROWS_AS(adjusted_rand_index({1, 2}, {1, 2, 3}), LengthMismatch);
  CHECK_THROWS_AS(adjusted_rand_index({}, {}), LengthMismatch);
}

TEST_CASE("VSER counts symmetric differences in percent") {
  std::vector<int> all25(25), first5 = {0, 1, 2, 3, 4};
  for (int j = 0; j < 25; ++j) all25[j] = j;
  CHECK(vser(first5, first5, 25) == 0.0);
  CHECK(vser(all25, first5, 25) == doctest::Approx(80.0));

  std::vector<int> all100(100);
  for (int j = 0; j < 100; ++j) all100[j] = j;
  CHECK(vser(all100, first5, 100) == doctest::Approx(95.0));
}

TEST_CASE("VSER satisfies the triangle inequality") {
  Rng rng(77);
  const int p = 12;
  auto random_set = [&] {
    std::vector<int> s;
    for (int j = 0; j < p; ++j)
      if (rng.uniform() < 0.5) s.push_back(j);
    return s;
  };
  for (int rep = 0; rep < 50; ++rep) {
    const auto a = random_set(), b = random_set(), c = random_set();
    CHECK(vser(a, c, p) <= vser(a, b, p) + vser(b, c, p) + 1e-12);
  }
}

TEST_CASE("num_selected is the set cardinality") {
  CHECK(num_selected({}) == 0);
  std::vector<int> s(25);
  for (int j = 0; j < 25; ++j) s[j] = j;
  CHECK(num_selected(s) == 25);
  CHECK(num_selected({3, 3, 1}) == 2);  // duplicates collapse
}
