#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "polyfuzz/rng.hpp"
#include "polyfuzz/stats.hpp"
#include "polyfuzz/types.hpp"

using namespace polyfuzz;

namespace {

// exhaustive pair enumeration, the oracle for the rank-based implementation
double a12_brute(const std::vector<double>& x, const std::vector<double>& y) {
  double wins = 0;
  for (double xi : x) {
    for (double yj : y) {
      if (xi > yj) wins += 1.0;
      else if (xi == yj) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(x.size()) * y.size());
}

std::vector<double> random_sample(Rng& rng, size_t n, int lo, int hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(lo + static_cast<int>(rng.uniform_index(hi - lo)));
  return v;
}

}  // namespace

TEST_CASE("a12: ties, dominance, brute-force agreement") {
  CHECK(stats::a12(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1, 1}) == 0.5);
  CHECK(stats::a12(std::vector<double>{2, 3, 4}, std::vector<double>{0, 1}) == 1.0);

  Rng rng(20);
  for (int rep = 0; rep < 200; ++rep) {
    auto x = random_sample(rng, 6, 0, 8);
    auto y = random_sample(rng, 5, 0, 8);
    CHECK(stats::a12(x, y) == doctest::Approx(a12_brute(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("a12: complement and monotone-transform invariance") {
  Rng rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    auto x = random_sample(rng, 5, 0, 50);
    auto y = random_sample(rng, 7, 0, 50);
    CHECK(stats::a12(x, y) + stats::a12(y, x) == doctest::Approx(1.0).epsilon(1e-12));

    auto tx = x, ty = y;
    for (auto& v : tx) v = std::exp(v / 10.0);
    for (auto& v : ty) v = std::exp(v / 10.0);
    CHECK(stats::a12(tx, ty) == doctest::Approx(stats::a12(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon: exact null-center and extreme cases") {
  CHECK(stats::wilcoxon_rank_sum(std::vector<double>{1, 2, 3},
                                 std::vector<double>{1, 2, 3}) == doctest::Approx(1.0));
  CHECK(stats::wilcoxon_rank_sum(std::vector<double>{10, 11, 12},
                                 std::vector<double>{1, 2, 3}) ==
        doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("wilcoxon: rank-based invariance") {
  Rng rng(22);
  for (int rep = 0; rep < 50; ++rep) {
    auto x = random_sample(rng, 5, 0, 20);
    auto y = random_sample(rng, 6, 0, 20);
    auto tx = x, ty = y;
    for (auto& v : tx) v = v * v * v + 3.0;
    for (auto& v : ty) v = v * v * v + 3.0;
    CHECK(stats::wilcoxon_rank_sum(x, y) ==
          doctest::Approx(stats::wilcoxon_rank_sum(tx, ty)).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon: normal approximation tracks the exact path") {
  //近-untied samples: metric values (distinct bypass counts) rarely tie
  Rng rng(23);
  int checked = 0;
  while (checked < 200) {
    auto x = random_sample(rng, 6, 0, 1000);
    auto y = random_sample(rng, 6, 0, 1000);
    auto pooled = x;
    pooled.insert(pooled.end(), y.begin(), y.end());
    std::sort(pooled.begin(), pooled.end());
    if (std::adjacent_find(pooled.begin(), pooled.end()) != pooled.end()) continue;
    double exact = stats::wilcoxon_rank_sum_exact(x, y);
    double approx = stats::wilcoxon_rank_sum_normal(x, y);
    CHECK(std::abs(exact - approx) < 0.05);
    ++checked;
  }
}

TEST_CASE("wilcoxon: extreme-labeling detection") {
  CHECK(stats::wilcoxon_rank_sum_is_extreme(std::vector<double>{10, 11, 12},
                                            std::vector<double>{1, 2, 3}));
  CHECK_FALSE(stats::wilcoxon_rank_sum_is_extreme(std::vector<double>{4, 5, 6},
                                                  std::vector<double>{4, 5, 6}));
  CHECK_FALSE(stats::wilcoxon_rank_sum_is_extreme(std::vector<double>{1, 12, 2},
                                                  std::vector<double>{3, 11, 10}));
}

TEST_CASE("wilcoxon and a12 reject empty inputs") {
  CHECK_THROWS_AS(stats::a12({}, std::vector<double>{1.0}), PolyfuzzError);
  CHECK_THROWS_AS(stats::wilcoxon_rank_sum(std::vector<double>{1.0}, {}), PolyfuzzError);
}

TEST_CASE("scott_knott: examples from small samples") {
  auto single = stats::scott_knott({{"only", {5, 6, 7}}});
  REQUIRE(single.size() == 1);
  CHECK(single[0] == std::pair<std::string, int>{"only", 1});

  auto two = stats::scott_knott({{"hi", {10, 11, 12}}, {"lo", {1, 2, 3}}});
  REQUIRE(two.size() == 2);
  CHECK(two[0] == std::pair<std::string, int>{"hi", 2});
  CHECK(two[1] == std::pair<std::string, int>{"lo", 1});

  auto same = stats::scott_knott({{"a", {4, 5, 6}}, {"b", {4, 5, 6}}});
  CHECK(same[0].second == 1);
  CHECK(same[1].second == 1);
}

TEST_CASE("scott_knott: output is a ranked partition") {
  Rng rng(24);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<stats::MetricSample> samples;
    size_t k = 2 + rng.uniform_index(4);
    for (size_t i = 0; i < k; ++i) {
      int base = static_cast<int>(rng.uniform_index(30));
      samples.push_back({"alg" + std::to_string(i), random_sample(rng, 8, base, base + 6)});
    }
    auto ranks = stats::scott_knott(samples);
    REQUIRE(ranks.size() == k);

    int max_rank = 0;
    for (auto& [label, rank] : ranks) {
      CHECK(rank >= 1);
      max_rank = std::max(max_rank, rank);
    }
    // contiguous ranks from 1
    for (int r = 1; r <= max_rank; ++r) {
      bool found = false;
      for (auto& [label, rank] : ranks) found = found || rank == r;
      CHECK(found);
    }
    // ranks respect mean ordering
    for (size_t i = 0; i < k; ++i) {
      for (size_t j = 0; j < k; ++j) {
        double mi = 0, mj = 0;
        for (double v : samples[i].values) mi += v;
        for (double v : samples[j].values) mj += v;
        mi /= samples[i].values.size();
        mj /= samples[j].values.size();
        if (ranks[i].second > ranks[j].second) CHECK(mi > mj);
      }
    }
  }
}

TEST_CASE("median and iqr") {
  CHECK(stats::median({3, 1, 2}) == 2.0);
  CHECK(stats::median({4, 1, 2, 3}) == 2.5);
  CHECK(stats::iqr({1, 1, 1, 1}) == 0.0);
  CHECK(stats::iqr({1, 2, 3, 4, 5}) == 2.0);
}
