#include "polyfuzz/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "polyfuzz/types.hpp"

namespace polyfuzz::stats {

namespace {

// Midranks of the pooled sample; first |x| entries belong to x.
std::vector<double> midranks(std::span<const double> x, std::span<const double> y) {
  const size_t n = x.size() + y.size();
  std::vector<std::pair<double, size_t>> pooled(n);
  for (size_t i = 0; i < x.size(); ++i) pooled[i] = {x[i], i};
  for (size_t j = 0; j < y.size(); ++j) pooled[x.size() + j] = {y[j], x.size() + j};
  std::sort(pooled.begin(), pooled.end());

  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && pooled[j + 1].first == pooled[i].first) ++j;
    double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) ranks[pooled[k].second] = mid;
    i = j + 1;
  }
  return ranks;
}

double rank_sum_x(std::span<const double> x, std::span<const double> y) {
  auto ranks = midranks(x, y);
  double w = 0.0;
  for (size_t i = 0; i < x.size(); ++i) w += ranks[i];
  return w;
}

void require_nonempty(std::span<const double> x, std::span<const double> y,
                      const char* who) {
  if (x.empty() || y.empty())
    throw PolyfuzzError(std::string(who) + ": empty input sample");
}

}  // namespace

double a12(std::span<const double> x, std::span<const double> y) {
  require_nonempty(x, y, "a12");
  double r1 = rank_sum_x(x, y);
  double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size());
  return (r1 - n1 * (n1 + 1.0) / 2.0) / (n1 * n2);
}

double wilcoxon_rank_sum_exact(std::span<const double> x, std::span<const double> y) {
  require_nonempty(x, y, "wilcoxon_rank_sum");
  const size_t n1 = x.size(), n = n1 + y.size();
  auto ranks = midranks(x, y);
  double w_obs = 0.0;
  for (size_t i = 0; i < n1; ++i) w_obs += ranks[i];
  double mu = static_cast<double>(n1) * (static_cast<double>(n) + 1.0) / 2.0;
  double dev = std::abs(w_obs - mu);

  // pooled rank values, then every assignment of n1 of them to "x"
  std::sort(ranks.begin(), ranks.end());
  uint64_t total = 0, extreme = 0;
  std::vector<size_t> idx(n1);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    double w = 0.0;
    for (size_t i : idx) w += ranks[i];
    ++total;
    if (std::abs(w - mu) >= dev - 1e-12) ++extreme;
    // next combination
    size_t k = n1;
    while (k > 0 && idx[k - 1] == n - n1 + k - 1) --k;
    if (k == 0) break;
    ++idx[k - 1];
    for (size_t j = k; j < n1; ++j) idx[j] = idx[j - 1] + 1;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

double wilcoxon_rank_sum_normal(std::span<const double> x, std::span<const double> y) {
  require_nonempty(x, y, "wilcoxon_rank_sum");
  const double n1 = static_cast<double>(x.size());
  const double n2 = static_cast<double>(y.size());
  const double n = n1 + n2;
  double w = rank_sum_x(x, y);
  double mu = n1 * (n + 1.0) / 2.0;

  // tie correction over pooled value multiplicities
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_term = 0.0;
  for (size_t i = 0; i < pooled.size();) {
    size_t j = i;
    while (j + 1 < pooled.size() && pooled[j + 1] == pooled[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return 1.0;  // fully tied pooled sample
  double z = (std::abs(w - mu) - 0.5) / std::sqrt(var);
  if (z < 0.0) z = 0.0;
  double p = std::erfc(z / std::sqrt(2.0));  // = 2 * (1 - Phi(z))
  return std::min(1.0, std::max(p, 1e-300));
}

double wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y) {
  require_nonempty(x, y, "wilcoxon_rank_sum");
  if (x.size() + y.size() <= 12) return wilcoxon_rank_sum_exact(x, y);
  return wilcoxon_rank_sum_normal(x, y);
}

bool wilcoxon_rank_sum_is_extreme(std::span<const double> x, std::span<const double> y) {
  require_nonempty(x, y, "wilcoxon_rank_sum_is_extreme");
  const size_t n1 = x.size(), n = n1 + y.size();
  if (n > 20) return false;  // escape is only meaningful at tiny run counts
  auto ranks = midranks(x, y);
  double w_obs = 0.0;
  for (size_t i = 0; i < n1; ++i) w_obs += ranks[i];
  double mu = static_cast<double>(n1) * (static_cast<double>(n) + 1.0) / 2.0;
  double dev_obs = std::abs(w_obs - mu);

  std::sort(ranks.begin(), ranks.end());
  // the largest deviation comes from taking the n1 smallest or largest ranks
  double lo = 0.0, hi = 0.0;
  for (size_t i = 0; i < n1; ++i) {
    lo += ranks[i];
    hi += ranks[n - 1 - i];
  }
  double dev_max = std::max(std::abs(lo - mu), std::abs(hi - mu));
  return dev_obs >= dev_max - 1e-12;
}

namespace {

struct Item {
  size_t input_index;
  double mean;
};

void split_cluster(const std::vector<MetricSample>& samples, std::vector<Item> items,
                   std::vector<std::vector<size_t>>& clusters) {
  if (items.size() <= 1) {
    clusters.push_back({items[0].input_index});
    return;
  }
  double total_mean = 0.0;
  for (const auto& it : items) total_mean += it.mean;
  total_mean /= static_cast<double>(items.size());

  size_t best_split = 0;
  double best_bss = -1.0;
  for (size_t j = 1; j < items.size(); ++j) {
    double m1 = 0.0, m2 = 0.0;
    for (size_t i = 0; i < j; ++i) m1 += items[i].mean;
    for (size_t i = j; i < items.size(); ++i) m2 += items[i].mean;
    m1 /= static_cast<double>(j);
    m2 /= static_cast<double>(items.size() - j);
    double bss = static_cast<double>(j) * (m1 - total_mean) * (m1 - total_mean) +
                 static_cast<double>(items.size() - j) * (m2 - total_mean) * (m2 - total_mean);
    if (bss > best_bss) {
      best_bss = bss;
      best_split = j;
    }
  }

  std::vector<double> lo_pool, hi_pool;
  for (size_t i = 0; i < best_split; ++i) {
    const auto& v = samples[items[i].input_index].values;
    lo_pool.insert(lo_pool.end(), v.begin(), v.end());
  }
  for (size_t i = best_split; i < items.size(); ++i) {
    const auto& v = samples[items[i].input_index].values;
    hi_pool.insert(hi_pool.end(), v.begin(), v.end());
  }

  double p = wilcoxon_rank_sum(lo_pool, hi_pool);
  double effect = a12(hi_pool, lo_pool);  // items sorted ascending by mean
  // At tiny run counts the exact two-sided p is bounded below by
  // 2/C(n+m, n) > 0.05, so a maximally extreme labeling also counts.
  bool significant =
      p < 0.05 || (lo_pool.size() + hi_pool.size() <= 12 &&
                   wilcoxon_rank_sum_is_extreme(lo_pool, hi_pool));
  if (significant && effect >= 0.56) {
    split_cluster(samples, {items.begin(), items.begin() + best_split}, clusters);
    split_cluster(samples, {items.begin() + best_split, items.end()}, clusters);
  } else {
    std::vector<size_t> all;
    for (const auto& it : items) all.push_back(it.input_index);
    clusters.push_back(std::move(all));
  }
}

}  // namespace

std::vector<std::pair<std::string, int>> scott_knott(
    const std::vector<MetricSample>& samples) {
  if (samples.empty()) throw PolyfuzzError("scott_knott: no samples");
  for (const auto& s : samples) {
    if (s.values.empty())
      throw PolyfuzzError("scott_knott: sample '" + s.label + "' has no runs");
  }

  std::vector<Item> items(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    double m = std::accumulate(samples[i].values.begin(), samples[i].values.end(), 0.0) /
               static_cast<double>(samples[i].values.size());
    items[i] = {i, m};
  }
  std::sort(items.begin(), items.end(), [&](const Item& a, const Item& b) {
    if (a.mean != b.mean) return a.mean < b.mean;
    return samples[a.input_index].label < samples[b.input_index].label;
  });

  // clusters come out ordered by ascending mean
  std::vector<std::vector<size_t>> clusters;
  split_cluster(samples, items, clusters);

  std::vector<int> rank_of(samples.size(), 0);
  for (size_t c = 0; c < clusters.size(); ++c) {
    for (size_t idx : clusters[c]) rank_of[idx] = static_cast<int>(c) + 1;
  }
  std::vector<std::pair<std::string, int>> out;
  out.reserve(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) out.push_back({samples[i].label, rank_of[i]});
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw PolyfuzzError("median: empty input");
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double iqr(std::vector<double> values) {
  if (values.empty()) throw PolyfuzzError("iqr: empty input");
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    double pos = q * (static_cast<double>(values.size()) - 1.0);
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(lo + 1, values.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace polyfuzz::stats
