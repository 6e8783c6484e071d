#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace polyfuzz::stats {

// Vargha-Delaney effect size via midranks:
// (#{x_i > y_j} + 0.5 * #{ties}) / (|x| * |y|).
double a12(std::span<const double> x, std::span<const double> y);

// Two-sided rank-sum p-value. Exact enumeration of the null distribution when
// |x|+|y| <= 12, normal approximation with tie correction otherwise.
double wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y);

// Both paths exposed for cross-validation.
double wilcoxon_rank_sum_exact(std::span<const double> x, std::span<const double> y);
double wilcoxon_rank_sum_normal(std::span<const double> x, std::span<const double> y);

// Exact-path helper: true when the observed rank-sum deviation is the largest
// any labeling of the pooled sample can attain. At tiny run counts the
// two-sided p cannot go below 2/C(n+m, n), so Scott-Knott uses this as the
// small-sample significance escape.
bool wilcoxon_rank_sum_is_extreme(std::span<const double> x, std::span<const double> y);

struct MetricSample {
  std::string label;
  std::vector<double> values;
};

// Scott-Knott clustering: recursively splits the mean-ordered list where the
// between-group sum of squares peaks, accepting a split when the groups differ
// by Wilcoxon p < 0.05 with A12 >= 0.56. Larger rank = better (higher mean);
// ranks contiguous from 1; output order matches the input.
std::vector<std::pair<std::string, int>> scott_knott(
    const std::vector<MetricSample>& samples);

double median(std::vector<double> values);
double iqr(std::vector<double> values);

}  // namespace polyfuzz::stats
