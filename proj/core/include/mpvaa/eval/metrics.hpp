#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mpvaa::eval {

// Probability that a random positive outranks a random negative, ties counted
// half (average-rank Mann-Whitney statistic). UndefinedMetricError unless both
// classes are present.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Average precision with step interpolation: sum over distinct thresholds of
// (R_n - R_{n-1}) * P_n, tied scores entering together.
double auc_pr(std::span<const double> scores, std::span<const int> labels);

// Fraction of (score >= threshold) == label.
double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold = 0.5);

// Top-k by score (ties by lower index first), gain 1 for members of `truth`,
// discount 1 / log2(rank + 1), normalized by the ideal DCG of min(k, |truth|)
// hits. UndefinedMetricError for an empty truth set or k == 0.
double ndcg_at_k(std::span<const double> scores, std::span<const std::size_t> truth, std::size_t k);

// Indices of the k largest scores, ties broken by lower index.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

}  // namespace mpvaa::eval
