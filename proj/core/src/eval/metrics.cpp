#include "mpvaa/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "mpvaa/errors.hpp"

namespace mpvaa::eval {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, const char* what) {
  if (scores.size() != labels.size()) {
    throw ContractError(std::string(what) + ": " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw ContractError(std::string(what) + ": labels must be 0 or 1");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError(std::string(what) + ": non-finite score");
  }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels, const char* what) {
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw UndefinedMetricError(std::string(what) + ": needs at least one positive and one negative");
  }
  return {pos, neg};
}

std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "auc_roc");
  const auto [pos, neg] = class_counts(labels, "auc_roc");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[idx[t]] == 1) pos_rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

double auc_pr(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "auc_pr");
  const auto [pos, neg] = class_counts(labels, "auc_pr");
  (void)neg;
  const auto idx = descending(scores);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      tp += labels[idx[j]] == 1;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels, "accuracy");
  if (scores.empty()) throw UndefinedMetricError("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    correct += static_cast<int>(scores[i] >= threshold) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
  auto idx = descending(scores);
  idx.resize(std::min(k, idx.size()));
  return idx;
}

double ndcg_at_k(std::span<const double> scores, std::span<const std::size_t> truth, std::size_t k) {
  if (truth.empty()) throw UndefinedMetricError("ndcg_at_k: empty true set");
  if (k == 0) throw UndefinedMetricError("ndcg_at_k: k must be >= 1");
  const std::unordered_set<std::size_t> rel(truth.begin(), truth.end());
  for (std::size_t t : rel) {
    if (t >= scores.size()) throw ContractError("ndcg_at_k: true code outside the score vector");
  }
  const auto top = top_k(scores, k);
  double dcg = 0.0;
  for (std::size_t r = 0; r < top.size(); ++r) {
    if (rel.count(top[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, rel.size()); ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

}  // namespace mpvaa::eval
