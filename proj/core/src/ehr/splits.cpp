#include "mpvaa/ehr/splits.hpp"

#include <algorithm>
#include <cmath>

#include "mpvaa/errors.hpp"
#include "mpvaa/numkit/rng.hpp"

namespace mpvaa::ehr {

std::string_view to_string(Task t) {
  return t == Task::hf_outcome ? "hf_outcome" : "sequential_disease";
}

SplitSizes split_sizes(std::size_t n) {
  const auto held = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 8.0));
  return {n - 2 * held, held, held};
}

namespace {

bool contains(const Visit& v, std::size_t concept_index) {
  return std::find(v.concepts.begin(), v.concepts.end(), concept_index) != v.concepts.end();
}

bool allowed(const std::optional<std::set<std::string>>& eligible, const std::string& id) {
  return !eligible || eligible->contains(id);
}

}  // namespace

SplitSpec build_hf_split(const Dataset& dataset, std::size_t hf_concept, std::uint64_t seed,
                         const std::optional<std::set<std::string>>& eligible) {
  std::vector<std::string> positives, negatives;
  for (const auto& p : dataset.patients) {
    if (!allowed(eligible, p.id) || p.visits.size() < 2) continue;
    if (contains(p.visits.back(), hf_concept)) {
      positives.push_back(p.id);
      continue;
    }
    const bool any_hf = std::any_of(p.visits.begin(), p.visits.end(),
                                    [&](const Visit& v) { return contains(v, hf_concept); });
    if (!any_hf) negatives.push_back(p.id);
  }
  const std::size_t n = std::min(positives.size(), negatives.size());
  if (n < 8) {
    throw ContractError("build_hf_split: need at least 8 positives and 8 negatives, have " +
                        std::to_string(positives.size()) + " and " +
                        std::to_string(negatives.size()));
  }
  nk::SeededRng rng(nk::derive_seed(seed, nk::hash_string("hf_split")));
  rng.shuffle(std::span<std::string>(positives));
  rng.shuffle(std::span<std::string>(negatives));
  const SplitSizes sz = split_sizes(n);

  SplitSpec split;
  split.task = Task::hf_outcome;
  auto take = [&](std::size_t begin, std::size_t count, std::vector<std::string>& ids,
                  std::vector<int>& labels) {
    for (std::size_t i = begin; i < begin + count; ++i) {
      ids.push_back(positives[i]);
      labels.push_back(1);
      ids.push_back(negatives[i]);
      labels.push_back(0);
    }
  };
  take(0, sz.train, split.train, split.train_labels);
  take(sz.train, sz.validation, split.validation, split.validation_labels);
  take(sz.train + sz.validation, sz.test, split.test, split.test_labels);
  return split;
}

SplitSpec build_sequential_split(const Dataset& dataset, std::uint64_t seed,
                                 const std::optional<std::set<std::string>>& eligible) {
  std::vector<std::string> ids;
  for (const auto& p : dataset.patients) {
    if (allowed(eligible, p.id) && p.visits.size() >= 2) ids.push_back(p.id);
  }
  if (ids.size() < 8) throw ContractError("build_sequential_split: need at least 8 patients");
  nk::SeededRng rng(nk::derive_seed(seed, nk::hash_string("sequential_split")));
  rng.shuffle(std::span<std::string>(ids));
  const SplitSizes sz = split_sizes(ids.size());
  SplitSpec split;
  split.task = Task::sequential_disease;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(sz.train));
  split.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(sz.train),
                          ids.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.validation));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.validation),
                    ids.end());
  return split;
}

}  // namespace mpvaa::ehr
