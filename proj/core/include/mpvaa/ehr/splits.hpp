#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mpvaa/ehr/record.hpp"

namespace mpvaa::ehr {

enum class Task { hf_outcome, sequential_disease };
std::string_view to_string(Task t);

struct SplitSpec {
  Task task = Task::hf_outcome;
  std::vector<std::string> train, validation, test;
  // Class labels for hf_outcome (1 = HF in the final visit), parallel to the lists.
  std::vector<int> train_labels, validation_labels, test_labels;
};

// Per-class sizes: validation = test = round(n / 8), train = n - 2 * round(n / 8).
// With n = 1485 this reproduces 1113/186/186.
struct SplitSizes {
  std::size_t train, validation, test;
};
SplitSizes split_sizes(std::size_t n);

// Positives: HF code in the final visit. Negatives: no HF code anywhere in the
// record. Classes are balanced by sampling the larger one down. `eligible`
// restricts the candidate pool (e.g. patients whose embeddings exist).
// ContractError when fewer than 8 instances per class are available.
SplitSpec build_hf_split(const Dataset& dataset, std::size_t hf_concept, std::uint64_t seed,
                         const std::optional<std::set<std::string>>& eligible = std::nullopt);

// Random 75/12.5/12.5 patient split for next-visit diagnosis prediction.
SplitSpec build_sequential_split(const Dataset& dataset, std::uint64_t seed,
                                 const std::optional<std::set<std::string>>& eligible = std::nullopt);

}  // namespace mpvaa::ehr
