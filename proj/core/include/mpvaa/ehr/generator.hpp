#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mpvaa/ehr/record.hpp"

namespace mpvaa::ehr {

// Synthetic multi-view EHR generator with a planted heart-failure signal.
//
// Vocabulary layout: index 0 is the HF diagnosis code "D000"; indices
// [1, 1 + cluster_size) form the planted cluster. Background codes follow a
// Zipf law over a seeded random ranking.
//
// A patient is "planted" with probability planted_rate. Planted patients carry
// cluster codes in every observed visit, a chronic lab signature (items
// [0, 3) in the high bin) and cluster-specific note context. HF appears in the
// final visit with probability
//   planted:     base + signal * (1 - base)
//   not planted: base * (1 - signal)
// with base = 0.5, so signal 0 makes the outcome independent of history and
// signal 1 makes it a deterministic function of the planted flag.
struct GeneratorConfig {
  std::size_t patients = 500;
  std::size_t vocab = 200;
  double mean_visits = 2.66;
  double mean_codes = 13.1;
  std::size_t max_visits = 12;
  std::size_t max_codes = 39;
  double signal = 1.0;
  double planted_rate = 0.5;
  std::size_t cluster_size = 6;
  double early_hf_rate = 0.02;
  double zipf_exponent = 2.0;
  std::size_t lab_items = 20;
  std::size_t lab_bins = 3;
  std::size_t word_vocab = 300;
  double mention_rate = 0.8;
};

// Throws ContractError for degenerate settings (vocab < 10, patients < 4, ...).
void validate(const GeneratorConfig& config);

Dataset generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

inline constexpr std::size_t kHfConceptIndex = 0;

// Generator ground truth, recomputed from the records: does the observed
// window contain any planted-cluster concept.
bool has_planted_cluster(const PatientRecord& record, const GeneratorConfig& config);

}  // namespace mpvaa::ehr
