#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpvaa/ehr/vocabulary.hpp"

namespace mpvaa::ehr {

enum class AgeBin { neonate, middle, adult, old };
enum class Gender { male, female };
enum class WeightBin { healthy, overweight, underweight };

std::string_view to_string(AgeBin v);
std::string_view to_string(Gender v);
std::string_view to_string(WeightBin v);
std::optional<AgeBin> parse_age(std::string_view s);
std::optional<Gender> parse_gender(std::string_view s);
std::optional<WeightBin> parse_weight(std::string_view s);

struct Demographics {
  AgeBin age = AgeBin::adult;
  Gender gender = Gender::male;
  WeightBin weight = WeightBin::healthy;
  bool operator==(const Demographics&) const = default;
};

struct LabTuple {
  std::size_t item = 0;
  std::size_t bin = 0;
  bool operator==(const LabTuple&) const = default;
};

struct Visit {
  // Unordered concept set; stored order is the order used when the record is
  // flattened into a sequence.
  std::vector<std::size_t> concepts;
  Demographics demo;
  std::vector<LabTuple> labs;
  // One pre-tokenized note per visit. Callers with several notes concatenate
  // them upstream.
  std::vector<std::size_t> note_tokens;
  bool operator==(const Visit&) const = default;
};

struct PatientRecord {
  std::string id;
  std::vector<Visit> visits;
  bool operator==(const PatientRecord&) const = default;
};

// Schema parameters shared by all records of a dataset. Note token ids live in
// [0, word_vocab) for ordinary words and [word_vocab, word_vocab + N) for a
// mention of concept (id - word_vocab).
struct DatasetMeta {
  std::size_t lab_items = 0;
  std::size_t lab_bins = 0;
  std::size_t word_vocab = 0;
  std::string hf_code;
  bool operator==(const DatasetMeta&) const = default;

  std::size_t lab_tuple_count() const { return lab_items * lab_bins; }
  std::size_t note_vocab(std::size_t concepts) const { return word_vocab + concepts; }
};

struct Dataset {
  ConceptVocabulary vocab;
  DatasetMeta meta;
  std::vector<PatientRecord> patients;
  bool operator==(const Dataset&) const = default;

  std::size_t hf_concept() const { return vocab.index_of(meta.hf_code); }
  const PatientRecord& patient(std::string_view id) const;
};

// ContractError describing the first violated record invariant.
void validate_record(const PatientRecord& record, const ConceptVocabulary& vocab,
                     const DatasetMeta& meta);

// Concatenated concept indices of all visits, T = sum of visit sizes.
std::vector<std::size_t> flatten_concepts(const PatientRecord& record);
std::vector<std::size_t> flatten_concepts(const PatientRecord& record, std::size_t visit_count);

// Sorted distinct concepts of the record.
std::vector<std::size_t> distinct_concepts(const PatientRecord& record);

// The record without its final visit: the window representation learning sees.
// The held-out last visit is the v_{t+1} outcome visit.
PatientRecord observed_window(const PatientRecord& record);

// First `visit_count` visits.
PatientRecord history_prefix(const PatientRecord& record, std::size_t visit_count);

struct SequentialPair {
  std::size_t history_visits = 0;            // prefix length t
  std::vector<std::size_t> target_diagnoses;  // diagnosis concepts of visit t+1
};

// One pair per t in [1, |S| - 1]. Targets keep only diagnosis-category codes and
// may be empty.
std::vector<SequentialPair> sequential_targets(const PatientRecord& record,
                                               const ConceptVocabulary& vocab);

}  // namespace mpvaa::ehr
