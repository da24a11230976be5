#include "mpvaa/ehr/record.hpp"

#include <algorithm>
#include <set>

#include "mpvaa/errors.hpp"

namespace mpvaa::ehr {

std::string_view to_string(AgeBin v) {
  switch (v) {
    case AgeBin::neonate:
      return "neonate";
    case AgeBin::middle:
      return "middle";
    case AgeBin::adult:
      return "adult";
    case AgeBin::old:
      return "old";
  }
  return "?";
}

std::string_view to_string(Gender v) { return v == Gender::male ? "male" : "female"; }

std::string_view to_string(WeightBin v) {
  switch (v) {
    case WeightBin::healthy:
      return "healthy";
    case WeightBin::overweight:
      return "overweight";
    case WeightBin::underweight:
      return "underweight";
  }
  return "?";
}

std::optional<AgeBin> parse_age(std::string_view s) {
  for (auto v : {AgeBin::neonate, AgeBin::middle, AgeBin::adult, AgeBin::old}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<Gender> parse_gender(std::string_view s) {
  for (auto v : {Gender::male, Gender::female}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<WeightBin> parse_weight(std::string_view s) {
  for (auto v : {WeightBin::healthy, WeightBin::overweight, WeightBin::underweight}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

const PatientRecord& Dataset::patient(std::string_view id) const {
  for (const auto& p : patients) {
    if (p.id == id) return p;
  }
  throw LookupError("no patient '" + std::string(id) + "'");
}

void validate_record(const PatientRecord& record, const ConceptVocabulary& vocab,
                     const DatasetMeta& meta) {
  const std::string who = "patient '" + record.id + "'";
  if (record.id.empty()) throw ContractError("patient id must be non-empty");
  if (record.visits.size() < 2) {
    throw ContractError(who + " has " + std::to_string(record.visits.size()) +
                        " visit(s); at least two are required");
  }
  const std::size_t note_vocab = meta.note_vocab(vocab.size());
  for (std::size_t v = 0; v < record.visits.size(); ++v) {
    const Visit& visit = record.visits[v];
    const std::string where = who + " visit " + std::to_string(v);
    if (visit.concepts.empty()) throw ContractError(where + " has no concepts");
    std::set<std::size_t> seen;
    for (auto c : visit.concepts) {
      if (c >= vocab.size()) throw ContractError(where + ": concept index out of range");
      if (!seen.insert(c).second) throw ContractError(where + ": duplicate concept");
    }
    for (const auto& lab : visit.labs) {
      if (lab.item >= meta.lab_items || lab.bin >= meta.lab_bins) {
        throw ContractError(where + ": lab tuple out of range");
      }
    }
    for (auto tok : visit.note_tokens) {
      if (tok >= note_vocab) throw ContractError(where + ": note token out of range");
    }
  }
}

std::vector<std::size_t> flatten_concepts(const PatientRecord& record) {
  return flatten_concepts(record, record.visits.size());
}

std::vector<std::size_t> flatten_concepts(const PatientRecord& record, std::size_t visit_count) {
  std::vector<std::size_t> seq;
  for (std::size_t v = 0; v < visit_count && v < record.visits.size(); ++v) {
    const auto& cs = record.visits[v].concepts;
    seq.insert(seq.end(), cs.begin(), cs.end());
  }
  return seq;
}

std::vector<std::size_t> distinct_concepts(const PatientRecord& record) {
  std::vector<std::size_t> out = flatten_concepts(record);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PatientRecord history_prefix(const PatientRecord& record, std::size_t visit_count) {
  if (visit_count == 0 || visit_count > record.visits.size()) {
    throw ContractError("history prefix of " + std::to_string(visit_count) + " visits for '" +
                        record.id + "' with " + std::to_string(record.visits.size()));
  }
  PatientRecord out;
  out.id = record.id;
  out.visits.assign(record.visits.begin(),
                    record.visits.begin() + static_cast<std::ptrdiff_t>(visit_count));
  return out;
}

PatientRecord observed_window(const PatientRecord& record) {
  if (record.visits.size() < 2) {
    throw ContractError("patient '" + record.id + "' needs two visits for an observed window");
  }
  return history_prefix(record, record.visits.size() - 1);
}

std::vector<SequentialPair> sequential_targets(const PatientRecord& record,
                                               const ConceptVocabulary& vocab) {
  if (record.visits.size() < 2) {
    throw ContractError("sequential_targets: patient '" + record.id + "' has fewer than 2 visits");
  }
  std::vector<SequentialPair> pairs;
  for (std::size_t t = 1; t < record.visits.size(); ++t) {
    SequentialPair p;
    p.history_visits = t;
    for (auto c : record.visits[t].concepts) {
      if (vocab.category(c) == Category::diagnosis) p.target_diagnoses.push_back(c);
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace mpvaa::ehr
