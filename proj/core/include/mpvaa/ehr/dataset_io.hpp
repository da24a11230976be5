#pragma once

#include <filesystem>
#include <string>

#include "mpvaa/ehr/record.hpp"

namespace mpvaa::ehr {

// Dataset directory layout:
//   dataset.jsonl  header line, then one JSON patient record per line
//   vocab.tsv      "MPVAA-VOCAB v1", then code<TAB>index<TAB>category rows
//
// Header line:
//   {"format":"MPVAA-DATASET","hf_code":"D000","lab_bins":3,"lab_items":20,
//    "version":1,"word_vocab":300}
// Record line:
//   {"id":"p00001","visits":[{"codes":["D003","M010"],
//     "demo":{"age":"adult","gender":"male","weight":"healthy"},
//     "labs":[[item,bin],...],"note_tokens":[...]}, ...]}
//
// Serialization is canonical (sorted keys, no whitespace), so save after load
// reproduces the bytes of a canonical file.
inline constexpr const char* kDatasetFormat = "MPVAA-DATASET";
inline constexpr int kDatasetVersion = 1;
inline constexpr const char* kVocabMagic = "MPVAA-VOCAB v1";
inline constexpr const char* kDatasetFile = "dataset.jsonl";
inline constexpr const char* kVocabFile = "vocab.tsv";

std::string serialize_vocab(const ConceptVocabulary& vocab);
ConceptVocabulary parse_vocab(const std::string& text);

std::string serialize_records(const Dataset& dataset);
// ParseError naming the line and field on any schema violation.
Dataset parse_records(const std::string& text, ConceptVocabulary vocab);

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mpvaa::ehr
