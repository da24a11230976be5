#include "mpvaa/ehr/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mpvaa/errors.hpp"

namespace mpvaa::ehr {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& file, std::size_t line, const std::string& field,
                       const std::string& what) {
  throw ParseError(file + ":" + std::to_string(line) + ": field '" + field + "': " + what);
}

const json& member(const json& obj, const char* key, const std::string& file, std::size_t line,
                   const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) fail(file, line, path + key, "missing");
  return obj.at(key);
}

std::size_t as_index(const json& v, const std::string& file, std::size_t line,
                     const std::string& field) {
  if (!v.is_number_unsigned()) fail(file, line, field, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::string as_string(const json& v, const std::string& file, std::size_t line,
                      const std::string& field) {
  if (!v.is_string()) fail(file, line, field, "expected a string");
  return v.get<std::string>();
}

}  // namespace

std::string serialize_vocab(const ConceptVocabulary& vocab) {
  std::string out = std::string(kVocabMagic) + "\n";
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out += vocab.code(i) + "\t" + std::to_string(i) + "\t" +
           std::string(to_string(vocab.category(i))) + "\n";
  }
  return out;
}

ConceptVocabulary parse_vocab(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kVocabMagic) {
    throw ParseError(std::string(kVocabFile) + ":1: field 'header': expected '" + kVocabMagic +
                     "'");
  }
  ConceptVocabulary vocab;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string code, index, category;
    if (!std::getline(row, code, '\t') || !std::getline(row, index, '\t') ||
        !std::getline(row, category)) {
      fail(kVocabFile, lineno, "row", "expected code<TAB>index<TAB>category");
    }
    if (index != std::to_string(vocab.size())) {
      fail(kVocabFile, lineno, "index", "indices must be dense and ascending");
    }
    auto cat = parse_category(category);
    if (!cat) fail(kVocabFile, lineno, "category", "unknown category '" + category + "'");
    if (vocab.find(code)) fail(kVocabFile, lineno, "code", "duplicate code '" + code + "'");
    vocab.add(code, *cat);
  }
  return vocab;
}

std::string serialize_records(const Dataset& ds) {
  json header = {{"format", kDatasetFormat},
                 {"version", kDatasetVersion},
                 {"hf_code", ds.meta.hf_code},
                 {"lab_items", ds.meta.lab_items},
                 {"lab_bins", ds.meta.lab_bins},
                 {"word_vocab", ds.meta.word_vocab}};
  std::string out = header.dump() + "\n";
  for (const auto& p : ds.patients) {
    json visits = json::array();
    for (const auto& v : p.visits) {
      json codes = json::array();
      for (auto c : v.concepts) codes.push_back(ds.vocab.code(c));
      json labs = json::array();
      for (const auto& l : v.labs) labs.push_back(json::array({l.item, l.bin}));
      visits.push_back({{"codes", codes},
                        {"demo",
                         {{"age", to_string(v.demo.age)},
                          {"gender", to_string(v.demo.gender)},
                          {"weight", to_string(v.demo.weight)}}},
                        {"labs", labs},
                        {"note_tokens", v.note_tokens}});
    }
    out += json{{"id", p.id}, {"visits", visits}}.dump() + "\n";
  }
  return out;
}

Dataset parse_records(const std::string& text, ConceptVocabulary vocab) {
  const std::string file = kDatasetFile;
  Dataset ds;
  ds.vocab = std::move(vocab);
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(is, line)) fail(file, 1, "header", "empty file");
  ++lineno;
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded()) fail(file, lineno, "header", "not valid JSON");
  if (as_string(member(header, "format", file, lineno, ""), file, lineno, "format") !=
      kDatasetFormat) {
    fail(file, lineno, "format", "expected " + std::string(kDatasetFormat));
  }
  const auto& version = member(header, "version", file, lineno, "");
  if (!version.is_number_integer() || version.get<int>() != kDatasetVersion) {
    fail(file, lineno, "version", "unsupported version");
  }
  ds.meta.hf_code = as_string(member(header, "hf_code", file, lineno, ""), file, lineno, "hf_code");
  ds.meta.lab_items =
      as_index(member(header, "lab_items", file, lineno, ""), file, lineno, "lab_items");
  ds.meta.lab_bins = as_index(member(header, "lab_bins", file, lineno, ""), file, lineno, "lab_bins");
  ds.meta.word_vocab =
      as_index(member(header, "word_vocab", file, lineno, ""), file, lineno, "word_vocab");
  if (!ds.vocab.find(ds.meta.hf_code)) {
    fail(file, lineno, "hf_code", "unknown concept code '" + ds.meta.hf_code + "'");
  }
  const std::size_t note_vocab = ds.meta.note_vocab(ds.vocab.size());

  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded()) fail(file, lineno, "record", "not valid JSON");
    PatientRecord p;
    p.id = as_string(member(rec, "id", file, lineno, ""), file, lineno, "id");
    const json& visits = member(rec, "visits", file, lineno, "");
    if (!visits.is_array()) fail(file, lineno, "visits", "expected an array");
    for (std::size_t vi = 0; vi < visits.size(); ++vi) {
      const std::string vp = "visits[" + std::to_string(vi) + "].";
      const json& jv = visits[vi];
      Visit v;
      const json& codes = member(jv, "codes", file, lineno, vp);
      if (!codes.is_array()) fail(file, lineno, vp + "codes", "expected an array");
      for (std::size_t ci = 0; ci < codes.size(); ++ci) {
        const std::string field = vp + "codes[" + std::to_string(ci) + "]";
        const std::string code = as_string(codes[ci], file, lineno, field);
        auto idx = ds.vocab.find(code);
        if (!idx) fail(file, lineno, field, "unknown concept code '" + code + "'");
        v.concepts.push_back(*idx);
      }
      const json& demo = member(jv, "demo", file, lineno, vp);
      auto age = parse_age(as_string(member(demo, "age", file, lineno, vp + "demo."), file, lineno,
                                     vp + "demo.age"));
      auto gender = parse_gender(as_string(member(demo, "gender", file, lineno, vp + "demo."),
                                           file, lineno, vp + "demo.gender"));
      auto weight = parse_weight(as_string(member(demo, "weight", file, lineno, vp + "demo."),
                                           file, lineno, vp + "demo.weight"));
      if (!age) fail(file, lineno, vp + "demo.age", "not one of neonate|middle|adult|old");
      if (!gender) fail(file, lineno, vp + "demo.gender", "not one of male|female");
      if (!weight) {
        fail(file, lineno, vp + "demo.weight", "not one of healthy|overweight|underweight");
      }
      v.demo = {*age, *gender, *weight};
      const json& labs = member(jv, "labs", file, lineno, vp);
      if (!labs.is_array()) fail(file, lineno, vp + "labs", "expected an array");
      for (std::size_t li = 0; li < labs.size(); ++li) {
        const std::string field = vp + "labs[" + std::to_string(li) + "]";
        if (!labs[li].is_array() || labs[li].size() != 2) {
          fail(file, lineno, field, "expected [item, bin]");
        }
        LabTuple t{as_index(labs[li][0], file, lineno, field), as_index(labs[li][1], file, lineno, field)};
        if (t.item >= ds.meta.lab_items || t.bin >= ds.meta.lab_bins) {
          fail(file, lineno, field, "lab tuple out of range");
        }
        v.labs.push_back(t);
      }
      const json& notes = member(jv, "note_tokens", file, lineno, vp);
      if (!notes.is_array()) fail(file, lineno, vp + "note_tokens", "expected an array");
      for (std::size_t ti = 0; ti < notes.size(); ++ti) {
        const std::string field = vp + "note_tokens[" + std::to_string(ti) + "]";
        const std::size_t tok = as_index(notes[ti], file, lineno, field);
        if (tok >= note_vocab) fail(file, lineno, field, "token id out of range");
        v.note_tokens.push_back(tok);
      }
      p.visits.push_back(std::move(v));
    }
    try {
      validate_record(p, ds.vocab, ds.meta);
    } catch (const ContractError& e) {
      fail(file, lineno, "visits", e.what());
    }
    ds.patients.push_back(std::move(p));
  }
  return ds;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifactError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / kVocabFile, serialize_vocab(dataset.vocab));
  write_text_file(dir / kDatasetFile, serialize_records(dataset));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  ConceptVocabulary vocab = parse_vocab(read_text_file(dir / kVocabFile));
  return parse_records(read_text_file(dir / kDatasetFile), std::move(vocab));
}

}  // namespace mpvaa::ehr
