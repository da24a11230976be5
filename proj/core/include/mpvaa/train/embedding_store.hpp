#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mpvaa/graph/gae.hpp"

namespace mpvaa::train {

// Store directory layout:
//   store.txt              format=MPVAA-STORE v1, d_k, patient and skip counts
//   summary.tsv            id, status, per-view initial/final GAE loss or reason
//   patients/<id>.ckpt     archive with arrays Z_dem, Z_lab, Z_notes (N_p x d_k)
//   patients/<id>.nodes    the N_p concept indices, one line, space separated
inline constexpr const char* kStoreFormat = "MPVAA-STORE v1";

using ViewEmbeddings = std::array<graph::InnerViewEmbedding, 3>;

struct GaeLosses {
  std::array<double, 3> initial{};
  std::array<double, 3> final{};
};

struct SkippedPatient {
  std::string id;
  std::string reason;
};

struct EmbeddingStore {
  std::size_t d_k = 0;
  std::map<std::string, ViewEmbeddings> patients;
  std::map<std::string, GaeLosses> losses;
  std::vector<SkippedPatient> skipped;

  bool contains(const std::string& id) const { return patients.count(id) != 0; }
  // LookupError for an unknown or skipped patient.
  const ViewEmbeddings& at(const std::string& id) const;
  std::set<std::string> ids() const;
};

void save_store(const EmbeddingStore& store, const std::filesystem::path& dir);
// MissingArtifactError naming `pretrain-views` when the directory holds no store.
EmbeddingStore load_store(const std::filesystem::path& dir);

}  // namespace mpvaa::train
