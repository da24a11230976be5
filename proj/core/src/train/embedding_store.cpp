#include "mpvaa/train/embedding_store.hpp"

#include <sstream>

#include "mpvaa/ehr/dataset_io.hpp"
#include "mpvaa/errors.hpp"
#include "mpvaa/net/model.hpp"
#include "mpvaa/numkit/archive.hpp"

namespace mpvaa::train {
namespace fs = std::filesystem;

const ViewEmbeddings& EmbeddingStore::at(const std::string& id) const {
  auto it = patients.find(id);
  if (it == patients.end()) {
    throw LookupError("embedding store: no embeddings for patient '" + id + "'");
  }
  return it->second;
}

std::set<std::string> EmbeddingStore::ids() const {
  std::set<std::string> out;
  for (const auto& [id, _] : patients) out.insert(id);
  return out;
}

namespace {

std::string array_name(graph::View v) { return "Z_" + std::string(graph::to_string(v)); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

}  // namespace

void save_store(const EmbeddingStore& store, const fs::path& dir) {
  fs::create_directories(dir / "patients");
  std::string summary = "id\tstatus";
  for (auto v : graph::kViews) {
    summary += "\t" + std::string(graph::to_string(v)) + "_initial\t" +
               std::string(graph::to_string(v)) + "_final";
  }
  summary += "\n";
  for (const auto& [id, views] : store.patients) {
    std::vector<nk::NamedArray> arrays;
    for (const auto& e : views) {
      arrays.push_back(nk::to_named_array(array_name(e.view), e.z));
    }
    nk::write_archive(dir / "patients" / (id + ".ckpt"), arrays);
    std::string nodes;
    for (std::size_t i = 0; i < views[0].nodes.size(); ++i) {
      if (i) nodes += ' ';
      nodes += std::to_string(views[0].nodes[i]);
    }
    ehr::write_text_file(dir / "patients" / (id + ".nodes"), nodes + "\n");
    summary += id + "\tok";
    auto lit = store.losses.find(id);
    for (std::size_t v = 0; v < 3; ++v) {
      if (lit == store.losses.end()) {
        summary += "\t\t";
      } else {
        summary += "\t" + fmt(lit->second.initial[v]) + "\t" + fmt(lit->second.final[v]);
      }
    }
    summary += "\n";
  }
  for (const auto& s : store.skipped) summary += s.id + "\tskipped\t" + s.reason + "\n";
  ehr::write_text_file(dir / "summary.tsv", summary);
  ehr::write_text_file(dir / "store.txt",
                       net::format_key_values({{"format", kStoreFormat},
                                               {"d_k", std::to_string(store.d_k)},
                                               {"patients", std::to_string(store.patients.size())},
                                               {"skipped", std::to_string(store.skipped.size())}}));
}

EmbeddingStore load_store(const fs::path& dir) {
  if (!fs::exists(dir / "store.txt")) {
    throw MissingArtifactError("no embedding store in '" + dir.string() +
                               "'; run the `pretrain-views` subcommand first");
  }
  const auto kv = net::parse_key_values(ehr::read_text_file(dir / "store.txt"), "store.txt");
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ParseError("store.txt: missing key '" + k + "'");
    return it->second;
  };
  if (get("format") != kStoreFormat) {
    throw ParseError("store.txt: unsupported format '" + get("format") + "'");
  }
  EmbeddingStore store;
  store.d_k = std::stoull(get("d_k"));

  std::istringstream summary(ehr::read_text_file(dir / "summary.tsv"));
  std::string line;
  std::getline(summary, line);
  while (std::getline(summary, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, '\t')) cols.push_back(cell);
    if (cols.size() < 2) throw ParseError("summary.tsv: malformed line '" + line + "'");
    const std::string& id = cols[0];
    if (cols[1] == "skipped") {
      store.skipped.push_back({id, cols.size() > 2 ? cols[2] : ""});
      continue;
    }
    const auto arrays = nk::read_archive(dir / "patients" / (id + ".ckpt"));
    std::istringstream ns(ehr::read_text_file(dir / "patients" / (id + ".nodes")));
    std::vector<std::size_t> nodes;
    std::size_t n;
    while (ns >> n) nodes.push_back(n);
    ViewEmbeddings views;
    for (std::size_t v = 0; v < 3; ++v) {
      views[v].view = graph::kViews[v];
      views[v].nodes = nodes;
      views[v].z = nk::to_tensor(nk::find_array(arrays, array_name(graph::kViews[v])));
      if (views[v].z.rows() != nodes.size() || views[v].z.cols() != store.d_k) {
        throw ParseError("embedding store: patient '" + id + "' has inconsistent array shapes");
      }
    }
    if (cols.size() >= 8) {
      GaeLosses l;
      for (std::size_t v = 0; v < 3; ++v) {
        l.initial[v] = std::stod(cols[2 + 2 * v]);
        l.final[v] = std::stod(cols[3 + 2 * v]);
      }
      store.losses[id] = l;
    }
    store.patients.emplace(id, std::move(views));
  }
  if (store.patients.size() != std::stoull(get("patients"))) {
    throw ParseError("embedding store: summary.tsv disagrees with store.txt patient count");
  }
  return store;
}

}  // namespace mpvaa::train
