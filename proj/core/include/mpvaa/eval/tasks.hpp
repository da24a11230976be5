#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mpvaa/ehr/record.hpp"
#include "mpvaa/ehr/splits.hpp"
#include "mpvaa/eval/fusion.hpp"
#include "mpvaa/eval/logistic.hpp"
#include "mpvaa/net/model.hpp"
#include "mpvaa/train/embedding_store.hpp"
#include "mpvaa/train/pipeline.hpp"

namespace mpvaa::eval {

// Results file: one JSON object per line,
//   {"metric":"auc_roc","model":"full","seed":7,"task":"hf_outcome",
//    "test_size":60,"train_size":370,"validation_size":60,"value":0.83}
// CSV export columns: model,task,metric,value,seed
struct MetricReport {
  std::string task;
  std::string metric;
  double value = 0.0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::uint64_t seed = 0;
  std::string model;
  bool operator==(const MetricReport&) const = default;
};

inline constexpr const char* kMetricsFile = "metrics.jsonl";

std::string to_jsonl(const std::vector<MetricReport>& reports);
std::vector<MetricReport> parse_jsonl(const std::string& text);
std::string to_csv(const std::vector<MetricReport>& reports);

using FeatureMap = std::map<std::string, std::vector<double>>;

// C' rows of a representation table.
FeatureMap fused_features(const train::RepresentationTable& table);
// z_dem rows of a representation table.
FeatureMap dem_features(const train::RepresentationTable& table);
// CONCAT / AVG baseline vectors over each patient's observed window.
FeatureMap baseline_features(const ehr::Dataset& dataset, const train::EmbeddingStore& store,
                             FusionMethod method);

// Same ids, labels permuted within each part of the split.
ehr::SplitSpec shuffled_labels(const ehr::SplitSpec& split, std::uint64_t seed);

// Logistic regression on train, scored on test: auc_roc, auc_pr, accuracy.
// ContractError when a split patient has no feature vector.
std::vector<MetricReport> run_hf_task(const FeatureMap& features, const ehr::SplitSpec& split,
                                      std::uint64_t seed, const std::string& model,
                                      const LogisticConfig& config = {});

enum class PrefixMode { all, last };

inline constexpr std::size_t kDefaultNdcgCutoffs[] = {5, 15, 25};

struct SequentialScores {
  std::vector<double> ndcg;  // mean NDCG per cutoff
  std::size_t pairs = 0;     // (history, target) pairs scored
};

// For each test patient and each history prefix (or only the longest one),
// ranks the diagnosis codes by the decoder's next-position logits and scores
// them against the next visit's diagnoses. Pairs with no diagnosis target are
// excluded.
SequentialScores sequential_ndcg(const ehr::Dataset& dataset, const train::EmbeddingStore& store,
                                 const net::MpvaaParams& params,
                                 const std::vector<std::string>& patients,
                                 const std::vector<std::size_t>& cutoffs, double lambda_eval,
                                 PrefixMode mode = PrefixMode::all, std::size_t jobs = 1);

std::vector<MetricReport> run_sequential_task(const ehr::Dataset& dataset,
                                              const train::EmbeddingStore& store,
                                              const net::MpvaaParams& params,
                                              const ehr::SplitSpec& split,
                                              const std::vector<std::size_t>& cutoffs,
                                              std::uint64_t seed, const std::string& model,
                                              PrefixMode mode = PrefixMode::all,
                                              std::size_t jobs = 1);

}  // namespace mpvaa::eval
