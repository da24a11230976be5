#include "mpvaa/eval/tasks.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "mpvaa/errors.hpp"
#include "mpvaa/eval/metrics.hpp"
#include "mpvaa/net/mpvaa.hpp"
#include "mpvaa/numkit/rng.hpp"

namespace mpvaa::eval {
using nlohmann::json;

std::string to_jsonl(const std::vector<MetricReport>& reports) {
  std::string out;
  for (const auto& r : reports) {
    json j = {{"task", r.task},
              {"metric", r.metric},
              {"value", r.value},
              {"train_size", r.train_size},
              {"validation_size", r.validation_size},
              {"test_size", r.test_size},
              {"seed", r.seed},
              {"model", r.model}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<MetricReport> parse_jsonl(const std::string& text) {
  std::vector<MetricReport> out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      MetricReport r;
      r.task = j.at("task").get<std::string>();
      r.metric = j.at("metric").get<std::string>();
      r.value = j.at("value").get<double>();
      r.train_size = j.at("train_size").get<std::size_t>();
      r.validation_size = j.at("validation_size").get<std::size_t>();
      r.test_size = j.at("test_size").get<std::size_t>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.model = j.at("model").get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string(kMetricsFile) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string to_csv(const std::vector<MetricReport>& reports) {
  std::string out = "model,task,metric,value,seed\n";
  char buf[64];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%.9g", r.value);
    out += r.model + "," + r.task + "," + r.metric + "," + buf + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

FeatureMap fused_features(const train::RepresentationTable& table) {
  FeatureMap out;
  for (const auto& [id, rep] : table.rows) out[id] = rep.fused;
  return out;
}

FeatureMap dem_features(const train::RepresentationTable& table) {
  FeatureMap out;
  for (const auto& [id, rep] : table.rows) out[id] = rep.z_dem;
  return out;
}

FeatureMap baseline_features(const ehr::Dataset& dataset, const train::EmbeddingStore& store,
                             FusionMethod method) {
  FeatureMap out;
  for (const auto& rec : dataset.patients) {
    if (!store.contains(rec.id)) continue;
    const auto seq = ehr::flatten_concepts(ehr::observed_window(rec));
    out[rec.id] = baseline_patient_vector(method, store.at(rec.id), seq);
  }
  return out;
}

ehr::SplitSpec shuffled_labels(const ehr::SplitSpec& split, std::uint64_t seed) {
  ehr::SplitSpec out = split;
  nk::SeededRng rng(nk::derive_seed(seed, nk::hash_string("label_shuffle")));
  rng.shuffle(std::span<int>(out.train_labels));
  rng.shuffle(std::span<int>(out.validation_labels));
  rng.shuffle(std::span<int>(out.test_labels));
  return out;
}

namespace {

std::vector<std::vector<double>> gather(const FeatureMap& features,
                                        const std::vector<std::string>& ids) {
  std::vector<std::vector<double>> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = features.find(id);
    if (it == features.end()) {
      throw ContractError("run_task: no representation for patient '" + id +
                          "'; rerun `extract` on the same embedding store");
    }
    rows.push_back(it->second);
  }
  return rows;
}

MetricReport report(const ehr::SplitSpec& split, const std::string& metric, double value,
                    std::uint64_t seed, const std::string& model) {
  return {std::string(ehr::to_string(split.task)), metric, value, split.train.size(),
          split.validation.size(), split.test.size(), seed, model};
}

}  // namespace

std::vector<MetricReport> run_hf_task(const FeatureMap& features, const ehr::SplitSpec& split,
                                      std::uint64_t seed, const std::string& model,
                                      const LogisticConfig& config) {
  if (split.task != ehr::Task::hf_outcome) throw ContractError("run_hf_task: not an hf_outcome split");
  const auto train_rows = gather(features, split.train);
  const auto test_rows = gather(features, split.test);
  const LogisticModel clf = train_logistic(train_rows, split.train_labels, config);
  const auto scores = clf.predict(test_rows);
  return {report(split, "auc_roc", auc_roc(scores, split.test_labels), seed, model),
          report(split, "auc_pr", auc_pr(scores, split.test_labels), seed, model),
          report(split, "accuracy", accuracy(scores, split.test_labels), seed, model)};
}

SequentialScores sequential_ndcg(const ehr::Dataset& dataset, const train::EmbeddingStore& store,
                                 const net::MpvaaParams& params,
                                 const std::vector<std::string>& patients,
                                 const std::vector<std::size_t>& cutoffs, double lambda_eval,
                                 PrefixMode mode, std::size_t jobs) {
  if (cutoffs.empty()) throw ContractError("sequential_ndcg: no NDCG cutoffs");
  std::vector<std::size_t> diagnosis;
  for (std::size_t c = 0; c < dataset.vocab.size(); ++c) {
    if (dataset.vocab.category(c) == ehr::Category::diagnosis) diagnosis.push_back(c);
  }
  std::vector<std::vector<double>> sums(patients.size(), std::vector<double>(cutoffs.size(), 0.0));
  std::vector<std::size_t> counts(patients.size(), 0);
  train::parallel_for(patients.size(), jobs, [&](std::size_t p) {
    const ehr::PatientRecord& rec = dataset.patient(patients[p]);
    if (!store.contains(rec.id)) {
      throw ContractError("sequential_ndcg: no embeddings for patient '" + rec.id +
                          "'; rerun `pretrain-views`");
    }
    auto pairs = ehr::sequential_targets(rec, dataset.vocab);
    if (mode == PrefixMode::last && !pairs.empty()) pairs.erase(pairs.begin(), pairs.end() - 1);
    for (const auto& pair : pairs) {
      if (pair.target_diagnoses.empty()) continue;
      const auto history = ehr::flatten_concepts(rec, pair.history_visits);
      const auto views = net::make_patient_views(history, store.at(rec.id), params.hp);
      const nk::Tensor logits = net::next_position_logits(params, views, lambda_eval);
      std::vector<double> scores;
      scores.reserve(diagnosis.size());
      for (std::size_t c : diagnosis) scores.push_back(logits.at(c));
      std::vector<std::size_t> truth;
      for (std::size_t c : pair.target_diagnoses) {
        truth.push_back(static_cast<std::size_t>(
            std::lower_bound(diagnosis.begin(), diagnosis.end(), c) - diagnosis.begin()));
      }
      for (std::size_t k = 0; k < cutoffs.size(); ++k) {
        sums[p][k] += ndcg_at_k(scores, truth, cutoffs[k]);
      }
      ++counts[p];
    }
  });
  SequentialScores out;
  out.ndcg.assign(cutoffs.size(), 0.0);
  for (std::size_t p = 0; p < patients.size(); ++p) {
    out.pairs += counts[p];
    for (std::size_t k = 0; k < cutoffs.size(); ++k) out.ndcg[k] += sums[p][k];
  }
  if (out.pairs == 0) throw UndefinedMetricError("sequential_ndcg: no pair has a diagnosis target");
  for (double& v : out.ndcg) v /= static_cast<double>(out.pairs);
  return out;
}

std::vector<MetricReport> run_sequential_task(const ehr::Dataset& dataset,
                                              const train::EmbeddingStore& store,
                                              const net::MpvaaParams& params,
                                              const ehr::SplitSpec& split,
                                              const std::vector<std::size_t>& cutoffs,
                                              std::uint64_t seed, const std::string& model,
                                              PrefixMode mode, std::size_t jobs) {
  if (split.task != ehr::Task::sequential_disease) {
    throw ContractError("run_sequential_task: not a sequential_disease split");
  }
  const SequentialScores s = sequential_ndcg(dataset, store, params, split.test, cutoffs,
                                             params.hp.lambda_eval, mode, jobs);
  std::vector<MetricReport> out;
  for (std::size_t k = 0; k < cutoffs.size(); ++k) {
    out.push_back(report(split, "ndcg@" + std::to_string(cutoffs[k]), s.ndcg[k], seed, model));
  }
  return out;
}

}  // namespace mpvaa::eval
