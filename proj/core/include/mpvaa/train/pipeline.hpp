#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpvaa/ehr/record.hpp"
#include "mpvaa/graph/view_graph.hpp"
#include "mpvaa/net/mpvaa.hpp"
#include "mpvaa/train/config.hpp"
#include "mpvaa/train/embedding_store.hpp"

namespace mpvaa::train {

// Lab and notes feature layout of a dataset; `notes` must outlive the result.
graph::FeatureContext feature_context(const ehr::Dataset& dataset,
                                      const graph::NoteFeaturizer& notes);

// GAE embeddings of one record for the three views. Each view trains from its
// own stream of `seed`.
ViewEmbeddings pretrain_patient(const ehr::PatientRecord& record, const graph::FeatureContext& ctx,
                                const graph::GaeConfig& gae, std::uint64_t seed,
                                GaeLosses* losses = nullptr);

// Per-patient GAE pretraining over the observed window (all visits but the
// last). Patients are independent and spread over `jobs` threads; the result
// does not depend on `jobs`. A patient whose GAE diverges is skipped and
// listed in the store's summary.
EmbeddingStore pretrain_views(const ehr::Dataset& dataset, const TrainConfig& config,
                              std::size_t jobs = 1);

struct TrainingSequence {
  std::string id;
  net::PatientViews views;
};

// Observed-window sequences of every patient present in the store, in dataset
// order. Patients without embeddings are appended to `missing`.
std::vector<TrainingSequence> training_sequences(const ehr::Dataset& dataset,
                                                 const EmbeddingStore& store,
                                                 const net::HyperParams& hp,
                                                 std::vector<std::string>* missing = nullptr);

// Token-weighted mean NLL over the sequences at a fixed lambda.
double evaluate_loss(const net::MpvaaParams& params, const std::vector<TrainingSequence>& seqs,
                     double lambda);

struct TrainLog {
  std::vector<double> epoch_loss;            // token-weighted mean batch loss per epoch
  std::vector<std::vector<double>> lambdas;  // per epoch, one draw per batch
  double initial_loss = 0.0;                 // evaluate_loss at lambda_eval before training
  double final_loss = 0.0;                   // same after the last epoch
  std::size_t sequences = 0;
  std::size_t tokens = 0;
};

struct TrainResult {
  net::MpvaaParams params;
  TrainLog log;
};

inline constexpr const char* kLossLog = "loss_log.tsv";
inline constexpr const char* kLambdaLog = "lambda_log.tsv";
inline constexpr const char* kTrainSummary = "train_summary.txt";

// Adam on the reconstruction loss with one lambda per minibatch. When
// `checkpoint_dir` is set the model and logs are written after every epoch; a
// non-finite loss throws NumericError and leaves the previous epoch's files.
TrainResult train_mpvaa(const ehr::Dataset& dataset, const EmbeddingStore& store,
                        const TrainConfig& config,
                        const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

// Representation table:
//   MPVAA-REPR v1 fused_dim=<d> dem_dim=<d> lambda_eval=<l>
//   id<TAB>c_0 ... c_{d-1}<TAB>z_0 ... z_{d-1}
// one row per patient in id order.
inline constexpr const char* kReprFormat = "MPVAA-REPR v1";
inline constexpr const char* kReprFile = "representations.tsv";

struct RepresentationTable {
  std::size_t fused_dim = 0;
  std::size_t dem_dim = 0;
  double lambda_eval = 0.5;
  std::map<std::string, net::PatientRepresentation> rows;
  std::vector<std::string> skipped;
};

RepresentationTable extract_representations(const ehr::Dataset& dataset,
                                            const EmbeddingStore& store,
                                            const net::MpvaaParams& params, double lambda_eval,
                                            std::size_t jobs = 1);

std::string serialize_table(const RepresentationTable& table);
RepresentationTable parse_table(const std::string& text);
void save_table(const RepresentationTable& table, const std::filesystem::path& path);
// MissingArtifactError naming `extract` when the file does not exist.
RepresentationTable load_table(const std::filesystem::path& path);

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception is
// rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace mpvaa::train
