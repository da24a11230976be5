#include "mpvaa/train/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "mpvaa/ehr/dataset_io.hpp"
#include "mpvaa/errors.hpp"
#include "mpvaa/numkit/adam.hpp"
#include "mpvaa/numkit/ops.hpp"
#include "mpvaa/numkit/rng.hpp"

namespace mpvaa::train {
namespace fs = std::filesystem;

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

graph::FeatureContext feature_context(const ehr::Dataset& dataset,
                                      const graph::NoteFeaturizer& notes) {
  graph::FeatureContext ctx;
  ctx.lab_items = dataset.meta.lab_items;
  ctx.lab_bins = dataset.meta.lab_bins;
  ctx.notes = &notes;
  return ctx;
}

ViewEmbeddings pretrain_patient(const ehr::PatientRecord& record, const graph::FeatureContext& ctx,
                                const graph::GaeConfig& gae, std::uint64_t seed,
                                GaeLosses* losses) {
  ViewEmbeddings out;
  for (std::size_t v = 0; v < 3; ++v) {
    const graph::ViewGraph g = graph::build_view_graph(graph::kViews[v], record, ctx);
    graph::GaeResult r = graph::train_gae(g, gae, nk::SeededRng(nk::derive_seed(seed, v)));
    if (losses) {
      losses->initial[v] = r.initial_loss;
      losses->final[v] = r.final_loss;
    }
    out[v] = std::move(r.embedding);
  }
  return out;
}

EmbeddingStore pretrain_views(const ehr::Dataset& dataset, const TrainConfig& config,
                              std::size_t jobs) {
  const graph::OffsetMentionFeaturizer notes(dataset.meta.word_vocab, dataset.vocab.size());
  const graph::FeatureContext ctx = feature_context(dataset, notes);
  const std::size_t n = dataset.patients.size();
  std::vector<std::optional<ViewEmbeddings>> results(n);
  std::vector<GaeLosses> losses(n);
  std::vector<std::string> reasons(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const ehr::PatientRecord& rec = dataset.patients[i];
    const std::uint64_t seed = config.gae.keyed_init
                                   ? config.seed
                                   : nk::derive_seed(config.seed, nk::hash_string(rec.id));
    try {
      results[i] = pretrain_patient(ehr::observed_window(rec), ctx, config.gae, seed, &losses[i]);
    } catch (const NumericError& e) {
      reasons[i] = e.what();
    }
  });
  EmbeddingStore store;
  store.d_k = config.gae.d_k;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = dataset.patients[i].id;
    if (results[i]) {
      store.patients.emplace(id, std::move(*results[i]));
      store.losses[id] = losses[i];
    } else {
      store.skipped.push_back({id, "GAE diverged: " + reasons[i]});
    }
  }
  return store;
}

std::vector<TrainingSequence> training_sequences(const ehr::Dataset& dataset,
                                                 const EmbeddingStore& store,
                                                 const net::HyperParams& hp,
                                                 std::vector<std::string>* missing) {
  std::vector<TrainingSequence> out;
  for (const auto& rec : dataset.patients) {
    if (!store.contains(rec.id)) {
      if (missing) missing->push_back(rec.id);
      continue;
    }
    const auto seq = ehr::flatten_concepts(ehr::observed_window(rec));
    out.push_back({rec.id, net::make_patient_views(seq, store.at(rec.id), hp)});
  }
  return out;
}

double evaluate_loss(const net::MpvaaParams& params, const std::vector<TrainingSequence>& seqs,
                     double lambda) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : seqs) {
    total += net::sequence_nll(params, s.views, lambda).item();
    tokens += s.views.sequence.size();
  }
  if (tokens == 0) throw ContractError("evaluate_loss: no sequences");
  return total / static_cast<double>(tokens);
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_logs(const TrainLog& log, const fs::path& dir) {
  std::string loss = "epoch\tloss\n";
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    loss += std::to_string(e + 1) + "\t" + fmt(log.epoch_loss[e]) + "\n";
  }
  ehr::write_text_file(dir / kLossLog, loss);
  std::string lam = "epoch\tbatch\tlambda\n";
  for (std::size_t e = 0; e < log.lambdas.size(); ++e) {
    for (std::size_t b = 0; b < log.lambdas[e].size(); ++b) {
      lam += std::to_string(e + 1) + "\t" + std::to_string(b) + "\t" + fmt(log.lambdas[e][b]) + "\n";
    }
  }
  ehr::write_text_file(dir / kLambdaLog, lam);
}

void write_checkpoint(const net::MpvaaParams& params, const TrainLog& log, const TrainConfig& cfg,
                      const fs::path& dir, std::size_t epochs_done) {
  save_model(params, dir,
             {{"epochs_done", std::to_string(epochs_done)}, {"seed", std::to_string(cfg.seed)}});
  write_logs(log, dir);
  save_config(cfg, dir / "train_config.txt");
}

}  // namespace

TrainResult train_mpvaa(const ehr::Dataset& dataset, const EmbeddingStore& store,
                        const TrainConfig& config,
                        const std::optional<fs::path>& checkpoint_dir) {
  config.validate();
  if (store.d_k != config.hp.d_k) {
    throw ContractError("train_mpvaa: store embeddings have d_k=" + std::to_string(store.d_k) +
                        " but the config asks for d_k=" + std::to_string(config.hp.d_k));
  }
  net::HyperParams hp = config.hp;
  hp.vocab = dataset.vocab.size();
  const auto seqs = training_sequences(dataset, store, hp);
  if (seqs.empty()) throw ContractError("train_mpvaa: no patient has embeddings");

  nk::SeededRng init_rng(nk::derive_seed(config.seed, 1));
  TrainResult result{net::init_mpvaa(hp, init_rng), {}};
  auto& params = result.params;
  auto& log = result.log;
  log.sequences = seqs.size();
  for (const auto& s : seqs) log.tokens += s.views.sequence.size();

  std::vector<nk::Tensor> tensors = params.parameters();
  nk::AdamState adam = nk::make_adam_state(tensors, {config.learning_rate});
  nk::SeededRng order_rng(nk::derive_seed(config.seed, 2));
  nk::SeededRng lambda_rng(nk::derive_seed(config.seed, 3));

  log.initial_loss = evaluate_loss(params, seqs, hp.lambda_eval);
  std::vector<std::size_t> order(seqs.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(std::span<std::size_t>(order));
    double epoch_total = 0.0;
    std::size_t epoch_tokens = 0;
    std::vector<double> lambdas;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double lambda = hp.samples_lambda() ? lambda_rng.uniform01() : hp.lambda_eval;
      lambdas.push_back(lambda);
      nk::GradTape tape;
      nk::TapeScope scope(tape);
      nk::Tensor total;
      std::size_t tokens = 0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = seqs[order[i]];
        nk::Tensor nll = net::sequence_nll(params, s.views, lambda);
        total = total.defined() ? nk::add(total, nll) : nll;
        tokens += s.views.sequence.size();
      }
      nk::Tensor loss = nk::scale(total, 1.0 / static_cast<double>(tokens));
      if (!std::isfinite(loss.item())) {
        throw NumericError("train_mpvaa: non-finite loss in epoch " + std::to_string(epoch + 1) +
                           "; last good checkpoint retained");
      }
      nk::backward(loss);
      nk::adam_step(tensors, adam);
      epoch_total += loss.item() * static_cast<double>(tokens);
      epoch_tokens += tokens;
    }
    log.epoch_loss.push_back(epoch_total / static_cast<double>(epoch_tokens));
    log.lambdas.push_back(std::move(lambdas));
    if (checkpoint_dir) write_checkpoint(params, log, config, *checkpoint_dir, epoch + 1);
  }
  log.final_loss = evaluate_loss(params, seqs, hp.lambda_eval);
  if (checkpoint_dir) {
    write_checkpoint(params, log, config, *checkpoint_dir, config.epochs);
    ehr::write_text_file(*checkpoint_dir / kTrainSummary,
                         net::format_key_values({{"initial_loss", fmt(log.initial_loss)},
                                                 {"final_loss", fmt(log.final_loss)},
                                                 {"sequences", std::to_string(log.sequences)},
                                                 {"tokens", std::to_string(log.tokens)},
                                                 {"epochs", std::to_string(config.epochs)}}));
  }
  return result;
}

RepresentationTable extract_representations(const ehr::Dataset& dataset,
                                            const EmbeddingStore& store,
                                            const net::MpvaaParams& params, double lambda_eval,
                                            std::size_t jobs) {
  RepresentationTable table;
  table.fused_dim = params.hp.d_m;
  table.dem_dim = params.hp.pooled_dim();
  table.lambda_eval = lambda_eval;
  std::vector<const ehr::PatientRecord*> present;
  for (const auto& rec : dataset.patients) {
    if (store.contains(rec.id)) {
      present.push_back(&rec);
    } else {
      table.skipped.push_back(rec.id);
    }
  }
  std::vector<net::PatientRepresentation> reps(present.size());
  parallel_for(present.size(), jobs, [&](std::size_t i) {
    const auto seq = ehr::flatten_concepts(ehr::observed_window(*present[i]));
    const auto views = net::make_patient_views(seq, store.at(present[i]->id), params.hp);
    reps[i] = net::patient_representation(params, views, lambda_eval);
  });
  for (std::size_t i = 0; i < present.size(); ++i) {
    table.rows.emplace(present[i]->id, std::move(reps[i]));
  }
  return table;
}

std::string serialize_table(const RepresentationTable& table) {
  std::string out = std::string(kReprFormat) + " fused_dim=" + std::to_string(table.fused_dim) +
                    " dem_dim=" + std::to_string(table.dem_dim) +
                    " lambda_eval=" + fmt(table.lambda_eval) + "\n";
  for (const auto& [id, rep] : table.rows) {
    out += id;
    for (double v : rep.fused) out += "\t" + fmt(v);
    for (double v : rep.z_dem) out += "\t" + fmt(v);
    out += "\n";
  }
  return out;
}

RepresentationTable parse_table(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind(kReprFormat, 0) != 0) {
    throw ParseError(std::string(kReprFile) + ":1: expected header '" + kReprFormat + "'");
  }
  RepresentationTable table;
  std::istringstream hs(line.substr(std::string(kReprFormat).size()));
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ParseError(std::string(kReprFile) + ":1: bad header field");
    const std::string key = tok.substr(0, eq);
    const std::string value = tok.substr(eq + 1);
    if (key == "fused_dim") {
      table.fused_dim = std::stoull(value);
    } else if (key == "dem_dim") {
      table.dem_dim = std::stoull(value);
    } else if (key == "lambda_eval") {
      table.lambda_eval = std::stod(value);
    }
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    std::getline(ls, id, '\t');
    std::vector<double> values;
    std::string cell;
    while (std::getline(ls, cell, '\t')) values.push_back(std::stod(cell));
    if (values.size() != table.fused_dim + table.dem_dim) {
      throw ParseError(std::string(kReprFile) + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(table.fused_dim + table.dem_dim) + " values, got " +
                       std::to_string(values.size()));
    }
    net::PatientRepresentation rep;
    rep.fused.assign(values.begin(), values.begin() + table.fused_dim);
    rep.z_dem.assign(values.begin() + table.fused_dim, values.end());
    table.rows.emplace(id, std::move(rep));
  }
  return table;
}

void save_table(const RepresentationTable& table, const fs::path& path) {
  ehr::write_text_file(path, serialize_table(table));
}

RepresentationTable load_table(const fs::path& path) {
  if (!fs::exists(path)) {
    throw MissingArtifactError("no representation table at '" + path.string() +
                               "'; run the `extract` subcommand first");
  }
  return parse_table(ehr::read_text_file(path));
}

}  // namespace mpvaa::train
