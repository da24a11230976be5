#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "mpvaa/ehr/dataset_io.hpp"
#include "mpvaa/ehr/generator.hpp"
#include "mpvaa/ehr/splits.hpp"
#include "mpvaa/errors.hpp"
#include "mpvaa/eval/tasks.hpp"
#include "mpvaa/net/model.hpp"
#include "mpvaa/train/config.hpp"
#include "mpvaa/train/embedding_store.hpp"
#include "mpvaa/train/pipeline.hpp"

namespace mpvaa::cli {
namespace fs = std::filesystem;

namespace {

const char* kFormats =
    "\nFile formats:\n"
    "  dataset dir     dataset.jsonl (MPVAA-DATASET version 1), vocab.tsv (MPVAA-VOCAB v1)\n"
    "  embedding store store.txt (MPVAA-STORE v1), summary.tsv, patients/<id>.ckpt|.nodes\n"
    "  model dir       model.ckpt (MPVAA-CKPT v1), manifest.txt (MPVAA-MODEL v1),\n"
    "                  loss_log.tsv, lambda_log.tsv, train_summary.txt, train_config.txt\n"
    "  representations MPVAA-REPR v1 tab-separated table\n"
    "  metrics         metrics.jsonl (one MetricReport per line), metrics.csv\n"
    "  config          key=value lines: batch_size learning_rate epochs seed dataset\n"
    "                  checkpoint_dir d_k d_m d_f d_v heads variant shared_encoder\n"
    "                  lambda_eval gae_epochs gae_lr gae_hidden gae_keyed_init\n";

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t jobs = 1;
  std::string variant;
  std::optional<double> lambda_eval;
  std::vector<std::size_t> k = {5, 15, 25};
  std::optional<std::size_t> dim;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> gae_epochs;
  std::string data;
  std::string store;
  std::string model;
  std::string repr;
};

ehr::Dataset load_data(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / ehr::kDatasetFile)) {
    throw MissingArtifactError("no dataset in '" + dir + "'; run the `generate` subcommand first");
  }
  return ehr::load_dataset(dir);
}

train::TrainConfig build_config(const Common& c) {
  train::TrainConfig cfg = train::smoke_config();
  if (!c.config.empty()) {
    if (!fs::exists(c.config)) throw MissingArtifactError("config file '" + c.config + "' not found");
    cfg.apply(net::parse_key_values(ehr::read_text_file(c.config), c.config), c.config);
  }
  cfg.seed = c.seed;
  if (c.dim) {
    cfg.hp.d_k = cfg.hp.d_m = cfg.hp.d_v = *c.dim;
    cfg.hp.d_f = 2 * *c.dim;
    cfg.gae.d_k = *c.dim;
  }
  if (!c.variant.empty()) {
    auto v = net::parse_variant(c.variant);
    if (!v) throw ContractError("unknown variant '" + c.variant + "' (full, mmvaa, vaa, sin)");
    cfg.hp.variant = *v;
  }
  if (c.lambda_eval) cfg.hp.lambda_eval = *c.lambda_eval;
  if (c.epochs) cfg.epochs = *c.epochs;
  if (c.batch_size) cfg.batch_size = *c.batch_size;
  if (c.gae_epochs) cfg.gae.epochs = *c.gae_epochs;
  if (!c.data.empty()) cfg.dataset = c.data;
  cfg.validate();
  return cfg;
}

void write_metrics(const std::vector<eval::MetricReport>& reports, const fs::path& dir) {
  ehr::write_text_file(dir / eval::kMetricsFile, eval::to_jsonl(reports));
  ehr::write_text_file(dir / "metrics.csv", eval::to_csv(reports));
}

struct EvalInputs {
  const ehr::Dataset* dataset;
  const train::EmbeddingStore* store;
  const net::MpvaaParams* params;
  const train::RepresentationTable* table;
};

std::vector<eval::MetricReport> evaluate(const EvalInputs& in, const std::string& task,
                                         const std::string& features, const std::string& prefix,
                                         const Common& c, const std::string& model_tag) {
  std::vector<eval::MetricReport> reports;
  const auto eligible = in.store->ids();
  if (task == "all" || task == "hf") {
    eval::FeatureMap fm;
    if (features == "fused") {
      fm = eval::fused_features(*in.table);
    } else if (features == "dem") {
      fm = eval::dem_features(*in.table);
    } else {
      fm = eval::baseline_features(*in.dataset, *in.store, *eval::parse_fusion(features));
    }
    const auto split =
        ehr::build_hf_split(*in.dataset, in.dataset->hf_concept(), c.seed, eligible);
    auto r = eval::run_hf_task(fm, split, c.seed, model_tag);
    reports.insert(reports.end(), r.begin(), r.end());
  }
  if (task == "all" || task == "sequential") {
    const auto split = ehr::build_sequential_split(*in.dataset, c.seed, eligible);
    auto r = eval::run_sequential_task(*in.dataset, *in.store, *in.params, split, c.k, c.seed,
                                       model_tag,
                                       prefix == "last" ? eval::PrefixMode::last : eval::PrefixMode::all,
                                       c.jobs);
    reports.insert(reports.end(), r.begin(), r.end());
  }
  return reports;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mpvaa: multi-view patient representation pipeline"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.footer(kFormats);

  Common c;
  ehr::GeneratorConfig gen;
  std::string task = "all";
  std::string features = "fused";
  std::string prefix = "all";

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset (dataset.jsonl + vocab.tsv)");
  generate->add_option("--seed", c.seed, "Generator seed")->required();
  generate->add_option("--out", c.out, "Output dataset directory")->required();
  generate->add_option("--patients", gen.patients, "Number of patients")->capture_default_str();
  generate->add_option("--vocab", gen.vocab, "Concept vocabulary size")->capture_default_str();
  generate->add_option("--signal", gen.signal, "Planted HF signal strength in [0, 1]")->capture_default_str();
  generate->add_option("--planted-rate", gen.planted_rate, "Fraction of planted patients")->capture_default_str();
  generate->add_option("--zipf", gen.zipf_exponent, "Zipf exponent of background codes")->capture_default_str();
  generate->add_option("--config", c.config, "Unused; accepted for symmetry with other subcommands");

  auto* pretrain = app.add_subcommand("pretrain-views", "Per-patient GAE embeddings for dem/lab/notes");
  pretrain->add_option("--data", c.data, "Dataset directory (from `generate`)")->required();
  pretrain->add_option("--seed", c.seed, "Pretraining seed")->required();
  pretrain->add_option("--out", c.out, "Output embedding store directory")->required();
  pretrain->add_option("--config", c.config, "Training config file (key=value)");
  pretrain->add_option("--jobs", c.jobs, "Worker threads")->capture_default_str();
  pretrain->add_option("--dim", c.dim, "Embedding dimension d_k (sets d_k = d_m = d_v)");
  pretrain->add_option("--gae-epochs", c.gae_epochs, "GAE epochs per view");

  auto* trainc = app.add_subcommand("train", "Train the attention autoencoder; writes a checkpoint dir");
  trainc->add_option("--data", c.data, "Dataset directory (from `generate`)")->required();
  trainc->add_option("--store", c.store, "Embedding store (from `pretrain-views`)")->required();
  trainc->add_option("--seed", c.seed, "Training seed")->required();
  trainc->add_option("--out", c.out, "Checkpoint directory")->required();
  trainc->add_option("--config", c.config, "Training config file (key=value)");
  trainc->add_option("--variant", c.variant, "full | mmvaa | vaa | sin");
  trainc->add_option("--dim", c.dim, "Model dimension (d_k = d_m = d_v, d_f = 2 dim)");
  trainc->add_option("--lambda-eval", c.lambda_eval, "Pooling lambda used for evaluation");
  trainc->add_option("--epochs", c.epochs, "Training epochs");
  trainc->add_option("--batch-size", c.batch_size, "Minibatch size");

  auto* extract = app.add_subcommand("extract", "Write the patient representation table");
  extract->add_option("--data", c.data, "Dataset directory (from `generate`)")->required();
  extract->add_option("--store", c.store, "Embedding store (from `pretrain-views`)")->required();
  extract->add_option("--model", c.model, "Checkpoint directory (from `train`)")->required();
  extract->add_option("--out", c.out, "Output table path")->required();
  extract->add_option("--lambda-eval", c.lambda_eval, "Pooling lambda (default: manifest value)");
  extract->add_option("--jobs", c.jobs, "Worker threads")->capture_default_str();
  extract->add_option("--config", c.config, "Unused; accepted for symmetry with other subcommands");

  auto* evalc = app.add_subcommand("eval", "Downstream HF prediction and next-visit NDCG");
  evalc->add_option("--data", c.data, "Dataset directory (from `generate`)")->required();
  evalc->add_option("--store", c.store, "Embedding store (from `pretrain-views`)")->required();
  evalc->add_option("--model", c.model, "Checkpoint directory (from `train`)")->required();
  evalc->add_option("--repr", c.repr, "Representation table (from `extract`)")->required();
  evalc->add_option("--seed", c.seed, "Split seed")->required();
  evalc->add_option("--out", c.out, "Output directory for metrics.jsonl / metrics.csv")->required();
  evalc->add_option("--k", c.k, "NDCG cutoffs")->capture_default_str();
  evalc->add_option("--task", task, "all | hf | sequential")
      ->check(CLI::IsMember({"all", "hf", "sequential"}))->capture_default_str();
  evalc->add_option("--features", features, "HF features: fused | dem | concat | avg")
      ->check(CLI::IsMember({"fused", "dem", "concat", "avg"}))->capture_default_str();
  evalc->add_option("--prefix-mode", prefix, "Sequential prefixes: all | last")
      ->check(CLI::IsMember({"all", "last"}))->capture_default_str();
  evalc->add_option("--lambda-eval", c.lambda_eval, "Pooling lambda for next-visit scoring");
  evalc->add_option("--jobs", c.jobs, "Worker threads")->capture_default_str();
  evalc->add_option("--config", c.config, "Unused; accepted for symmetry with other subcommands");

  auto* ablate = app.add_subcommand("ablate", "Train, extract and evaluate full, mmvaa, vaa and sin");
  ablate->add_option("--data", c.data, "Dataset directory (from `generate`)")->required();
  ablate->add_option("--store", c.store, "Embedding store (from `pretrain-views`)")->required();
  ablate->add_option("--seed", c.seed, "Training and split seed")->required();
  ablate->add_option("--out", c.out, "Output directory")->required();
  ablate->add_option("--config", c.config, "Training config file (key=value)");
  ablate->add_option("--dim", c.dim, "Model dimension (d_k = d_m = d_v, d_f = 2 dim)");
  ablate->add_option("--k", c.k, "NDCG cutoffs")->capture_default_str();
  ablate->add_option("--lambda-eval", c.lambda_eval, "Pooling lambda used for evaluation");
  ablate->add_option("--epochs", c.epochs, "Training epochs");
  ablate->add_option("--jobs", c.jobs, "Worker threads")->capture_default_str();

  for (auto* sub : app.get_subcommands({})) sub->footer(kFormats);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c.jobs == 0) throw ContractError("--jobs must be >= 1");
    for (std::size_t k : c.k) {
      if (k == 0) throw ContractError("--k values must be >= 1");
    }

    if (*generate) {
      ehr::validate(gen);
      const ehr::Dataset ds = ehr::generate_synthetic(gen, c.seed);
      ehr::save_dataset(ds, c.out);
      out << "generate: " << ds.patients.size() << " patients, " << ds.vocab.size()
          << " concepts -> " << c.out << "\n";
      return 0;
    }

    if (*pretrain) {
      const train::TrainConfig cfg = build_config(c);
      const ehr::Dataset ds = load_data(c.data);
      const train::EmbeddingStore store = train::pretrain_views(ds, cfg, c.jobs);
      train::save_store(store, c.out);
      out << "pretrain-views: " << store.patients.size() << " patients embedded, "
          << store.skipped.size() << " skipped -> " << c.out << "\n";
      return 0;
    }

    if (*trainc) {
      const train::TrainConfig cfg = build_config(c);
      const train::EmbeddingStore store = train::load_store(c.store);
      const ehr::Dataset ds = load_data(c.data);
      const auto result = train::train_mpvaa(ds, store, cfg, fs::path(c.out));
      out << "train: " << net::to_string(cfg.hp.variant) << ", " << result.log.sequences
          << " sequences, loss " << fmt(result.log.initial_loss) << " -> "
          << fmt(result.log.final_loss) << " -> " << c.out << "\n";
      return 0;
    }

    if (*extract) {
      net::MpvaaParams params = net::load_model(c.model);
      const train::EmbeddingStore store = train::load_store(c.store);
      const ehr::Dataset ds = load_data(c.data);
      const double lambda = c.lambda_eval.value_or(params.hp.lambda_eval);
      const auto table = train::extract_representations(ds, store, params, lambda, c.jobs);
      train::save_table(table, c.out);
      out << "extract: " << table.rows.size() << " representations, " << table.skipped.size()
          << " skipped -> " << c.out << "\n";
      return 0;
    }

    if (*evalc) {
      net::MpvaaParams params = net::load_model(c.model);
      if (c.lambda_eval) params.hp.lambda_eval = *c.lambda_eval;
      const train::RepresentationTable table = train::load_table(c.repr);
      const train::EmbeddingStore store = train::load_store(c.store);
      const ehr::Dataset ds = load_data(c.data);
      const auto reports = evaluate({&ds, &store, &params, &table}, task, features, prefix, c,
                                    std::string(net::to_string(params.hp.variant)));
      write_metrics(reports, c.out);
      for (const auto& r : reports) out << r.task << "\t" << r.metric << "\t" << fmt(r.value) << "\n";
      return 0;
    }

    if (*ablate) {
      const train::TrainConfig base = build_config(c);
      const train::EmbeddingStore store = train::load_store(c.store);
      const ehr::Dataset ds = load_data(c.data);
      std::vector<eval::MetricReport> all;
      for (net::Variant v : net::kAllVariants) {
        train::TrainConfig cfg = base;
        cfg.hp.variant = v;
        const std::string name(net::to_string(v));
        const fs::path dir = fs::path(c.out) / name;
        auto result = train::train_mpvaa(ds, store, cfg, dir / "model");
        const auto table =
            train::extract_representations(ds, store, result.params, cfg.hp.lambda_eval, c.jobs);
        train::save_table(table, dir / train::kReprFile);
        const auto reports =
            evaluate({&ds, &store, &result.params, &table}, "all", "fused", "all", c, name);
        write_metrics(reports, dir);
        all.insert(all.end(), reports.begin(), reports.end());
        out << "ablate: " << name << " done\n";
      }
      write_metrics(all, c.out);
      std::string table = "task\tmetric\tvariant\tvalue\n";
      std::map<std::pair<std::string, std::string>, std::vector<const eval::MetricReport*>> by_metric;
      std::vector<std::pair<std::string, std::string>> order;
      for (const auto& r : all) {
        auto key = std::make_pair(r.task, r.metric);
        if (!by_metric.count(key)) order.push_back(key);
        by_metric[key].push_back(&r);
      }
      for (const auto& key : order) {
        for (const auto* r : by_metric[key]) {
          table += r->task + "\t" + r->metric + "\t" + r->model + "\t" + fmt(r->value) + "\n";
        }
      }
      ehr::write_text_file(fs::path(c.out) / "ablation.tsv", table);
      out << table;
      return 0;
    }
  } catch (const MissingArtifactError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("mpvaa");
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace mpvaa::cli
