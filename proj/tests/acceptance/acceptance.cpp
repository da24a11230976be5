// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mpvaa/ehr/dataset_io.hpp"
#include "mpvaa/ehr/generator.hpp"
#include "mpvaa/ehr/splits.hpp"
#include "mpvaa/errors.hpp"
#include "mpvaa/eval/metrics.hpp"
#include "mpvaa/eval/tasks.hpp"
#include "mpvaa/graph/gae.hpp"
#include "mpvaa/graph/view_graph.hpp"
#include "mpvaa/net/attention.hpp"
#include "mpvaa/net/model.hpp"
#include "mpvaa/net/mpvaa.hpp"
#include "mpvaa/train/config.hpp"
#include "mpvaa/train/pipeline.hpp"
#include "op_cases.hpp"
#include "testkit.hpp"

namespace fs = std::filesystem;
using namespace mpvaa;
using nk::Dtype;
using nk::Tensor;

namespace {

// Tolerances.
constexpr double kGradTol = 1e-3;
constexpr double kGradStep = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr double kStochasticTol = 1e-6;
constexpr double kLogNTol = 1e-6;
constexpr double kPermutationTol = 1e-5;
constexpr double kAucTol = 1e-9;
constexpr double kSmokeSeconds = 600.0;
constexpr double kSmokeLossRatio = 0.7;
constexpr double kVisitsTol = 0.15;  // mean visits per patient, 500 patients
constexpr double kCodesTol = 0.5;    // mean codes per visit
constexpr double kSignalAuc = 0.80;
constexpr double kControlAuc = 0.57;
constexpr double kShuffledTol = 0.07;
constexpr std::uint64_t kSignalSeeds[] = {1, 2, 3, 4, 5};
constexpr std::uint64_t kShufflesPerSeed = 5;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && out_.pass) out_.detail = what;
    out_.pass = out_.pass && ok;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  Outcome result() const {
    Outcome o = out_;
    if (o.pass) o.detail = notes_;
    return o;
  }

 private:
  Outcome out_;
  std::string notes_;
};

std::string num(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  if (code != 0) std::fprintf(stderr, "mpvaa %s: %s\n", args[0].c_str(), err.str().c_str());
  return code;
}

bool same_file(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) && testkit::slurp(a) == testkit::slurp(b);
}

// Every regular file under `a` has a byte-identical twin under `b`.
bool same_tree(const fs::path& a, const fs::path& b, std::string& first_diff) {
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(e.path(), a);
    if (!same_file(e.path(), b / rel)) {
      first_diff = rel.string();
      return false;
    }
  }
  return files > 0;
}

// Random connected graph: random tree plus a few chords, redrawn until some
// pair of nodes is more than two hops apart.
Tensor connected_graph(std::size_t n, nk::SeededRng& rng, std::vector<std::size_t>& dist) {
  for (;;) {
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
      const std::size_t j = rng.below(i);
      a[i * n + j] = a[j * n + i] = 1.0;
    }
    for (int e = 0; e < 3; ++e) {
      const std::size_t i = rng.below(n), j = rng.below(n);
      if (i != j) a[i * n + j] = a[j * n + i] = 1.0;
    }
    dist.assign(n * n, n + 1);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<std::size_t> queue = {s};
      dist[s * n + s] = 0;
      for (std::size_t q = 0; q < queue.size(); ++q) {
        for (std::size_t j = 0; j < n; ++j) {
          if (a[queue[q] * n + j] > 0 && dist[s * n + j] > n) {
            dist[s * n + j] = dist[s * n + queue[q]] + 1;
            queue.push_back(j);
          }
        }
      }
    }
    if (*std::max_element(dist.begin(), dist.end()) > 2) {
      return Tensor::from({n, n}, std::move(a), Dtype::f64);
    }
  }
}

void randomize_offsets(const net::MpvaaParams& params, nk::SeededRng& rng) {
  for (const auto& [name, t] : params.named_parameters()) {
    const bool gain = name.ends_with("gamma");
    const bool offset = name.ends_with("beta") || name.ends_with(".ba") ||
                        name.ends_with(".bb") || name.ends_with(".bp");
    if (!gain && !offset) continue;
    for (double& v : t.mutable_data()) v = gain ? rng.uniform(0.5, 1.5) : rng.uniform(-0.5, 0.5);
  }
}

net::HyperParams tiny_hp(std::size_t vocab, net::Variant v = net::Variant::full) {
  net::HyperParams hp;
  hp.d_k = hp.d_m = hp.d_v = 4;
  hp.d_f = 6;
  hp.heads = 2;
  hp.vocab = vocab;
  hp.variant = v;
  return hp;
}

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
  Checker check;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t checked = 0;
  double worst = 0.0;
  const auto ops = testkit::op_cases();
  for (std::size_t k = 0; k < ops.size(); ++k) {
    nk::SeededRng rng(nk::derive_seed(101, k));
    for (int point = 0; point < 10; ++point) {
      std::vector<Tensor> inputs;
      for (const auto& s : ops[k].shapes) inputs.push_back(testkit::random_tensor(s, rng, -2, 2));
      auto loss = [&] { return testkit::weighted_total(ops[k].fn(inputs)); };
      const auto r = testkit::check_gradients(loss, inputs, rng, kGradStep);
      checked += r.checked;
      worst = std::max(worst, r.max_rel_error);
      check.expect(r.max_rel_error < kGradTol,
                   std::string(ops[k].name) + " rel error " + num(r.max_rel_error, 6));
    }
  }

  // Reconstruction loss of a 2-visit, 6-concept patient, inputs from the GAE.
  ehr::PatientRecord toy{"toy", {testkit::visit({0, 2, 4}), testkit::visit({1, 3, 5})}};
  for (auto& v : toy.visits) {
    v.labs = {{0, 1}, {3, 0}};
    v.note_tokens = {1, 2, 10 + v.concepts[0], 3, 4};
  }
  toy.visits[0].demo = {ehr::AgeBin::adult, ehr::Gender::female, ehr::WeightBin::healthy};
  toy.visits[1].demo = {ehr::AgeBin::adult, ehr::Gender::female, ehr::WeightBin::overweight};
  const graph::OffsetMentionFeaturizer notes(10, 6);
  const graph::FeatureContext ctx{8, 2, &notes, graph::kDefaultWindow};
  graph::GaeConfig gae;
  gae.d_k = 4;
  gae.epochs = 30;
  const auto embeddings = train::pretrain_patient(toy, ctx, gae, 3);
  const auto seq = ehr::flatten_concepts(toy);
  double worst_full = 0.0;
  nk::SeededRng rng(202);
  const net::HyperParams hp = tiny_hp(6);
  for (int point = 0; point < 10; ++point) {
    const net::MpvaaParams params = net::init_mpvaa(hp, rng, Dtype::f64);
    randomize_offsets(params, rng);
    // GAE inputs have tied rows: perturb parameters only.
    const bool gae_inputs = point % 2 == 1;
    net::PatientViews views = net::make_patient_views(
        seq, gae_inputs ? embeddings : testkit::random_views({0, 1, 2, 3, 4, 5}, 4, rng), hp,
        Dtype::f64);
    std::vector<Tensor> inputs = params.parameters();
    if (!gae_inputs) {
      for (auto* e : {&views.dem, &views.lab, &views.notes}) e->set_requires_grad(true);
      inputs.insert(inputs.end(), {views.dem, views.lab, views.notes});
    }
    const double lambda = rng.uniform01();
    auto loss = [&] { return net::reconstruction_loss(net::forward(params, views, lambda).logits, seq); };
    const auto r = testkit::check_gradients(loss, inputs, rng, kGradStep);
    checked += r.checked;
    worst_full = std::max(worst_full, r.max_rel_error);
    check.expect(r.max_rel_error < kGradTol, "full loss rel error " + num(r.max_rel_error, 6));
  }
  const double secs = seconds_since(t0);
  check.expect(secs < kGradSeconds, "took " + num(secs, 1) + " s");
  check.note(std::to_string(ops.size()) + " ops + full loss, " + std::to_string(checked) +
             " entries, max rel err ops " + num(worst, 8) + " full " + num(worst_full, 8) + ", " +
             num(secs, 1) + " s");
  return check.result();
}

Outcome endpoint_checks() {
  Checker check;
  nk::SeededRng rng(303);
  for (int t = 0; t < 50; ++t) {
    const Tensor h = testkit::random_tensor({1 + rng.below(12), 1 + rng.below(9)}, rng, -4, 4, false);
    const Tensor mx = net::mixed_pool(h, 1.0), mean = net::mixed_pool(h, 0.0);
    const Tensor omx = nk::reduce_max(h, nk::Axis::rows), omean = nk::reduce_mean(h, nk::Axis::rows);
    for (std::size_t c = 0; c < h.cols(); ++c) {
      check.expect(mx.at(c) == omx.at(c), "lambda=1 differs from max");
      check.expect(mean.at(c) == omean.at(c), "lambda=0 differs from mean");
    }
  }
  for (std::size_t n : {2u, 6u, 200u, 1000u}) {
    std::vector<std::size_t> targets;
    for (int i = 0; i < 9; ++i) targets.push_back(rng.below(n));
    const double l = net::reconstruction_loss(Tensor::zeros({9, n}, Dtype::f64), targets).item();
    check.expect(std::abs(l - std::log(double(n))) < kLogNTol, "uniform loss " + num(l, 9));
  }
  // Through the model: zero output weights give uniform logits.
  {
    const net::HyperParams hp = tiny_hp(12);
    net::MpvaaParams params = net::init_mpvaa(hp, rng, Dtype::f64);
    for (double& v : params.output.wp.mutable_data()) v = 0.0;
    const std::vector<std::size_t> nodes = {0, 3, 5, 7, 11};
    const auto emb = testkit::random_views(nodes, 4, rng);
    const std::vector<std::size_t> seq = {0, 3, 11, 7, 5, 3};
    const auto views = net::make_patient_views(seq, emb, hp, Dtype::f64);
    const double l = net::reconstruction_loss(net::forward(params, views, 0.5).logits, seq).item();
    check.expect(std::abs(l - std::log(12.0)) < kLogNTol, "model uniform loss " + num(l, 9));
  }
  double worst = 0.0;
  auto rows_sum_to_one = [&](const Tensor& m, const std::string& what) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < m.cols(); ++c) {
        total += m.at(r, c);
        check.expect(m.at(r, c) >= 0.0, what + " negative entry");
      }
      worst = std::max(worst, std::abs(total - 1.0));
      check.expect(std::abs(total - 1.0) < kStochasticTol, what + " row sum " + num(total, 9));
    }
  };
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(10);
    const Tensor x = testkit::random_tensor({n, n}, rng, -30, 30, false);
    rows_sum_to_one(nk::softmax_rows(x), "softmax");
    rows_sum_to_one(nk::softmax_rows(x, true), "causal softmax");
    const std::size_t heads = 1 + rng.below(3);
    const std::size_t d = 2 * heads;
    const auto att = net::init_attention(d, d, d, rng, Dtype::f64);
    const Tensor q = testkit::random_tensor({n, d}, rng, -3, 3, false);
    const Tensor k = testkit::random_tensor({n, d}, rng, -3, 3, false);
    for (bool causal : {false, true}) {
      std::vector<Tensor> w;
      net::multi_head_attention(q, k, k, att, heads, causal, &w);
      for (const auto& m : w) rows_sum_to_one(m, "attention");
    }
    std::vector<std::size_t> dist;
    const Tensor a = graph::normalize_adjacency(connected_graph(3 + n, rng, dist));
    const Tensor f = testkit::random_tensor({3 + n, 3 + n}, rng, 0, 1, false);
    graph::GaeConfig cfg;
    cfg.d_k = 1 + rng.below(8);
    cfg.d_hidden = 1 + rng.below(8);
    const auto p = graph::init_gae_params(3 + n, cfg, rng, Dtype::f64);
    rows_sum_to_one(graph::gcn_forward(f, a, p), "gcn");
  }
  // Cross-view gate of the decoder.
  for (int t = 0; t < 20; ++t) {
    const net::HyperParams hp = tiny_hp(8);
    const auto params = net::init_mpvaa(hp, rng, Dtype::f64);
    const auto emb = testkit::random_views({0, 1, 2, 3, 4, 5, 6, 7}, 4, rng);
    std::vector<std::size_t> seq;
    for (int i = 0; i < 6; ++i) seq.push_back(rng.below(8));
    const auto fp = net::forward(params, net::make_patient_views(seq, emb, hp, Dtype::f64), 0.5);
    rows_sum_to_one(fp.decoder.cross.gate, "gate");
  }
  check.note("max row-sum deviation " + num(worst, 12));
  return check.result();
}

Outcome permutation_invariance() {
  Checker check;
  ehr::GeneratorConfig g;
  g.patients = 10;
  const auto ds = ehr::generate_synthetic(g, 7);
  const graph::OffsetMentionFeaturizer notes(ds.meta.word_vocab, ds.vocab.size());
  const auto ctx = train::feature_context(ds, notes);
  train::TrainConfig cfg = train::smoke_config();
  cfg.hp.vocab = ds.vocab.size();
  cfg.hp.variant = net::Variant::full;
  cfg.gae.epochs = 30;
  nk::SeededRng rng(404);
  const auto params = net::init_mpvaa(cfg.hp, rng);
  double worst = 0.0;
  for (const auto& p : ds.patients) {
    const auto window = ehr::observed_window(p);
    const auto emb = train::pretrain_patient(window, ctx, cfg.gae, 5);
    std::vector<std::size_t> seq = ehr::flatten_concepts(window);
    const auto base = net::encode_views(params, net::make_patient_views(seq, emb, cfg.hp), 0.37);
    for (int k = 0; k < 20; ++k) {
      rng.shuffle(std::span<std::size_t>(seq));
      const auto perm = net::encode_views(params, net::make_patient_views(seq, emb, cfg.hp), 0.37);
      for (std::size_t v = 0; v < 3; ++v) {
        for (std::size_t c = 0; c < base.pooled[v].numel(); ++c) {
          const double d = std::abs(base.pooled[v].at(c) - perm.pooled[v].at(c));
          worst = std::max(worst, d);
          check.expect(d <= kPermutationTol, "pooled entry moved by " + num(d, 9));
        }
      }
    }
  }
  check.note("10 patients x 20 permutations x 3 views, max |dz| " + num(worst, 10));
  return check.result();
}

Outcome causality() {
  Checker check;
  nk::SeededRng rng(505);
  std::size_t probes = 0;
  for (net::Variant variant : net::kAllVariants) {
    for (int t = 0; t < 10; ++t) {
      net::HyperParams hp = tiny_hp(10, variant);
      hp.d_k = hp.d_m = hp.d_v = 6;
      hp.heads = 3;
      const auto params = net::init_mpvaa(hp, rng, Dtype::f64);
      randomize_offsets(params, rng);
      const std::size_t len = 3 + rng.below(8);
      const Tensor shifted = testkit::random_tensor({len, 6}, rng, -1, 1, false);
      const std::size_t zw = hp.pooled_dim();
      const Tensor zd = testkit::random_tensor({1, zw}, rng, -1, 1, false);
      const Tensor zl = testkit::random_tensor({1, zw}, rng, -1, 1, false);
      const Tensor zn = testkit::random_tensor({1, zw}, rng, -1, 1, false);
      const Tensor base =
          net::sequence_logits(net::decoder_forward(shifted, zd, zl, zn, params).hidden, params.output);
      for (std::size_t j = 0; j + 1 < len; ++j) {
        const Tensor changed = shifted.detach();
        for (std::size_t c = 0; c < 6; ++c) changed.mutable_data()[(j + 1) * 6 + c] += rng.uniform(-2, 2);
        const Tensor logits = net::sequence_logits(
            net::decoder_forward(changed, zd, zl, zn, params).hidden, params.output);
        for (std::size_t r = 0; r <= j; ++r) {
          for (std::size_t c = 0; c < hp.vocab; ++c) {
            check.expect(logits.at(r, c) == base.at(r, c),
                         "row " + std::to_string(r) + " moved after perturbing " + std::to_string(j + 1));
          }
        }
        ++probes;
      }
    }
  }
  check.note(std::to_string(probes) + " perturbations, all earlier rows bit-identical");
  return check.result();
}

Outcome metric_oracles() {
  Checker check;
  nk::SeededRng rng(606);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(64);
    graph::BinaryVector x(n), y(n);
    std::size_t nx = 0, ny = 0, both = 0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.bernoulli(0.35);
      y[i] = rng.bernoulli(0.35);
    }
    std::set<std::size_t> sx, sy;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i]) sx.insert(i);
      if (y[i]) sy.insert(i);
    }
    nx = sx.size();
    ny = sy.size();
    for (auto i : sx) both += sy.count(i);
    const double expected = nx + ny == 0 ? 0.0 : 2.0 * double(both) / double(nx + ny);
    check.expect(graph::dice(x, y) == expected, "dice mismatch");
  }
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + rng.below(60);
    std::vector<double> s(n);
    for (double& v : s) v = double(rng.below(25));
    std::set<std::size_t> truth;
    const std::size_t m = 1 + rng.below(std::min<std::size_t>(n, 8));
    while (truth.size() < m) truth.insert(rng.below(n));
    const std::size_t k = 1 + rng.below(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });
    double dcg = 0.0, ideal = 0.0;
    for (std::size_t i = 0; i < k; ++i) dcg += truth.count(order[i]) / std::log2(double(i) + 2.0);
    for (std::size_t i = 0; i < std::min(k, m); ++i) ideal += 1.0 / std::log2(double(i) + 2.0);
    const std::vector<std::size_t> tv(truth.begin(), truth.end());
    const double got = eval::ndcg_at_k(s, tv, k);
    check.expect(std::abs(got - dcg / ideal) < 1e-12, "ndcg " + num(got, 9) + " vs " + num(dcg / ideal, 9));
  }
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(80);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.bernoulli(0.5) ? double(rng.below(10)) : rng.uniform01();
      y[i] = rng.bernoulli(0.5);
    }
    y[0] = 1;
    y[1] = 0;
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1.0;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
      }
    }
    const double d = std::abs(eval::auc_roc(s, y) - wins / pairs);
    worst = std::max(worst, d);
    check.expect(d < kAucTol, "auc off by " + num(d, 12));
  }
  check.note("100 dice, 100 ndcg, 100 auc instances; max auc error " + num(worst, 14));
  return check.result();
}

Outcome gae_sanity() {
  Checker check;
  nk::SeededRng rng(707);
  std::size_t far_pairs = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 10;
    std::vector<std::size_t> dist;
    graph::ViewGraph g;
    g.adjacency = connected_graph(n, rng, dist);
    g.features = testkit::random_tensor({n, n}, rng, 0, 1, false);
    g.nodes.resize(n);
    std::iota(g.nodes.begin(), g.nodes.end(), 0);
    graph::GaeConfig cfg;
    cfg.d_k = 8;
    cfg.epochs = 100;
    const auto params = graph::init_gae_params(n, cfg, rng, Dtype::f64);
    const auto r = graph::train_gae(g, cfg, params);
    worst_ratio = std::max(worst_ratio, r.final_loss / r.initial_loss);
    check.expect(r.final_loss < r.initial_loss,
                 "graph " + std::to_string(t) + " loss " + num(r.initial_loss) + " -> " + num(r.final_loss));
    const Tensor a = graph::normalize_adjacency(g.adjacency);
    const Tensor z = graph::gcn_forward(g.features, a, params);
    for (std::size_t far = 0; far < n; ++far) {
      const Tensor x = g.features.detach();
      for (std::size_t c = 0; c < n; ++c) x.mutable_data()[far * n + c] = rng.uniform01();
      const Tensor z2 = graph::gcn_forward(x, a, params);
      for (std::size_t node = 0; node < n; ++node) {
        if (dist[node * n + far] <= 2) continue;
        ++far_pairs;
        for (std::size_t c = 0; c < cfg.d_k; ++c) {
          check.expect(z.at(node, c) == z2.at(node, c), "node beyond 2 hops changed");
        }
      }
    }
  }
  check.note("20 graphs, worst final/initial loss " + num(worst_ratio) + ", " +
             std::to_string(far_pairs) + " far pairs unchanged");
  return check.result();
}

Outcome end_to_end_smoke(const fs::path& root) {
  Checker check;
  const fs::path d = root / "smoke";
  const auto t0 = std::chrono::steady_clock::now();
  const std::string s = "7";
  check.expect(cli({"generate", "--seed", s, "--out", (d / "data").string(), "--patients", "500",
                    "--vocab", "200"}) == 0, "generate failed");
  const auto ds = ehr::load_dataset(d / "data");
  double visits = 0.0, codes = 0.0, visit_count = 0.0;
  for (const auto& p : ds.patients) {
    visits += double(p.visits.size());
    for (const auto& v : p.visits) {
      codes += double(v.concepts.size());
      visit_count += 1.0;
    }
  }
  const double mean_visits = visits / double(ds.patients.size());
  const double mean_codes = codes / visit_count;
  check.expect(ds.patients.size() == 500 && ds.vocab.size() == 200, "dataset size");
  check.expect(std::abs(mean_visits - 2.66) < kVisitsTol, "mean visits " + num(mean_visits));
  check.expect(std::abs(mean_codes - 13.1) < kCodesTol, "mean codes " + num(mean_codes));
  check.expect(cli({"pretrain-views", "--data", (d / "data").string(), "--seed", s, "--out",
                    (d / "store").string()}) == 0, "pretrain-views failed");
  check.expect(cli({"train", "--data", (d / "data").string(), "--store", (d / "store").string(),
                    "--seed", s, "--out", (d / "model").string(), "--dim", "32", "--epochs", "20"}) == 0,
               "train failed");
  check.expect(cli({"extract", "--data", (d / "data").string(), "--store", (d / "store").string(),
                    "--model", (d / "model").string(), "--out", (d / "repr.tsv").string()}) == 0,
               "extract failed");
  check.expect(cli({"eval", "--data", (d / "data").string(), "--store", (d / "store").string(),
                    "--model", (d / "model").string(), "--repr", (d / "repr.tsv").string(), "--seed",
                    s, "--out", (d / "eval").string()}) == 0, "eval failed");
  const double secs = seconds_since(t0);
  check.expect(secs < kSmokeSeconds, "took " + num(secs, 1) + " s");
  const auto summary =
      net::parse_key_values(testkit::slurp(d / "model" / train::kTrainSummary), "train_summary");
  const double initial = std::stod(summary.at("initial_loss"));
  const double final_loss = std::stod(summary.at("final_loss"));
  const auto model = net::load_model(d / "model");
  check.expect(model.hp.d_m == 32 && model.hp.heads == 4, "model dims");
  const double ratio = final_loss / initial;
  check.expect(ratio <= kSmokeLossRatio, "loss ratio " + num(ratio));
  check.expect(!eval::parse_jsonl(testkit::slurp(d / "eval" / eval::kMetricsFile)).empty(), "no metrics");
  check.note("visits " + num(mean_visits, 3) + ", codes " + num(mean_codes, 2) + ", loss " +
             num(initial) + " -> " + num(final_loss) + " (ratio " + num(ratio, 3) + "), " +
             num(secs, 1) + " s");
  return check.result();
}

struct SignalRun {
  double auc = 0.0;
  std::vector<double> shuffled;
};

SignalRun signal_run(double signal, std::uint64_t seed, bool shuffle) {
  ehr::GeneratorConfig g;
  g.signal = signal;
  const auto ds = ehr::generate_synthetic(g, seed);
  train::TrainConfig cfg = train::smoke_config();
  cfg.seed = seed;
  const auto store = train::pretrain_views(ds, cfg);
  const auto trained = train::train_mpvaa(ds, store, cfg);
  const auto table = train::extract_representations(ds, store, trained.params, cfg.hp.lambda_eval);
  const auto features = eval::fused_features(table);
  const auto split = ehr::build_hf_split(ds, ds.hf_concept(), seed, store.ids());
  SignalRun run;
  run.auc = eval::run_hf_task(features, split, seed, "full").front().value;
  if (shuffle) {
    for (std::uint64_t k = 0; k < kShufflesPerSeed; ++k) {
      const auto shuffled = eval::shuffled_labels(split, nk::derive_seed(seed, 1000 + k));
      run.shuffled.push_back(eval::run_hf_task(features, shuffled, seed, "full").front().value);
    }
  }
  return run;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + num(x, 3);
  return s;
}

Outcome signal_recovery() {
  Checker check;
  std::vector<double> planted, control, shuffled;
  for (std::uint64_t seed : kSignalSeeds) {
    const SignalRun s = signal_run(1.0, seed, true);
    planted.push_back(s.auc);
    shuffled.insert(shuffled.end(), s.shuffled.begin(), s.shuffled.end());
    control.push_back(signal_run(0.0, seed, false).auc);
  }
  const double mp = mean(planted), mc = mean(control), ms = mean(shuffled);
  check.expect(mp >= kSignalAuc, "planted mean AUC " + num(mp));
  check.expect(mc <= kControlAuc, "control mean AUC " + num(mc));
  check.expect(std::abs(ms - 0.5) <= kShuffledTol, "shuffled mean AUC " + num(ms));
  check.note("planted " + num(mp, 3) + " [" + join(planted) + "], control " + num(mc, 3) + " [" +
             join(control) + "], shuffled " + num(ms, 3) + " over " + std::to_string(shuffled.size()));
  return check.result();
}

Outcome ablation_plumbing(const fs::path& root) {
  Checker check;
  const fs::path d = root / "ablate";
  check.expect(cli({"generate", "--seed", "9", "--out", (d / "data").string(), "--patients", "120"}) == 0,
               "generate failed");
  check.expect(cli({"pretrain-views", "--data", (d / "data").string(), "--seed", "9", "--out",
                    (d / "store").string(), "--dim", "16", "--gae-epochs", "40"}) == 0,
               "pretrain failed");
  check.expect(cli({"ablate", "--data", (d / "data").string(), "--store", (d / "store").string(),
                    "--seed", "9", "--out", (d / "out").string(), "--dim", "16", "--epochs", "4"}) == 0,
               "ablate failed");
  std::map<std::string, std::set<std::string>> variants;
  std::size_t rows = 0;
  {
    std::istringstream in(testkit::slurp(d / "out" / "ablation.tsv"));
    std::string line;
    std::getline(in, line);
    check.expect(line == "task\tmetric\tvariant\tvalue", "ablation header");
    while (std::getline(in, line)) {
      std::istringstream f(line);
      std::string task, metric, variant, value;
      std::getline(f, task, '\t');
      std::getline(f, metric, '\t');
      std::getline(f, variant, '\t');
      std::getline(f, value, '\t');
      check.expect(std::isfinite(std::stod(value)), "non-finite " + metric);
      variants[task + "/" + metric].insert(variant);
      ++rows;
    }
  }
  const std::set<std::string> all = {"full", "mmvaa", "vaa", "sin"};
  for (const char* m : {"hf_outcome/auc_roc", "hf_outcome/auc_pr", "hf_outcome/accuracy",
                        "sequential_disease/ndcg@5", "sequential_disease/ndcg@15",
                        "sequential_disease/ndcg@25"}) {
    check.expect(variants[m] == all, std::string("variants for ") + m);
  }
  for (const auto& v : all) {
    const auto model = net::load_model(d / "out" / v / "model");
    check.expect(net::to_string(model.hp.variant) == v, "manifest variant " + v);
    // Lambda schedule: sampled per batch for full/sin, fixed otherwise.
    std::istringstream in(testkit::slurp(d / "out" / v / "model" / train::kLambdaLog));
    std::set<std::string> values;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) values.insert(line.substr(line.rfind('\t') + 1));
    check.expect(model.hp.samples_lambda() ? values.size() > 1 : values.size() == 1,
                 "lambda schedule of " + v);
  }

  // Variant code paths on one input.
  nk::SeededRng rng(909);
  const auto emb = testkit::random_views({0, 1, 2, 3, 4, 5, 6, 7}, 4, rng);
  const std::vector<std::size_t> seq = {1, 4, 4, 0, 7, 2};
  std::map<net::Variant, net::EncodedViews> enc;
  std::map<net::Variant, net::PatientViews> views;
  for (net::Variant v : net::kAllVariants) {
    nk::SeededRng init(1);
    const net::HyperParams hp = tiny_hp(8, v);
    const auto params = net::init_mpvaa(hp, init, Dtype::f64);
    views[v] = net::make_patient_views(seq, emb, hp, Dtype::f64);
    enc[v] = net::encode_views(params, views[v], 0.25);
    const auto fp = net::forward(params, views[v], 0.25);
    check.expect(fp.logits.rows() == seq.size() && fp.logits.cols() == 8, "logit shape");
    check.expect(params.fusion.w_dem.rows() == hp.pooled_dim(), "fusion input width");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor& hf = enc[net::Variant::full].hidden[i];
    const Tensor mx = nk::reduce_max(hf, nk::Axis::rows), mn = nk::reduce_mean(hf, nk::Axis::rows);
    for (std::size_t c = 0; c < 4; ++c) {
      check.expect(std::abs(enc[net::Variant::full].pooled[i].at(c) - (0.25 * mx.at(c) + 0.75 * mn.at(c))) < 1e-12,
                   "full pooling");
    }
    const Tensor& hm = enc[net::Variant::mmvaa].hidden[i];
    const Tensor mmx = nk::reduce_max(hm, nk::Axis::rows), mmn = nk::reduce_mean(hm, nk::Axis::rows);
    check.expect(enc[net::Variant::mmvaa].pooled[i].numel() == 8, "mmvaa width");
    for (std::size_t c = 0; c < 4; ++c) {
      check.expect(enc[net::Variant::mmvaa].pooled[i].at(c) == mmx.at(c), "mmvaa max half");
      check.expect(enc[net::Variant::mmvaa].pooled[i].at(4 + c) == mmn.at(c), "mmvaa mean half");
    }
    const Tensor vmn = nk::reduce_mean(enc[net::Variant::vaa].hidden[i], nk::Axis::rows);
    for (std::size_t c = 0; c < 4; ++c) {
      check.expect(enc[net::Variant::vaa].pooled[i].at(c) == vmn.at(c), "vaa mean pooling");
    }
  }
  const Tensor pe = net::sinusoidal_positions(seq.size(), 4, Dtype::f64);
  for (std::size_t k = 0; k < pe.numel(); ++k) {
    check.expect(std::abs(views[net::Variant::sin].dem.at(k) - views[net::Variant::full].dem.at(k) - pe.at(k)) < 1e-12,
                 "sin positions");
    check.expect(views[net::Variant::vaa].dem.at(k) == views[net::Variant::full].dem.at(k),
                 "non-sin variants carry no positions");
  }
  check.note(std::to_string(rows) + " ablation rows over " + std::to_string(variants.size()) +
             " metrics; pooling, width and position traces verified");
  return check.result();
}

Outcome determinism(const fs::path& root) {
  Checker check;
  // Same paths for both runs; the first is moved aside.
  const fs::path base = root / "determinism";
  const fs::path d = base / "run";
  for (const char* run : {"a", "b"}) {
    const std::string jobs = std::string(run) == "a" ? "1" : "3";
    check.expect(cli({"generate", "--seed", "11", "--out", (d / "data").string(), "--patients", "150"}) == 0,
                 "generate");
    check.expect(cli({"pretrain-views", "--data", (d / "data").string(), "--seed", "11", "--out",
                      (d / "store").string(), "--dim", "16", "--gae-epochs", "40", "--jobs", jobs}) == 0,
                 "pretrain");
    check.expect(cli({"train", "--data", (d / "data").string(), "--store", (d / "store").string(),
                      "--seed", "11", "--out", (d / "model").string(), "--dim", "16", "--epochs", "5"}) == 0,
                 "train");
    check.expect(cli({"extract", "--data", (d / "data").string(), "--store", (d / "store").string(),
                      "--model", (d / "model").string(), "--out", (d / "repr.tsv").string(), "--jobs", jobs}) == 0,
                 "extract");
    check.expect(cli({"eval", "--data", (d / "data").string(), "--store", (d / "store").string(),
                      "--model", (d / "model").string(), "--repr", (d / "repr.tsv").string(), "--seed",
                      "11", "--out", (d / "eval").string(), "--jobs", jobs}) == 0,
                 "eval");
    fs::rename(d, base / run);
  }
  const fs::path a = base / "a", b = base / "b";
  for (const char* part : {"data", "store", "model", "eval"}) {
    std::string diff;
    const bool same = same_tree(a / part, b / part, diff);
    check.expect(same, std::string(part) + " differs at " + diff);
  }
  check.expect(same_file(a / "repr.tsv", b / "repr.tsv"), "representation tables differ");
  check.note("datasets, stores, checkpoints, tables and metrics byte-identical (jobs 1 vs 3)");
  return check.result();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = testkit::temp_dir("acceptance");
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> entries = {
      {1, "gradient oracle", gradient_oracle},
      {2, "equation endpoints", endpoint_checks},
      {3, "permutation invariance", permutation_invariance},
      {4, "causality", causality},
      {5, "dice/ndcg/auc oracles", metric_oracles},
      {6, "gae sanity", gae_sanity},
      {7, "end-to-end smoke", [&] { return end_to_end_smoke(root); }},
      {8, "signal recovery", signal_recovery},
      {9, "ablation plumbing", [&] { return ablation_plumbing(root); }},
      {10, "determinism", [&] { return determinism(root); }},
  };
  int failed = 0;
  for (const auto& e : entries) {
    if (!only.empty() && !only.count(e.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", e.id, e.name,
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
