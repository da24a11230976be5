#include <benchmark/benchmark.h>

#include <numeric>

#include "mpvaa/ehr/generator.hpp"
#include "mpvaa/eval/metrics.hpp"
#include "mpvaa/graph/gae.hpp"
#include "mpvaa/graph/view_graph.hpp"
#include "mpvaa/net/model.hpp"
#include "mpvaa/net/mpvaa.hpp"
#include "mpvaa/numkit/ops.hpp"
#include "mpvaa/train/pipeline.hpp"

using namespace mpvaa;
using nk::Dtype;
using nk::Tensor;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, nk::SeededRng& rng, Dtype dtype = Dtype::f32) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(-1, 1);
  return Tensor::from({r, c}, std::move(v), dtype);
}

graph::InnerViewEmbedding random_embedding(graph::View view, std::size_t n, std::size_t d,
                                           nk::SeededRng& rng) {
  graph::InnerViewEmbedding e;
  e.view = view;
  e.nodes.resize(n);
  std::iota(e.nodes.begin(), e.nodes.end(), 0);
  e.z = nk::softmax_rows(random_matrix(n, d, rng));
  return e;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  nk::SeededRng rng(1);
  const Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nk::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

static void BM_Dice(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  nk::SeededRng rng(2);
  graph::BinaryVector x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.bernoulli(0.1);
    y[i] = rng.bernoulli(0.1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(graph::dice(x, y));
}
BENCHMARK(BM_Dice)->Arg(60)->Arg(500);

static void BM_ViewGraph(benchmark::State& state) {
  ehr::GeneratorConfig g;
  g.patients = 20;
  const auto ds = ehr::generate_synthetic(g, 3);
  const graph::OffsetMentionFeaturizer notes(ds.meta.word_vocab, ds.vocab.size());
  const auto ctx = train::feature_context(ds, notes);
  const auto view = static_cast<graph::View>(state.range(0));
  for (auto _ : state) {
    for (const auto& p : ds.patients) benchmark::DoNotOptimize(graph::build_view_graph(view, p, ctx));
  }
  state.SetLabel(std::string(graph::to_string(view)));
}
BENCHMARK(BM_ViewGraph)->DenseRange(0, 2);

static void BM_PretrainPatient(benchmark::State& state) {
  ehr::GeneratorConfig g;
  g.patients = 4;
  const auto ds = ehr::generate_synthetic(g, 4);
  const graph::OffsetMentionFeaturizer notes(ds.meta.word_vocab, ds.vocab.size());
  const auto ctx = train::feature_context(ds, notes);
  graph::GaeConfig gae;
  gae.d_k = 32;
  const auto window = ehr::observed_window(ds.patients[0]);
  for (auto _ : state) benchmark::DoNotOptimize(train::pretrain_patient(window, ctx, gae, 1));
}
BENCHMARK(BM_PretrainPatient)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackward(benchmark::State& state) {
  const auto length = static_cast<std::size_t>(state.range(0));
  nk::SeededRng rng(5);
  net::HyperParams hp;
  hp.vocab = 200;
  const auto params = net::init_mpvaa(hp, rng);
  const std::array<graph::InnerViewEmbedding, 3> emb = {
      random_embedding(graph::View::dem, 200, hp.d_k, rng),
      random_embedding(graph::View::lab, 200, hp.d_k, rng),
      random_embedding(graph::View::notes, 200, hp.d_k, rng)};
  std::vector<std::size_t> seq;
  for (std::size_t i = 0; i < length; ++i) seq.push_back(rng.below(200));
  const auto views = net::make_patient_views(seq, emb, hp);
  for (auto _ : state) {
    nk::GradTape tape;
    nk::TapeScope scope(tape);
    Tensor loss = net::sequence_nll(params, views, 0.5);
    nk::backward(loss);
    for (const auto& p : params.parameters()) p.zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(length));
}
BENCHMARK(BM_ForwardBackward)->Arg(13)->Arg(26)->Arg(52)->Unit(benchmark::kMicrosecond);

static void BM_AucRoc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  nk::SeededRng rng(6);
  std::vector<double> s(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.uniform01();
    y[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::auc_roc(s, y));
}
BENCHMARK(BM_AucRoc)->Arg(100)->Arg(10000);
BENCHMARK_MAIN();
