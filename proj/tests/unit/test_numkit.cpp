#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mpvaa/errors.hpp"
#include "mpvaa/numkit/adam.hpp"
#include "mpvaa/numkit/archive.hpp"
#include "mpvaa/numkit/ops.hpp"
#include "mpvaa/numkit/rng.hpp"
#include "op_cases.hpp"
#include "testkit.hpp"

using namespace mpvaa;
using nk::Axis;
using nk::Dtype;
using nk::Tensor;

namespace {

constexpr double kGradTol = 1e-3;

}  // namespace

TEST(Tensor, F32RoundsOnWrite) {
  Tensor t = Tensor::from({1, 1}, {0.1}, Dtype::f32);
  EXPECT_EQ(t.at(0), static_cast<double>(0.1f));
  Tensor d = Tensor::from({1, 1}, {0.1}, Dtype::f64);
  EXPECT_EQ(d.at(0), 0.1);
}

TEST(Tensor, RejectsNonFinite) {
  EXPECT_THROW(Tensor::from({1, 2}, {1.0, NAN}), NumericError);
  EXPECT_THROW(Tensor::from({1, 2}, {1.0, INFINITY}), NumericError);
}

TEST(Tensor, ShapeMismatchOnConstruction) {
  EXPECT_THROW(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST(Tensor, CopiesAliasStorage) {
  Tensor a = Tensor::zeros({2, 2});
  Tensor b = a;
  b.mutable_data()[0] = 3.0;
  EXPECT_EQ(a.at(0), 3.0);
  Tensor c = a.detach();
  c.mutable_data()[0] = 5.0;
  EXPECT_EQ(a.at(0), 3.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  nk::GradTape tape;
  nk::TapeScope scope(tape);
  Tensor x = Tensor::full({2, 2}, 1.0, Dtype::f64, true);
  Tensor y = nk::scale(x, 2.0);
  EXPECT_THROW(nk::backward(y), ContractError);
}

TEST(Backward, RejectsConsumedTape) {
  nk::GradTape tape;
  nk::TapeScope scope(tape);
  Tensor x = Tensor::full({1, 1}, 1.0, Dtype::f64, true);
  Tensor y = nk::sum(nk::scale(x, 2.0));
  nk::backward(y);
  EXPECT_EQ(x.grad()[0], 2.0);
  EXPECT_THROW(nk::backward(y), ContractError);
}

TEST(Backward, RejectsLossWithoutHistory) {
  nk::GradTape tape;
  nk::TapeScope scope(tape);
  Tensor x = Tensor::full({1, 1}, 1.0, Dtype::f64, false);
  EXPECT_THROW(nk::backward(nk::sum(x)), ContractError);
}

TEST(Backward, NoTapeNoRecording) {
  Tensor x = Tensor::full({1, 1}, 1.0, Dtype::f64, true);
  Tensor y = nk::sum(nk::scale(x, 2.0));
  EXPECT_THROW(nk::backward(y), ContractError);
}

TEST(Backward, GradientAccumulatesOverReuse) {
  nk::GradTape tape;
  nk::TapeScope scope(tape);
  Tensor x = Tensor::full({1, 1}, 3.0, Dtype::f64, true);
  nk::backward(nk::sum(nk::mul(x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Ops, MatmulMatchesHandProduct) {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}}, Dtype::f64);
  Tensor b = Tensor::matrix({{5, 6}, {7, 8}}, Dtype::f64);
  Tensor c = nk::matmul(a, b);
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()),
            (std::vector<double>{19, 22, 43, 50}));
  EXPECT_THROW(nk::matmul(a, Tensor::zeros({3, 1})), ShapeError);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  nk::SeededRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = testkit::random_tensor({5, 7}, rng, -30, 30, false);
    Tensor s = nk::softmax_rows(x);
    for (std::size_t r = 0; r < 5; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 7; ++c) total += s.at(r, c);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Ops, CausalSoftmaxMasksFuture) {
  nk::SeededRng rng(4);
  Tensor x = testkit::random_tensor({4, 4}, rng, -1, 1, false);
  Tensor s = nk::softmax_rows(x, true);
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      if (c > r) EXPECT_EQ(s.at(r, c), 0.0);
      total += s.at(r, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_EQ(s.at(0, 0), 1.0);
  EXPECT_THROW(nk::softmax_rows(Tensor::zeros({2, 3}), true), ShapeError);
}

TEST(Ops, LayerNormStandardizesRows) {
  Tensor x = Tensor::matrix({{1, 2, 3, 4}, {-2, 0, 2, 10}}, Dtype::f64);
  Tensor y = nk::normalize_rows(x);
  for (std::size_t r = 0; r < 2; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 4; ++c) mean += y.at(r, c) / 4;
    for (std::size_t c = 0; c < 4; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean) / 4;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Ops, ReduceMaxAndMean) {
  Tensor x = Tensor::matrix({{1, 5}, {3, -1}, {2, 0}}, Dtype::f64);
  Tensor mx = nk::reduce_max(x, Axis::rows);
  Tensor mn = nk::reduce_mean(x, Axis::rows);
  EXPECT_EQ(mx.at(0), 3.0);
  EXPECT_EQ(mx.at(1), 5.0);
  EXPECT_DOUBLE_EQ(mn.at(0), 2.0);
  EXPECT_DOUBLE_EQ(mn.at(1), 4.0 / 3.0);
  Tensor mc = nk::reduce_max(x, Axis::cols);
  EXPECT_EQ(mc.shape(), (nk::Shape{3, 1}));
}

TEST(Ops, ConcatSliceRoundTrip) {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}}, Dtype::f64);
  Tensor b = Tensor::matrix({{5}, {6}}, Dtype::f64);
  const Tensor parts[] = {a, b};
  Tensor c = nk::concat(parts, Axis::cols);
  EXPECT_EQ(c.shape(), (nk::Shape{2, 3}));
  Tensor back = nk::slice(c, Axis::cols, 0, 2);
  EXPECT_EQ(std::vector<double>(back.data().begin(), back.data().end()),
            std::vector<double>(a.data().begin(), a.data().end()));
  EXPECT_THROW(nk::slice(c, Axis::cols, 2, 5), ShapeError);
}

TEST(Ops, NllUniformIsLogN) {
  Tensor logits = Tensor::zeros({3, 10}, Dtype::f64);
  const std::size_t targets[] = {0, 4, 9};
  EXPECT_NEAR(nk::nll_rows_sum(logits, targets).item(), 3 * std::log(10.0), 1e-12);
}

TEST(Ops, NllClampsAtFloor) {
  Tensor logits = Tensor::matrix({{0, 1000}}, Dtype::f64, true);
  const std::size_t targets[] = {0};
  nk::GradTape tape;
  nk::TapeScope scope(tape);
  Tensor l = nk::nll_rows_sum(logits, targets);
  EXPECT_NEAR(l.item(), -std::log(1e-12), 1e-9);
  nk::backward(l);
  EXPECT_EQ(logits.grad()[0], 0.0);
  EXPECT_EQ(logits.grad()[1], 0.0);
}

TEST(Ops, NllRejectsOutOfRangeTarget) {
  const std::size_t targets[] = {3};
  EXPECT_THROW(nk::nll_rows_sum(Tensor::zeros({1, 3}), targets), ContractError);
}

TEST(Ops, WeightedBceMatchesDirectFormula) {
  Tensor x = Tensor::matrix({{0.3, -1.2}, {2.0, 0.0}}, Dtype::f64);
  Tensor y = Tensor::matrix({{1, 0}, {0, 1}}, Dtype::f64);
  const double pw = 2.5;
  auto sp = [](double v) { return std::log1p(std::exp(v)); };
  const double expected =
      (pw * sp(-0.3) + sp(-1.2) + sp(2.0) + pw * sp(0.0)) / 4.0;
  EXPECT_NEAR(nk::weighted_bce_with_logits(x, y, pw).item(), expected, 1e-12);
}

TEST(Ops, GatherRows) {
  Tensor t = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}}, Dtype::f64);
  const std::size_t idx[] = {2, 0, 2};
  Tensor g = nk::gather_rows(t, idx);
  EXPECT_EQ(std::vector<double>(g.data().begin(), g.data().end()),
            (std::vector<double>{5, 6, 1, 2, 5, 6}));
  const std::size_t bad[] = {3};
  EXPECT_THROW(nk::gather_rows(t, bad), ContractError);
}

TEST(Ops, NonFiniteOutputRaises) {
  Tensor x = Tensor::full({1, 1}, 1e300, Dtype::f64);
  EXPECT_THROW(nk::mul(x, x), NumericError);
}

class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const testkit::OpCase c = testkit::op_cases()[static_cast<std::size_t>(GetParam())];
  nk::SeededRng rng(nk::derive_seed(11, static_cast<std::uint64_t>(GetParam())));
  for (int point = 0; point < 10; ++point) {
    std::vector<Tensor> inputs;
    for (const auto& s : c.shapes) inputs.push_back(testkit::random_tensor(s, rng, -2, 2));
    auto loss = [&]() { return testkit::weighted_total(c.fn(inputs)); };
    const auto r = testkit::check_gradients(loss, inputs, rng);
    EXPECT_LT(r.max_rel_error, kGradTol) << c.name << " point " << point;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient,
                         ::testing::Range(0, static_cast<int>(testkit::op_cases().size())),
                         [](const ::testing::TestParamInfo<int>& info) {
                           return std::string(testkit::op_cases()[info.param].name);
                         });

TEST(Adam, SingleStepMatchesHandComputation) {
  Tensor w = Tensor::from({1, 2}, {1.0, -2.0}, Dtype::f64, true);
  std::vector<Tensor> params = {w};
  nk::AdamState st = nk::make_adam_state(params, {.lr = 0.1});
  w.mutable_grad()[0] = 0.5;
  w.mutable_grad()[1] = -3.0;
  nk::adam_step(params, st);
  // After one step m_hat = g and v_hat = g^2, so the update is lr * g / (|g| + eps).
  EXPECT_NEAR(w.at(0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_NEAR(w.at(1), -2.0 + 0.1 * 3.0 / (3.0 + 1e-8), 1e-12);
  EXPECT_EQ(w.grad()[0], 0.0);
}

TEST(Adam, TwoStepsMatchRecurrence) {
  Tensor w = Tensor::from({1, 1}, {0.0}, Dtype::f64, true);
  std::vector<Tensor> params = {w};
  nk::AdamState st = nk::make_adam_state(params);
  const double g1 = 0.2, g2 = -0.4;
  w.mutable_grad()[0] = g1;
  nk::adam_step(params, st);
  w.mutable_grad()[0] = g2;
  nk::adam_step(params, st);
  double m = 0, v = 0, x = 0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? g1 : g2;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    x -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
  }
  EXPECT_NEAR(w.at(0), x, 1e-15);
}

TEST(Adam, MissingGradientIsContractError) {
  Tensor w = Tensor::zeros({1, 1}, Dtype::f64, true);
  std::vector<Tensor> params = {w};
  nk::AdamState st = nk::make_adam_state(params);
  EXPECT_THROW(nk::adam_step(params, st), ContractError);
}

TEST(Adam, DefaultHyperparameters) {
  nk::AdamConfig c;
  EXPECT_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.beta1, 0.9);
  EXPECT_EQ(c.beta2, 0.999);
  EXPECT_EQ(c.eps, 1e-8);
}

TEST(Xavier, WithinBound) {
  nk::SeededRng rng(1);
  Tensor w = nk::xavier_uniform(30, 20, rng);
  const double a = std::sqrt(6.0 / 50.0);
  for (double v : w.data()) EXPECT_LE(std::abs(v), a);
  EXPECT_TRUE(w.requires_grad());
}

TEST(Rng, SameSeedSameStream) {
  nk::SeededRng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformRangeAndErrors) {
  nk::SeededRng r(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform(-1, 2);
    EXPECT_GE(u, -1.0);
    EXPECT_LT(u, 2.0);
  }
  EXPECT_THROW(r.uniform(1, 1), ContractError);
}

TEST(Rng, PoissonMean) {
  nk::SeededRng r(9);
  double total = 0;
  for (int i = 0; i < 20000; ++i) total += r.poisson(3.5);
  EXPECT_NEAR(total / 20000, 3.5, 0.06);
}

TEST(Rng, ShuffleIsPermutation) {
  nk::SeededRng r(2);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
}

TEST(Archive, RoundTripBitExact) {
  nk::SeededRng rng(8);
  Tensor a = testkit::random_tensor({3, 4}, rng, -5, 5, false).to(Dtype::f32);
  Tensor b = Tensor::matrix({{1, 2}}, Dtype::f32);
  const std::string bytes =
      nk::encode_archive({nk::to_named_array("alpha", a), nk::to_named_array("beta", b)});
  const auto back = nk::decode_archive(bytes);
  ASSERT_EQ(back.size(), 2u);
  Tensor a2 = nk::to_tensor(nk::find_array(back, "alpha"));
  EXPECT_EQ(a2.shape(), a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a2.at(i), a.at(i));
  EXPECT_EQ(nk::encode_archive(back), bytes);
  EXPECT_THROW(nk::find_array(back, "gamma"), ParseError);
}

TEST(Archive, RejectsCorruptInput) {
  EXPECT_THROW(nk::decode_archive("not an archive"), ParseError);
  std::string bytes = nk::encode_archive({nk::to_named_array("x", Tensor::zeros({2, 2}))});
  EXPECT_THROW(nk::decode_archive(bytes.substr(0, bytes.size() - 3)), ParseError);
}

TEST(Archive, MissingFile) {
  EXPECT_THROW(nk::read_archive("/nonexistent/mpvaa.ckpt"), MissingArtifactError);
}
