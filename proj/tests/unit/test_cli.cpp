#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "mpvaa/eval/tasks.hpp"
#include "testkit.hpp"

using mpvaa::cli::dispatch;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::filesystem::path(testkit::temp_dir("cli"));
    const std::string d = dir_->string();
    ASSERT_EQ(run({"generate", "--seed", "4", "--out", d + "/data", "--patients", "40", "--vocab",
                   "30"}).code,
              0);
    ASSERT_EQ(run({"pretrain-views", "--data", d + "/data", "--seed", "4", "--out", d + "/store",
                   "--dim", "8", "--gae-epochs", "10"}).code,
              0);
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string path(const std::string& rel) { return (*dir_ / rel).string(); }
  static std::filesystem::path* dir_;
};
std::filesystem::path* CliTest::dir_ = nullptr;

TEST_F(CliTest, GenerateIsReproducible) {
  ASSERT_EQ(run({"generate", "--seed", "4", "--out", path("again"), "--patients", "40", "--vocab",
                 "30"}).code,
            0);
  for (const char* f : {"dataset.jsonl", "vocab.tsv"}) {
    EXPECT_EQ(testkit::slurp(path("data") + "/" + f), testkit::slurp(path("again") + "/" + f));
  }
  ASSERT_EQ(run({"generate", "--seed", "5", "--out", path("other"), "--patients", "40", "--vocab",
                 "30"}).code,
            0);
  EXPECT_NE(testkit::slurp(path("data") + "/dataset.jsonl"),
            testkit::slurp(path("other") + "/dataset.jsonl"));
}

TEST_F(CliTest, EvalBeforeTrainNamesTrain) {
  const Outcome r = run({"eval", "--data", path("data"), "--store", path("store"), "--model",
                     path("nomodel"), "--seed", "1", "--out", path("e")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("train"), std::string::npos) << r.err;
}

TEST_F(CliTest, TrainBeforePretrainNamesPretrain) {
  const Outcome r = run({"train", "--data", path("data"), "--store", path("nostore"), "--seed", "1",
                     "--out", path("m")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("pretrain-views"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownFlagPrintsUsage) {
  const Outcome r = run({"train", "--bogus", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE((r.err + r.out).find("Usage"), std::string::npos);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST_F(CliTest, HelpDocumentsFormats) {
  const Outcome r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"MPVAA-STORE v1", "MPVAA-REPR v1", "MPVAA-CKPT v1", "metrics.jsonl",
                        "pretrain-views", "ablate"}) {
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
  }
}

TEST_F(CliTest, TrainExtractEval) {
  ASSERT_EQ(run({"train", "--data", path("data"), "--store", path("store"), "--seed", "4", "--out",
                 path("model"), "--dim", "8", "--epochs", "2"}).code,
            0);
  ASSERT_EQ(run({"extract", "--data", path("data"), "--store", path("store"), "--model",
                 path("model"), "--out", path("repr.tsv")}).code,
            0);
  const Outcome r = run({"eval", "--data", path("data"), "--store", path("store"), "--model",
                     path("model"), "--repr", path("repr.tsv"), "--seed", "4", "--out",
                     path("eval")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto reports =
      mpvaa::eval::parse_jsonl(testkit::slurp(path("eval") + "/" + mpvaa::eval::kMetricsFile));
  std::set<std::string> metrics;
  for (const auto& m : reports) metrics.insert(m.metric);
  for (const char* m : {"auc_roc", "auc_pr", "accuracy", "ndcg@5", "ndcg@15", "ndcg@25"}) {
    EXPECT_TRUE(metrics.count(m)) << m;
  }
  EXPECT_TRUE(std::filesystem::exists(path("eval") + "/metrics.csv"));
}

TEST_F(CliTest, AblateCoversAllVariants) {
  const Outcome r = run({"ablate", "--data", path("data"), "--store", path("store"), "--seed", "4",
                     "--out", path("ablate"), "--dim", "8", "--epochs", "1", "--k", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(testkit::slurp(path("ablate") + "/ablation.tsv"));
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0], "task\tmetric\tvariant\tvalue");
  std::map<std::string, std::set<std::string>> variants;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string task, metric, variant;
    std::getline(in, task, '\t');
    std::getline(in, metric, '\t');
    std::getline(in, variant, '\t');
    variants[task + "/" + metric].insert(variant);
  }
  ASSERT_FALSE(variants.empty());
  for (const auto& [key, set] : variants) {
    EXPECT_EQ(set, (std::set<std::string>{"full", "mmvaa", "vaa", "sin"})) << key;
  }
  EXPECT_TRUE(variants.count("sequential_disease/ndcg@5"));
  EXPECT_TRUE(variants.count("hf_outcome/auc_roc"));
}
