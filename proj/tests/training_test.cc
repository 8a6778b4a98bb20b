#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "hospx/model_io.h"
#include "hospx/training.h"
#include "test_util.h"

namespace hospx {
namespace {

struct Data {
  MatrixD x;
  std::vector<std::uint8_t> y;
};

// Linearly separable with a margin, 13% positives.
Data Separable(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Data out{MatrixD(n, d), std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = std::uniform_real_distribution<double>(0, 1)(rng) < 0.13;
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = nd(rng);
    out.x(i, 0) = (out.y[i] ? 1.5 : -1.5) + 0.3 * nd(rng);
  }
  return out;
}

TEST(Sampler, BalancesClasses) {
  std::vector<std::uint8_t> y(1000, 0);
  for (std::size_t i = 0; i < 130; ++i) y[i * 7] = 1;
  const WeightedSampler s(y);
  std::mt19937_64 rng(1);
  const auto draws = s.Draw(100000, rng);
  double h1 = 0;
  for (auto i : draws) h1 += y[i];
  EXPECT_NEAR(h1 / draws.size(), 0.5, 0.01);
  double total = 0;
  for (std::size_t i = 0; i < y.size(); ++i) total += s.Probability(i);
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(s.Probability(0) * 130, 0.5, 1e-12);
  EXPECT_THROW(WeightedSampler(std::vector<std::uint8_t>(10, 0)), Error);
}

TEST(Loss, ValuesAndWeights) {
  const double z0[] = {0.0, 0.0};
  EXPECT_NEAR(ClassWeightedLoss(z0, 1, {1, 1}), std::log(2.0), 1e-15);
  const double z[] = {0.3, -1.2};
  const double base = ClassWeightedLoss(z, 1, {1, 1});
  EXPECT_NEAR(ClassWeightedLoss(z, 1, {1, 3.5}), 3.5 * base, 1e-12);
  EXPECT_NEAR(ClassWeightedLoss(z, 0, {2, 3.5}), 2 * ClassWeightedLoss(z, 0, {1, 1}), 1e-12);
  const double confident[] = {-50.0, 50.0};
  EXPECT_LT(ClassWeightedLoss(confident, 1, {1, 1}), 1e-20);
  EXPECT_NEAR(ClassWeightedLoss(confident, 0, {1, 1}), 100.0, 1e-9);
  const double bad[] = {std::nan(""), 0.0};
  try {
    ClassWeightedLoss(bad, 0, {1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
  }
}

TEST(Loss, BatchGradientMatchesFiniteDifference) {
  MatrixD z(3, 2);
  const double v[] = {0.1, -0.4, 2.0, 1.0, -3.0, 0.5};
  std::copy(v, v + 6, z.data().begin());
  const std::vector<std::uint8_t> y = {1, 0, 1};
  MatrixD g;
  ClassWeightedLossBatch(z, y, {0.6, 1.4}, &g);
  for (std::size_t i = 0; i < 6; ++i) {
    MatrixD up = z, down = z;
    up.data()[i] += 1e-6;
    down.data()[i] -= 1e-6;
    const double fd = (ClassWeightedLossBatch(up, y, {0.6, 1.4}, nullptr) -
                       ClassWeightedLossBatch(down, y, {0.6, 1.4}, nullptr)) / 2e-6;
    EXPECT_NEAR(g.data()[i], fd, 1e-8);
  }
}

TEST(Evaluate, PerfectAndDegenerate) {
  const std::vector<std::uint8_t> y = {1, 0, 0, 1, 0};
  EvalReport r = Evaluate({0.9, 0.1, 0.2, 0.8, 0.4}, y);
  EXPECT_EQ(r.h1.f1, 1.0);
  EXPECT_EQ(r.h0.f1, 1.0);
  r = Evaluate({0.1, 0.1, 0.1, 0.1, 0.1}, y);
  EXPECT_EQ(r.h1.precision, 0.0);
  EXPECT_EQ(r.h1.recall, 0.0);
  EXPECT_EQ(r.h1.f1, 0.0);
  EXPECT_EQ(r.h0.recall, 1.0);
  EXPECT_NEAR(r.h0.precision, 0.6, 1e-12);
  EXPECT_NEAR(r.h0.f1, 0.75, 1e-12);
  // 0.5 is not H1.
  r = Evaluate({0.5, 0.5}, {1, 0});
  EXPECT_EQ(r.h1.recall, 0.0);
  r = Evaluate({0.9, 0.9, 0.1, 0.9}, {1, 0, 1, 1});
  EXPECT_NEAR(r.h1.precision, 2.0 / 3, 1e-12);
  EXPECT_NEAR(r.h1.recall, 2.0 / 3, 1e-12);
}

TEST(Evaluate, AggregateOverSeeds) {
  EvalReport a, b;
  a.h1.f1 = 0.8;
  b.h1.f1 = 0.6;
  const AggregateReport agg = AggregateOverSeeds({a, b});
  EXPECT_NEAR(agg.h1[2].mean, 0.7, 1e-12);
  EXPECT_NEAR(agg.h1[2].stddev, std::sqrt(0.02), 1e-12);
  EXPECT_EQ(AggregateOverSeeds({a}).h1[2].stddev, 0.0);
}

TEST(KFold, DisjointCoveringBalanced) {
  for (std::size_t n : {10u, 11u, 100u}) {
    const auto folds = KFoldPartition(n, 3, 5);
    ASSERT_EQ(folds.size(), 3u);
    std::vector<std::size_t> all;
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      all.insert(all.end(), f.begin(), f.end());
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    EXPECT_LE(hi - lo, 1u);
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> want(n);
    std::iota(want.begin(), want.end(), 0);
    EXPECT_EQ(all, want);
  }
  EXPECT_THROW(KFoldPartition(2, 3, 1), Error);
}

TEST(Search, SamplingRespectsSpace) {
  std::mt19937_64 rng(2);
  const nlohmann::json space = DefaultSearchSpace(ModelFamily::kRf);
  for (int i = 0; i < 50; ++i) {
    const auto hp = SampleHyperparams(space, rng);
    const int depth = hp["max_depth"].get<int>();
    EXPECT_TRUE(depth == -1 || (depth >= 8 && depth <= 32));
    EXPECT_GE(hp["n_trees"].get<int>(), 100);
    EXPECT_LE(hp["n_trees"].get<int>(), 500);
  }
  EXPECT_THROW(SampleHyperparams(nlohmann::json::object(), rng), Error);
  EXPECT_THROW(SampleHyperparams({{"a", nlohmann::json::array()}}, rng), Error);
}

TEST(Search, CrossValidationPicksBestMeanFold) {
  const Data d = Separable(300, 4, 3);
  const nlohmann::json space = {{"n_trees", {5}}, {"max_depth", {0, -1}}, {"max_features", {"all"}}};
  const CvResult cv = CrossValidate(ModelFamily::kRf, d.x, d.y, 4, 0, 0, space, 6, 7);
  ASSERT_EQ(cv.candidates.size(), 6u);
  double best = -1;
  for (const auto& folds : cv.fold_f1) best = std::max(best, std::accumulate(folds.begin(), folds.end(), 0.0) / 3);
  EXPECT_DOUBLE_EQ(cv.best_score, best);
  bool any_deep = false;
  for (const auto& c : cv.candidates) any_deep |= c["max_depth"] == -1;
  ASSERT_TRUE(any_deep);
  EXPECT_EQ(cv.best_params["max_depth"], -1);
  EXPECT_GT(cv.best_score, 0.95);
  ASSERT_TRUE(cv.model.forest);
  EXPECT_EQ(cv.model.forest->trees().size(), 5u);

  const CvResult one = CrossValidate(ModelFamily::kRf, d.x, d.y, 4, 0, 0, space, 1, 7);
  EXPECT_EQ(one.candidates.size(), 1u);
  EXPECT_EQ(one.best_params, one.candidates[0]);
  EXPECT_THROW(CrossValidate(ModelFamily::kRf, d.x, d.y, 4, 0, 0, space, 0, 7), Error);
}

TEST(Networks, MlpLearnsSeparableData) {
  const Data train = Separable(1000, 6, 4), test = Separable(500, 6, 5);
  const nlohmann::json hp = {{"hidden", {16, 8}}, {"epochs", 15}, {"dropout", 0.0}, {"learning_rate", 0.01}};
  const TrainedModel m = FitModel(ModelFamily::kMlp, hp, train.x, train.y, 6, 0, 0, 1);
  EXPECT_GE(Evaluate(m.PredictProbaH1(test.x), test.y).h1.f1, 0.99);
  EXPECT_EQ(m.loss_curve.size(), 15u);
  EXPECT_LT(m.loss_curve.back(), m.loss_curve.front());
}

TEST(Networks, ZeroEpochsLeavesInitialization) {
  const Data d = Separable(100, 5, 6);
  MlpConfig c;
  c.input_dim = 5;
  auto net = MakeMlp(c, 3);
  auto fresh = MakeMlp(c, 3);
  NetTrainConfig tc;
  tc.epochs = 0;
  EXPECT_TRUE(FitNetwork(*net, d.x, d.y, tc, 1).empty());
  EXPECT_EQ(net->Logits(d.x), fresh->Logits(d.x));
}

TEST(Networks, DivergenceIsNumericalError) {
  const Data d = Separable(200, 5, 6);
  MlpConfig c;
  c.input_dim = 5;
  auto net = MakeMlp(c, 3);
  NetTrainConfig tc;
  tc.learning_rate = 1e12;
  tc.epochs = 5;
  try {
    FitNetwork(*net, d.x, d.y, tc, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
  }
}

TEST(ModelIo, RoundTripEveryFamily) {
  const Data d = Separable(200, 3 * 4 + 2, 8);
  const auto dir = std::filesystem::temp_directory_path();
  for (ModelFamily f : {ModelFamily::kRf, ModelFamily::kEt, ModelFamily::kMlp, ModelFamily::kFusion}) {
    const nlohmann::json hp = IsForest(f) ? nlohmann::json{{"n_trees", 4}, {"max_depth", 5}}
                                          : nlohmann::json{{"epochs", 2}, {"conv_channels", {4}}};
    TrainedModel m = FitModel(f, hp, d.x, d.y, 2, 3, 4, 11);
    m.scenario = "gp";
    const std::string path = (dir / ("hospx_model_" + std::string(ToString(f)) + ".bin")).string();
    WriteModel(m, path);
    const TrainedModel back = ReadModel(path);
    EXPECT_EQ(back.family, f);
    EXPECT_EQ(back.scenario, "gp");
    EXPECT_EQ(back.hyperparams, m.hyperparams);
    EXPECT_EQ(back.PredictProbaH1(d.x), m.PredictProbaH1(d.x)) << ToString(f);
    std::filesystem::remove(path);
  }
  try {
    ReadModel((dir / "hospx_no_such_model.bin").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingArtifact);
  }
}

TEST(Families, Parse) {
  EXPECT_EQ(ParseModelFamily("fusion"), ModelFamily::kFusion);
  EXPECT_EQ(ToString(ModelFamily::kEt), "et");
  EXPECT_THROW(ParseModelFamily("svm"), Error);
}

}  // namespace
}  // namespace hospx
