#include <gtest/gtest.h>

#include <random>

#include "hospx/forest.h"
#include "test_util.h"

namespace hospx {
namespace {

struct Data {
  MatrixD x;
  std::vector<std::uint8_t> y;
};

Data Xor(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Data d{MatrixD(n, 2), std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    d.x(i, 0) = u(rng);
    d.x(i, 1) = u(rng);
    d.y[i] = (d.x(i, 0) > 0.5) != (d.x(i, 1) > 0.5);
  }
  return d;
}

double Accuracy(const ForestModel& f, const Data& d) {
  const auto p = f.PredictProba(d.x);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += (p[i] > 0.5) == (d.y[i] == 1);
  return static_cast<double>(ok) / p.size();
}

ForestParams Exact(int depth, std::size_t trees = 1) {
  ForestParams p;
  p.n_trees = trees;
  p.max_features = "all";
  p.bootstrap = false;
  p.max_depth = depth;
  return p;
}

TEST(Forest, SeparableDataFitsPerfectly) {
  Data d{MatrixD(100, 3), std::vector<std::uint8_t>(100)};
  std::mt19937_64 rng(1);
  for (std::size_t i = 0; i < 100; ++i) {
    for (std::size_t j = 0; j < 3; ++j) d.x(i, j) = std::normal_distribution<double>()(rng);
    d.y[i] = d.x(i, 1) > 0.2;
  }
  for (ForestVariant v : {ForestVariant::kRandomForest, ForestVariant::kExtraTrees}) {
    ForestParams p;
    p.n_trees = 20;
    EXPECT_EQ(Accuracy(FitForest(d.x, d.y, v, p, 3), d), 1.0) << ToString(v);
  }
}

TEST(Forest, RejectsBadInputs) {
  MatrixD x(4, 1);
  EXPECT_THROW(FitForest(x, {1, 1, 1, 1}, ForestVariant::kRandomForest, {}, 1), Error);
  EXPECT_THROW(FitForest(x, {0, 1, 0}, ForestVariant::kRandomForest, {}, 1), Error);
  x(0, 0) = std::nan("");
  EXPECT_THROW(FitForest(x, {0, 1, 0, 1}, ForestVariant::kRandomForest, {}, 1), Error);
  EXPECT_THROW(ResolveMaxFeatures("half", 10), Error);
}

TEST(Forest, XorNeedsDepthTwo) {
  const Data train = Xor(400, 2), test = Xor(400, 3);
  const ForestModel deep = FitForest(train.x, train.y, ForestVariant::kRandomForest, Exact(-1), 1);
  EXPECT_EQ(Accuracy(deep, train), 1.0);
  EXPECT_GE(Accuracy(deep, test), 0.9);
  const ForestModel stump = FitForest(train.x, train.y, ForestVariant::kRandomForest, Exact(1), 1);
  EXPECT_LE(Accuracy(stump, test), 0.75);
  EXPECT_LE(stump.trees()[0].Depth(), 1);
}

TEST(Forest, StumpSplitsAtMidpoint) {
  MatrixD x(10, 1);
  std::vector<std::uint8_t> y(10);
  for (std::size_t i = 0; i < 10; ++i) {
    x(i, 0) = i < 5 ? 2.0 : 6.0;
    y[i] = i >= 5;
  }
  ForestParams p = Exact(1);
  p.balanced_class_weight = false;
  const ForestModel f = FitForest(x, y, ForestVariant::kRandomForest, p, 1);
  const auto& root = f.trees()[0].nodes()[0];
  EXPECT_EQ(root.feature, 0);
  EXPECT_DOUBLE_EQ(root.threshold, 4.0);
  EXPECT_EQ(f.PredictProba(std::vector<double>{3.9}), 0.0);
  EXPECT_EQ(f.PredictProba(std::vector<double>{4.1}), 1.0);
}

TEST(Forest, ParallelMatchesSerialAndIsDeterministic) {
  const Data d = Xor(300, 5);
  for (ForestVariant v : {ForestVariant::kRandomForest, ForestVariant::kExtraTrees}) {
    ForestParams p;
    p.n_trees = 12;
    const ForestModel a = FitForest(d.x, d.y, v, p, 9, Exec::kParallel);
    const ForestModel b = FitForest(d.x, d.y, v, p, 9, Exec::kSerial);
    ASSERT_EQ(a.trees().size(), b.trees().size());
    for (std::size_t t = 0; t < a.trees().size(); ++t) {
      ASSERT_EQ(a.trees()[t].nodes().size(), b.trees()[t].nodes().size());
      for (std::size_t k = 0; k < a.trees()[t].nodes().size(); ++k) {
        const auto &na = a.trees()[t].nodes()[k], &nb = b.trees()[t].nodes()[k];
        EXPECT_EQ(na.feature, nb.feature);
        EXPECT_EQ(na.threshold, nb.threshold);
        EXPECT_EQ(na.value, nb.value);
      }
    }
    EXPECT_EQ(a.PredictProba(d.x, Exec::kParallel), b.PredictProba(d.x, Exec::kSerial));
    const ForestModel c = FitForest(d.x, d.y, v, p, 10);
    EXPECT_NE(a.PredictProba(d.x), c.PredictProba(d.x));
  }
}

TEST(Forest, PredictionIsMeanOfTrees) {
  const Data d = Xor(200, 6);
  ForestParams p;
  p.n_trees = 7;
  p.max_depth = 3;
  const ForestModel f = FitForest(d.x, d.y, ForestVariant::kExtraTrees, p, 4);
  for (std::size_t i = 0; i < 20; ++i) {
    double sum = 0;
    for (const auto& t : f.trees()) sum += t.PredictProba(d.x.row(i));
    EXPECT_NEAR(f.PredictProba(d.x.row(i)), sum / 7, 1e-15);
  }
  // A forest of one tree repeated predicts like that tree.
  const std::vector<DecisionTree> dup(5, f.trees()[0]);
  const ForestModel same(ForestVariant::kRandomForest, p, {1, 1}, 2, dup);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_DOUBLE_EQ(same.PredictProba(d.x.row(i)), f.trees()[0].PredictProba(d.x.row(i)));
  }
}

TEST(Forest, DepthAndLeafLimits) {
  const Data d = Xor(500, 7);
  ForestParams p;
  p.n_trees = 5;
  p.max_depth = 3;
  p.min_samples_leaf = 10;
  const ForestModel f = FitForest(d.x, d.y, ForestVariant::kRandomForest, p, 1);
  for (const auto& t : f.trees()) {
    EXPECT_LE(t.Depth(), 3);
    EXPECT_NO_THROW(t.Validate(2));
    for (const auto& n : t.nodes()) {
      EXPECT_GE(n.value, 0.0);
      EXPECT_LE(n.value, 1.0);
      if (n.is_leaf()) EXPECT_GE(n.count0 + n.count1, 10.0);
    }
  }
  ForestParams leaf = p;
  leaf.max_depth = 0;
  EXPECT_EQ(FitForest(d.x, d.y, ForestVariant::kRandomForest, leaf, 1).trees()[0].nodes().size(), 1u);
}

TEST(Tree, ValidateRejectsMalformed) {
  EXPECT_THROW(DecisionTree({{0, 0.5, 1, 5, 0.5}, {}, {}}).Validate(1), Error);
  EXPECT_THROW(DecisionTree({{-1, 0, -1, -1, 1.5}}).Validate(1), Error);
  EXPECT_THROW(DecisionTree({{3, 0.5, 1, 2, 0.5}, {}, {}}).Validate(2), Error);
  EXPECT_NO_THROW(DecisionTree({{0, 0.5, 1, 2, 0.5}, {}, {}}).Validate(1));
}

TEST(Forest, BalancedWeights) {
  std::vector<std::uint8_t> y(100, 0);
  for (int i = 0; i < 20; ++i) y[i] = 1;
  const auto w = BalancedClassWeights(y);
  EXPECT_NEAR(w[0] * 80, w[1] * 20, 1e-12);
  EXPECT_NEAR(w[0] + w[1], 2.0, 1e-12);
  EXPECT_EQ(ResolveMaxFeatures("sqrt", 100), 10u);
  EXPECT_EQ(ResolveMaxFeatures("all", 7), 7u);
  EXPECT_EQ(ResolveMaxFeatures("0.5", 10), 5u);
}

}  // namespace
}  // namespace hospx
