#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "hospx/explain.h"
#include "hospx/networks.h"
#include "shap_oracle.h"
#include "test_util.h"

namespace hospx {
namespace {

using testing::BruteForceShapley;
using testing::RandomTree;

ForestModel RandomForest(std::size_t n_features, std::size_t n_trees, int depth, std::mt19937_64& rng) {
  std::vector<DecisionTree> trees;
  for (std::size_t t = 0; t < n_trees; ++t) trees.push_back(RandomTree(n_features, depth, rng));
  return ForestModel(ForestVariant::kRandomForest, {}, {1, 1}, n_features, std::move(trees));
}

std::vector<double> RandomPoint(std::size_t d, std::mt19937_64& rng) {
  std::vector<double> x(d);
  for (auto& v : x) v = std::uniform_real_distribution<double>(0, 1)(rng);
  return x;
}

TEST(TreeShap, MatchesBruteForceShapley) {
  std::mt19937_64 rng(1);
  double worst = 0;
  for (int f = 0; f < 30; ++f) {
    const std::size_t d = 1 + rng() % 10;
    const ForestModel forest = RandomForest(d, 1 + rng() % 5, 1 + static_cast<int>(rng() % 4), rng);
    for (int i = 0; i < 10; ++i) {
      const auto x = RandomPoint(d, rng);
      const auto phi = TreeShap(forest, x);
      std::vector<double> want(d, 0.0);
      for (const auto& t : forest.trees()) {
        const auto p = BruteForceShapley(t, x);
        for (std::size_t j = 0; j < d; ++j) want[j] += p[j] / forest.trees().size();
      }
      for (std::size_t j = 0; j < d; ++j) worst = std::max(worst, std::abs(phi[j] - want[j]));
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(TreeShap, RepeatedFeatureOnPath) {
  // x0 split twice on the same path.
  const DecisionTree t({{0, 0.5, 1, 4, 0, 10}, {0, 0.2, 2, 3, 0, 6}, {-1, 0, -1, -1, 0.1, 2},
                        {-1, 0, -1, -1, 0.7, 4}, {1, 0.5, 5, 6, 0, 4}, {-1, 0, -1, -1, 0.3, 1},
                        {-1, 0, -1, -1, 0.9, 3}});
  for (double a : {0.1, 0.3, 0.8}) {
    for (double b : {0.2, 0.9}) {
      const std::vector<double> x = {a, b};
      const auto phi = TreeShap(t, x), want = BruteForceShapley(t, x);
      EXPECT_NEAR(phi[0], want[0], 1e-12);
      EXPECT_NEAR(phi[1], want[1], 1e-12);
    }
  }
}

TEST(TreeShap, EfficiencyDummyAndConstant) {
  std::mt19937_64 rng(2);
  const ForestModel forest = RandomForest(6, 8, 4, rng);
  std::vector<bool> used(8, false);
  for (const auto& t : forest.trees())
    for (const auto& n : t.nodes())
      if (!n.is_leaf()) used[n.feature] = true;
  MatrixD x(50, 8);
  for (auto& v : x.data()) v = std::uniform_real_distribution<double>(0, 1)(rng);
  // Two extra columns no tree can reach.
  const ForestModel wide(ForestVariant::kRandomForest, {}, {1, 1}, 8, forest.trees());
  const ShapMatrix m = TreeShapMatrix(wide, x);
  EXPECT_EQ(m.method, "tree");
  for (std::size_t i = 0; i < 50; ++i) {
    double sum = m.base_value;
    for (std::size_t j = 0; j < 8; ++j) {
      sum += m.values(i, j);
      if (!used[j]) EXPECT_EQ(m.values(i, j), 0.0);
    }
    EXPECT_NEAR(sum, wide.PredictProba(x.row(i)), 1e-9);
    EXPECT_EQ(m.outputs[i], wide.PredictProba(x.row(i)));
  }
  EXPECT_EQ(TreeShapMatrix(wide, x, Exec::kSerial).values, m.values);

  const DecisionTree flat({{0, 0.5, 1, 2, 0.4, 4}, {-1, 0, -1, -1, 0.4, 1}, {-1, 0, -1, -1, 0.4, 3}});
  const ForestModel constant(ForestVariant::kRandomForest, {}, {1, 1}, 1, {flat, flat});
  EXPECT_EQ(TreeShap(constant, std::vector<double>{0.9})[0], 0.0);
  EXPECT_THROW(TreeShap(constant, std::vector<double>{0.9, 1.0}), Error);
}

TEST(TreeShap, StumpAttributesEverythingToItsFeature) {
  const DecisionTree stump({{2, 0.5, 1, 2, 0, 10}, {-1, 0, -1, -1, 0.2, 4}, {-1, 0, -1, -1, 0.8, 6}});
  const ForestModel f(ForestVariant::kRandomForest, {}, {1, 1}, 4, {stump});
  const std::vector<double> x = {0.1, 0.9, 0.7, 0.3};
  const auto phi = TreeShap(f, x);
  EXPECT_NEAR(ForestExpectedValue(f), 0.2 * 0.4 + 0.8 * 0.6, 1e-15);
  EXPECT_NEAR(phi[2], 0.8 - ForestExpectedValue(f), 1e-15);
  EXPECT_EQ(phi[0], 0.0);
  EXPECT_EQ(phi[1], 0.0);
  EXPECT_EQ(phi[3], 0.0);
}

TEST(TreeShap, SymmetricDuplicateFeatures) {
  // f = 1 iff x0 > .5 and x1 > .5, balanced covers; x0 and x1 are interchangeable.
  const DecisionTree t({{0, 0.5, 1, 4, 0, 8}, {1, 0.5, 2, 3, 0, 4}, {-1, 0, -1, -1, 0, 2},
                        {-1, 0, -1, -1, 0, 2}, {1, 0.5, 5, 6, 0, 4}, {-1, 0, -1, -1, 0, 2},
                        {-1, 0, -1, -1, 1, 2}});
  const std::vector<double> x = {0.9, 0.9};
  const auto phi = TreeShap(t, x), want = BruteForceShapley(t, x);
  EXPECT_NEAR(phi[0], phi[1], 1e-15);
  EXPECT_NEAR(phi[0], want[0], 1e-12);
  EXPECT_NEAR(phi[0] + phi[1], 1.0 - 0.25, 1e-12);
}

TEST(SamplingShap, ConstantModelGivesZeros) {
  std::mt19937_64 rng(3);
  MatrixD bg(20, 3);
  for (auto& v : bg.data()) v = std::uniform_real_distribution<double>(0, 1)(rng);
  const PredictFn constant = [](const MatrixD& x) { return std::vector<double>(x.rows(), 0.7); };
  const auto e = SamplingShap(constant, std::vector<double>{1, 2, 3}, bg, 10, rng);
  for (double v : e.values) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(SamplingShap(constant, std::vector<double>{1, 2, 3}, MatrixD(0, 3), 10, rng), Error);
  EXPECT_THROW(SamplingShap(constant, std::vector<double>{1, 2, 3}, bg, 0, rng), Error);
}

TEST(SamplingShap, AdditiveModelConverges) {
  std::mt19937_64 rng(4);
  const std::vector<double> a = {1.5, -2.0, 0.5, 0.0};
  MatrixD bg(200, 4);
  for (auto& v : bg.data()) v = std::normal_distribution<double>()(rng);
  const PredictFn f = [&](const MatrixD& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < 4; ++j) out[i] += a[j] * x(i, j);
    return out;
  };
  const std::vector<double> x = {1.0, 0.5, -1.0, 2.0};
  const auto e = SamplingShap(f, x, bg, 2000, rng);
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0;
    for (std::size_t i = 0; i < 200; ++i) mean += bg(i, j) / 200;
    const double want = a[j] * (x[j] - mean);
    EXPECT_LE(std::abs(e.values[j] - want), 3 * e.standard_errors[j] + 1e-12) << j;
  }
}

TEST(SamplingShap, StandardErrorShrinksWithPermutations) {
  std::mt19937_64 rng(5);
  MatrixD bg(100, 3);
  for (auto& v : bg.data()) v = std::normal_distribution<double>()(rng);
  const PredictFn f = [](const MatrixD& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = std::tanh(x(i, 0) * x(i, 1)) + x(i, 2);
    return out;
  };
  const std::vector<double> x = {1, -1, 0.5};
  const auto small = SamplingShap(f, x, bg, 100, rng), large = SamplingShap(f, x, bg, 1600, rng);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(large.standard_errors[j] / small.standard_errors[j], 0.25, 0.1) << j;
  }
}

TEST(SamplingShap, AgreesWithTreeShapOnIndependentFeatures) {
  std::mt19937_64 rng(6);
  const std::size_t n = 3000, d = 4;
  MatrixD x(n, d);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = std::uniform_real_distribution<double>(0, 1)(rng);
    y[i] = x(i, 0) + 0.5 * x(i, 1) > 0.8;
  }
  ForestParams p;
  p.n_trees = 10;
  p.max_depth = 3;
  p.bootstrap = false;
  p.max_features = "all";
  p.balanced_class_weight = false;
  const ForestModel forest = FitForest(x, y, ForestVariant::kRandomForest, p, 1);
  const PredictFn predict = [&](const MatrixD& m) { return forest.PredictProba(m, Exec::kSerial); };
  for (std::size_t r : {3u, 17u}) {
    const auto exact = TreeShap(forest, x.row(r));
    const auto est = SamplingShap(predict, x.row(r), x, 5000, rng);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(est.values[j], exact[j], 0.05) << r << "," << j;
  }
}

TEST(GradientShap, LinearNetworkClosedForm) {
  MlpConfig c;
  c.input_dim = 5;
  c.hidden = {};
  MlpNetwork net(c, 7);
  std::mt19937_64 rng(7);
  MatrixD bg(100, 5);
  for (auto& v : bg.data()) v = std::normal_distribution<double>()(rng);
  // Recover w from logit differences along unit vectors.
  MatrixD probe(6, 5);
  for (std::size_t j = 0; j < 5; ++j) probe(j + 1, j) = 1.0;
  const MatrixD z = net.Logits(probe);
  const std::vector<double> x = {0.5, -1, 2, 0, 1};
  const auto e = GradientShap(net, x, bg, 500, rng);
  for (std::size_t j = 0; j < 5; ++j) {
    const double w = z(j + 1, 1) - z(0, 1);
    double mean = 0;
    for (std::size_t i = 0; i < 100; ++i) mean += bg(i, j) / 100;
    EXPECT_LE(std::abs(e.values[j] - w * (x[j] - mean)), 3 * e.standard_errors[j] + 1e-12) << j;
  }
  MatrixD single(1, 5);
  for (std::size_t j = 0; j < 5; ++j) single(0, j) = x[j];
  for (double v : GradientShap(net, x, single, 20, rng).values) EXPECT_EQ(v, 0.0);
}

TEST(GradientShap, CompleteAndAgreesOnDominantFeatureOfMlp) {
  MlpConfig c;
  c.input_dim = 6;
  c.hidden = {12, 6};
  c.dropout = 0.0;
  auto net = std::make_shared<MlpNetwork>(c, 9);
  TrainedModel model;
  model.family = ModelFamily::kMlp;
  model.network = net;
  std::mt19937_64 rng(9);
  MatrixD bg(100, 6);
  for (auto& v : bg.data()) v = std::normal_distribution<double>()(rng);
  const std::vector<double> x = {1, -0.5, 0.3, 2, -1, 0.7};
  const auto grad = GradientShap(model, x, bg, 4000, rng);
  const auto samp = SamplingShap(NetworkLogitFn(model), x, bg, 4000, rng);
  // Expected gradients equal Shapley values only for additive models, so on
  // a nonlinear net check completeness and the dominant feature.
  MatrixD xm(1, 6);
  std::copy(x.begin(), x.end(), xm.data().begin());
  const auto fx = NetworkLogitFn(model)(xm);
  const auto fbg = NetworkLogitFn(model)(bg);
  const double gap = fx[0] - std::accumulate(fbg.begin(), fbg.end(), 0.0) / 100;
  double sum = 0, se = 0;
  for (std::size_t j = 0; j < 6; ++j) {
    sum += grad.values[j];
    se += grad.standard_errors[j];
  }
  EXPECT_NEAR(sum, gap, 4 * se + 1e-3);
  auto argmax = [](const std::vector<double>& v) {
    return std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) - v.begin();
  };
  EXPECT_EQ(argmax(grad.values), argmax(samp.values));

  TrainedModel forest_model;
  forest_model.family = ModelFamily::kRf;
  EXPECT_THROW(GradientShap(forest_model, x, bg, 10, rng), Error);
}

TEST(ShapMatrices, SeededAndOrdered) {
  MlpConfig c;
  c.input_dim = 3;
  TrainedModel model;
  model.family = ModelFamily::kMlp;
  model.network = std::make_shared<MlpNetwork>(c, 1);
  MatrixD x(4, 3), bg(10, 3);
  std::mt19937_64 rng(1);
  for (auto& v : x.data()) v = std::normal_distribution<double>()(rng);
  for (auto& v : bg.data()) v = std::normal_distribution<double>()(rng);
  const ShapMatrix a = GradientShapMatrix(model, x, bg, 50, 3), b = GradientShapMatrix(model, x, bg, 50, 3);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.method, "gradient");
  const ShapMatrix s = SamplingShapMatrix(NetworkLogitFn(model), x, bg, 30, 3);
  EXPECT_EQ(s.values, SamplingShapMatrix(NetworkLogitFn(model), x, bg, 30, 3).values);
  const auto rows = SampleRows(100, 10, 4);
  EXPECT_EQ(rows.size(), 10u);
  EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
  EXPECT_EQ(SampleRows(5, 10, 4).size(), 5u);
}

ShapMatrix MatrixOf(const std::vector<std::string>& names, const std::vector<std::vector<double>>& rows) {
  ShapMatrix m;
  m.feature_names = names;
  m.values = MatrixD(rows.size(), names.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j) m.values(i, j) = rows[i][j];
  return m;
}

TEST(Summary, StatisticsOfAbsoluteValues) {
  const ShapMatrix m = MatrixOf({"a", "b"}, {{-1, 0.5}, {2, 0.5}, {-3, 0.5}, {4, 0.5}});
  const ShapSummary s = SummarizeShap({m}, 1);
  ASSERT_EQ(s.features.size(), 2u);
  EXPECT_DOUBLE_EQ(s.features[0].median, 2.5);
  EXPECT_DOUBLE_EQ(s.features[0].mean, 2.5);
  EXPECT_DOUBLE_EQ(s.features[0].q1, 1.75);
  EXPECT_DOUBLE_EQ(s.features[0].q3, 3.25);
  EXPECT_DOUBLE_EQ(s.features[0].lo_whisker, 1.0);
  EXPECT_DOUBLE_EQ(s.features[0].hi_whisker, 4.0);
  EXPECT_EQ(s.top, std::vector<std::string>{"a"});
  const ShapSummary single = SummarizeShap({MatrixOf({"a"}, {{-0.3}})});
  EXPECT_DOUBLE_EQ(single.features[0].median, 0.3);
  EXPECT_EQ(single.features[0].q3 - single.features[0].q1, 0.0);
}

TEST(Summary, ZerosTieBreakByName) {
  const ShapSummary s = SummarizeShap({MatrixOf({"c", "a", "b"}, {{0, 0, 0}})}, 2);
  EXPECT_EQ(s.top, (std::vector<std::string>{"a", "b"}));
}

TEST(Summary, PoolsAcrossSplits) {
  const ShapSummary s = SummarizeShap({MatrixOf({"a"}, {{1}}), MatrixOf({"a"}, {{3}, {5}})});
  EXPECT_DOUBLE_EQ(s.features[0].median, 3.0);
  EXPECT_THROW(SummarizeShap({MatrixOf({"a"}, {{1}}), MatrixOf({"b"}, {{1}})}), Error);
}

// Summary whose top-35 is names[first, first + 35).
ShapSummary Ranked(const std::vector<std::string>& names, std::size_t first) {
  std::vector<double> row(names.size(), 0.0);
  for (std::size_t i = 0; i < 35; ++i) row[first + i] = 100.0 - static_cast<double>(i);
  return SummarizeShap({MatrixOf(names, {row})});
}

TEST(Overlap, ConstructedRankings) {
  std::vector<std::string> names;
  for (int i = 0; i < 58; ++i) names.push_back("f" + std::to_string(100 + i));
  const ShapSummary a = Ranked(names, 0), b = Ranked(names, 23);
  const Overlap o = TopKOverlap(a, b);
  EXPECT_EQ(o.count, 12u);
  EXPECT_NEAR(o.fraction, 0.343, 5e-4);
  EXPECT_EQ(TopKOverlap(a, a).count, 35u);
  EXPECT_EQ(TopKOverlap(a, a).fraction, 1.0);
  std::vector<std::string> wide = names;
  for (int i = 0; i < 20; ++i) wide.push_back("g" + std::to_string(i));
  const Overlap none = TopKOverlap(Ranked(wide, 0), Ranked(wide, 40));
  EXPECT_EQ(none.count, 0u);
  EXPECT_EQ(none.fraction, 0.0);
  EXPECT_THROW(TopKOverlap(a, Ranked(wide, 0)), Error);
  EXPECT_THROW(TopKOverlap(a, b, 0), Error);
}

TEST(Summary, FileRoundTrip) {
  const ShapMatrix m = MatrixOf({"x", "y", "z"}, {{0.1, -2, 0.3}, {0.4, 1, -0.2}});
  const ShapSummary s = SummarizeShap({m}, 2);
  std::stringstream buf;
  WriteShapSummary(s, buf);
  const ShapSummary back = ReadShapSummary(buf, 2);
  EXPECT_EQ(back.top, s.top);
  ASSERT_EQ(back.features.size(), 3u);
  EXPECT_NEAR(back.features[1].median, s.features[1].median, 1e-9);
  std::stringstream plot;
  WriteShapPlotData({m}, s, plot);
  EXPECT_EQ(plot.str().rfind("feature\trank\tabs_shap\n", 0), 0u);
  std::stringstream junk("nonsense\n");
  EXPECT_THROW(ReadShapSummary(junk), Error);
}

}  // namespace
}  // namespace hospx
