#ifndef HOSPX_FOREST_H_
#define HOSPX_FOREST_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hospx/common.h"

namespace hospx {

// Leaves have feature == -1. Samples with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;   // class-weighted H1 fraction of the node's samples
  double cover = 0.0;   // training samples reaching the node (with bootstrap repeats)
  double count0 = 0.0, count1 = 0.0;  // per-class training samples

  bool is_leaf() const { return feature < 0; }
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes);

  double PredictProba(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int Depth() const;
  // Throws Error(kInvalidArgument) on dangling children, a cycle, leaf
  // probabilities outside [0,1] or a feature index >= n_features.
  void Validate(std::size_t n_features) const;

 private:
  std::vector<TreeNode> nodes_;
};

enum class ForestVariant { kRandomForest, kExtraTrees };
std::string_view ToString(ForestVariant v);

struct ForestParams {
  std::size_t n_trees = 100;
  // "sqrt", "log2", "all", or a fraction in (0,1] of the feature count.
  std::string max_features = "sqrt";
  int max_depth = -1;  // -1 unlimited, 0 a single leaf
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  bool bootstrap = true;
  bool balanced_class_weight = true;
};

std::size_t ResolveMaxFeatures(const std::string& spec, std::size_t n_features);

// Inverse class frequency, normalized to mean 1 over the two classes.
std::array<double, 2> BalancedClassWeights(const std::vector<std::uint8_t>& labels);

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(ForestVariant variant, ForestParams params, std::array<double, 2> class_weights,
              std::size_t n_features, std::vector<DecisionTree> trees);

  // Mean of per-tree H1 probabilities.
  double PredictProba(std::span<const double> x) const;
  std::vector<double> PredictProba(const MatrixD& x, Exec exec = Exec::kParallel) const;

  ForestVariant variant() const { return variant_; }
  const ForestParams& params() const { return params_; }
  const std::array<double, 2>& class_weights() const { return class_weights_; }
  std::size_t n_features() const { return n_features_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

 private:
  ForestVariant variant_ = ForestVariant::kRandomForest;
  ForestParams params_;
  std::array<double, 2> class_weights_ = {1.0, 1.0};
  std::size_t n_features_ = 0;
  std::vector<DecisionTree> trees_;
};

// Throws Error(kInvalidArgument) on a single-class training set, shape
// mismatch or non-finite inputs. Tree i uses the RNG stream (seed, i), so the
// result is the same for both execution modes.
ForestModel FitForest(const MatrixD& x, const std::vector<std::uint8_t>& y, ForestVariant variant,
                      const ForestParams& params, std::uint64_t seed, Exec exec = Exec::kParallel);

}  // namespace hospx

#endif  // HOSPX_FOREST_H_
