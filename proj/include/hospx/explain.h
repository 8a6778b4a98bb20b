#ifndef HOSPX_EXPLAIN_H_
#define HOSPX_EXPLAIN_H_

#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hospx/forest.h"
#include "hospx/nn.h"
#include "hospx/training.h"

namespace hospx {

// Path-dependent TreeSHAP of one tree's H1 probability.
std::vector<double> TreeShap(const DecisionTree& tree, std::span<const double> x);
// Cover-weighted mean leaf value.
double TreeExpectedValue(const DecisionTree& tree);
// Forest attributions: mean of per-tree attributions, matching the forest's
// mean-probability output. Throws Error(kInvalidArgument) when x has the
// wrong number of features.
std::vector<double> TreeShap(const ForestModel& forest, std::span<const double> x);
double ForestExpectedValue(const ForestModel& forest);

struct ShapMatrix {
  std::string method, model, scenario;
  std::vector<std::string> feature_names;
  MatrixD values;                // rows x features
  double base_value = 0.0;
  std::vector<double> outputs;   // model output per row
};

ShapMatrix TreeShapMatrix(const ForestModel& forest, const MatrixD& x, Exec exec = Exec::kParallel);

struct ShapEstimate {
  std::vector<double> values;
  std::vector<double> standard_errors;
};

// Batch model output, one value per row.
using PredictFn = std::function<std::vector<double>(const MatrixD&)>;

// Permutation estimator; every permutation takes its absent features from
// one background row drawn uniformly. Throws Error(kInvalidArgument) on an
// empty background or n_permutations == 0.
ShapEstimate SamplingShap(const PredictFn& predict, std::span<const double> x, const MatrixD& background,
                          std::size_t n_permutations, std::mt19937_64& rng);

// Expected gradients of the H1 logit: mean over samples of
// (x - b) * grad f(b + alpha (x - b)), b from the background, alpha ~ U[0,1].
ShapEstimate GradientShap(Network& network, std::span<const double> x, const MatrixD& background,
                          std::size_t n_samples, std::mt19937_64& rng);
// Throws Error(kInvalidArgument) for tree models (not differentiable).
ShapEstimate GradientShap(const TrainedModel& model, std::span<const double> x, const MatrixD& background,
                          std::size_t n_samples, std::mt19937_64& rng);

// H1 logit per row of a network model.
PredictFn NetworkLogitFn(const TrainedModel& model);

ShapMatrix SamplingShapMatrix(const PredictFn& predict, const MatrixD& x, const MatrixD& background,
                              std::size_t n_permutations, std::uint64_t seed);
ShapMatrix GradientShapMatrix(const TrainedModel& model, const MatrixD& x, const MatrixD& background,
                              std::size_t n_samples, std::uint64_t seed);

// Uniform sample of `count` rows (all rows when count >= rows), in
// ascending row order.
std::vector<std::size_t> SampleRows(std::size_t rows, std::size_t count, std::uint64_t seed);

struct FeatureShapStats {
  std::string feature;
  double median = 0.0, mean = 0.0, q1 = 0.0, q3 = 0.0;
  double lo_whisker = 0.0, hi_whisker = 0.0;
};

struct ShapSummary {
  std::vector<FeatureShapStats> features;  // in column order
  std::vector<std::string> top;            // top-k names
};

// Statistics of |values| pooled over all matrices (which must share the
// feature names); top-k by median, then mean, then name.
ShapSummary SummarizeShap(const std::vector<ShapMatrix>& matrices, std::size_t top_k = 35);

struct Overlap {
  std::size_t count = 0;
  double fraction = 0.0;
};
// Throws Error(kInvalidArgument) when the feature universes differ.
Overlap TopKOverlap(const ShapSummary& a, const ShapSummary& b, std::size_t k = 35);

void WriteShapSummary(const ShapSummary& summary, std::ostream& out);
ShapSummary ReadShapSummary(std::istream& in, std::size_t top_k = 35);
// Long format (feature, rank, |value|) for the top-k features.
void WriteShapPlotData(const std::vector<ShapMatrix>& matrices, const ShapSummary& summary, std::ostream& out);

}  // namespace hospx

#endif  // HOSPX_EXPLAIN_H_
