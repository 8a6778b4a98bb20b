#ifndef HOSPX_TRAINING_H_
#define HOSPX_TRAINING_H_

#include <array>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hospx/common.h"
#include "hospx/features.h"
#include "hospx/forest.h"
#include "hospx/nn.h"
#include "json.hpp"

namespace hospx {

enum class ModelFamily { kRf, kEt, kMlp, kFusion };
std::string_view ToString(ModelFamily f);
// "rf", "et", "mlp", "fusion"; throws Error(kInvalidArgument).
ModelFamily ParseModelFamily(std::string_view name);
inline bool IsForest(ModelFamily f) { return f == ModelFamily::kRf || f == ModelFamily::kEt; }

// Draws with replacement so that each class carries total probability 1/2.
class WeightedSampler {
 public:
  // Throws Error(kInvalidArgument) unless both classes are present.
  explicit WeightedSampler(const std::vector<std::uint8_t>& labels);
  std::vector<std::size_t> Draw(std::size_t count, std::mt19937_64& rng) const;
  // Per-index draw probability.
  double Probability(std::size_t index) const;

 private:
  std::vector<std::size_t> by_class_[2];
  std::vector<std::uint8_t> labels_;
};

// Cross-entropy of softmax(logits) scaled by the true class weight. Throws
// Error(kNumerical) on non-finite logits.
double ClassWeightedLoss(std::span<const double> logits, int label, const std::array<double, 2>& weights);
// Mean over the batch; `grad` (optional) receives d(mean loss)/d(logits).
double ClassWeightedLossBatch(const MatrixD& logits, std::span<const std::uint8_t> labels,
                              const std::array<double, 2>& weights, MatrixD* grad);

struct NetTrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  // Step schedule: lr *= step_factor every step_period epochs.
  std::size_t step_period = 10;
  double step_factor = 0.5;
  bool weighted_sampler = true;
  bool class_weighted_loss = false;
};

// Minibatch SGD with momentum; returns the mean training loss per epoch.
// Throws Error(kNumerical) naming the epoch when the loss diverges.
std::vector<double> FitNetwork(Network& net, const MatrixD& x, const std::vector<std::uint8_t>& y,
                               const NetTrainConfig& config, std::uint64_t seed);

struct ClassMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct EvalReport {
  std::string model, scenario;
  ClassMetrics h0, h1;
};

// Decision rule argmax: H1 iff p(H1) > 0.5.
EvalReport Evaluate(const std::vector<double>& prob_h1, const std::vector<std::uint8_t>& y);

struct MetricStat {
  double mean = 0.0, stddev = 0.0;
};
struct AggregateReport {
  std::string model, scenario;
  std::size_t n_seeds = 0;
  // precision, recall, f1
  std::array<MetricStat, 3> h0, h1;
};
// Mean and sample standard deviation (0 for a single report).
AggregateReport AggregateOverSeeds(const std::vector<EvalReport>& reports);

// Trained classifier over early-fusion rows.
struct TrainedModel {
  ModelFamily family = ModelFamily::kRf;
  nlohmann::json hyperparams;
  std::string scenario = "all";
  std::uint64_t seed = 0;
  int fold = -1;  // -1 for a refit on the whole training split
  std::size_t h = 0, m = 0, t = 0;
  std::optional<ForestModel> forest;
  std::shared_ptr<Network> network;
  std::vector<double> loss_curve;

  std::vector<double> PredictProbaH1(const MatrixD& x) const;
};

// Builds and fits one model from hyperparameters (missing keys use defaults).
TrainedModel FitModel(ModelFamily family, const nlohmann::json& hyperparams, const MatrixD& x,
                      const std::vector<std::uint8_t>& y, std::size_t h, std::size_t m, std::size_t t,
                      std::uint64_t seed);

ForestParams ForestParamsFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const ForestParams& p);
NetTrainConfig NetTrainConfigFromJson(const nlohmann::json& j);
MlpConfig MlpConfigFromJson(const nlohmann::json& j, std::size_t input_dim);
FusionConfig FusionConfigFromJson(const nlohmann::json& j, std::size_t h, std::size_t m, std::size_t t);

// Disjoint covering folds of a shuffled 0..n-1 whose sizes differ by <= 1.
std::vector<std::vector<std::size_t>> KFoldPartition(std::size_t n, std::size_t k, std::uint64_t seed);

// Search space: object of parameter -> list of choices, or
// {"int": [lo, hi], "extra": [...]} for an integer range plus extra values.
nlohmann::json DefaultSearchSpace(ModelFamily family);
// Throws Error(kInvalidArgument) on an empty or malformed space.
nlohmann::json SampleHyperparams(const nlohmann::json& space, std::mt19937_64& rng);

struct CvResult {
  nlohmann::json best_params;
  double best_score = -1.0;
  std::vector<nlohmann::json> candidates;
  std::vector<std::vector<double>> fold_f1;  // per candidate, per fold
  TrainedModel model;                        // refit on all rows with best_params
};

CvResult CrossValidate(ModelFamily family, const MatrixD& x, const std::vector<std::uint8_t>& y,
                       std::size_t h, std::size_t m, std::size_t t, const nlohmann::json& space,
                       std::size_t budget, std::uint64_t seed, std::size_t n_folds = 3);

}  // namespace hospx

#endif  // HOSPX_TRAINING_H_
