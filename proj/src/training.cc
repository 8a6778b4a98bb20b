#include "hospx/training.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hospx/networks.h"

namespace hospx {
namespace {

using nlohmann::json;

template <typename T>
T Get(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

double F1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

MatrixD Rows(const MatrixD& x, const std::vector<std::size_t>& idx) {
  MatrixD out(idx.size(), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(x.row(idx[r]).begin(), x.row(idx[r]).end(), out.row(r).begin());
  }
  return out;
}

std::vector<std::uint8_t> Pick(const std::vector<std::uint8_t>& y, const std::vector<std::size_t>& idx) {
  std::vector<std::uint8_t> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(y[i]);
  return out;
}

}  // namespace

std::string_view ToString(ModelFamily f) {
  switch (f) {
    case ModelFamily::kRf: return "rf";
    case ModelFamily::kEt: return "et";
    case ModelFamily::kMlp: return "mlp";
    case ModelFamily::kFusion: return "fusion";
  }
  return "?";
}

ModelFamily ParseModelFamily(std::string_view name) {
  if (name == "rf") return ModelFamily::kRf;
  if (name == "et") return ModelFamily::kEt;
  if (name == "mlp") return ModelFamily::kMlp;
  if (name == "fusion") return ModelFamily::kFusion;
  Fail(ErrorKind::kInvalidArgument, "unknown model family '" + std::string(name) + "'");
}

WeightedSampler::WeightedSampler(const std::vector<std::uint8_t>& labels) : labels_(labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) by_class_[labels[i] ? 1 : 0].push_back(i);
  if (by_class_[0].empty() || by_class_[1].empty()) {
    Fail(ErrorKind::kInvalidArgument, "weighted sampler needs both classes");
  }
}

std::vector<std::size_t> WeightedSampler::Draw(std::size_t count, std::mt19937_64& rng) const {
  std::vector<std::size_t> out(count);
  std::bernoulli_distribution coin(0.5);
  for (auto& o : out) {
    const auto& pool = by_class_[coin(rng) ? 1 : 0];
    o = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  }
  return out;
}

double WeightedSampler::Probability(std::size_t index) const {
  return 0.5 / static_cast<double>(by_class_[labels_.at(index) ? 1 : 0].size());
}

double ClassWeightedLoss(std::span<const double> z, int label, const std::array<double, 2>& w) {
  if (z.size() != 2 || !std::isfinite(z[0]) || !std::isfinite(z[1])) {
    Fail(ErrorKind::kNumerical, "non-finite logits");
  }
  if (!(w[0] > 0 && w[1] > 0)) Fail(ErrorKind::kInvalidArgument, "class weights must be positive");
  const double mx = std::max(z[0], z[1]);
  const double lse = mx + std::log(std::exp(z[0] - mx) + std::exp(z[1] - mx));
  return w[label] * (lse - z[label]);
}

double ClassWeightedLossBatch(const MatrixD& logits, std::span<const std::uint8_t> labels,
                              const std::array<double, 2>& w, MatrixD* grad) {
  const std::size_t b = logits.rows();
  if (b == 0 || labels.size() != b || logits.cols() != 2) {
    Fail(ErrorKind::kInvalidArgument, "loss batch shape mismatch");
  }
  if (grad) *grad = MatrixD(b, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i] ? 1 : 0;
    const auto z = logits.row(i);
    total += ClassWeightedLoss(z, y, w);
    if (grad) {
      const double mx = std::max(z[0], z[1]);
      const double e0 = std::exp(z[0] - mx), e1 = std::exp(z[1] - mx);
      const double p[2] = {e0 / (e0 + e1), e1 / (e0 + e1)};
      for (int j = 0; j < 2; ++j) (*grad)(i, j) = w[y] * (p[j] - (j == y ? 1.0 : 0.0)) / static_cast<double>(b);
    }
  }
  return total / static_cast<double>(b);
}

std::vector<double> FitNetwork(Network& net, const MatrixD& x, const std::vector<std::uint8_t>& y,
                               const NetTrainConfig& c, std::uint64_t seed) {
  if (x.rows() != y.size() || x.rows() == 0) Fail(ErrorKind::kInvalidArgument, "training shape mismatch");
  if (x.cols() != net.input_dim()) Fail(ErrorKind::kInvalidArgument, "network input width mismatch");
  if (c.batch_size == 0) Fail(ErrorKind::kInvalidArgument, "batch size must be positive");
  std::mt19937_64 rng(DeriveSeed(seed, "train"));
  const WeightedSampler sampler(y);
  const std::array<double, 2> weights =
      c.class_weighted_loss ? BalancedClassWeights(y) : std::array<double, 2>{1.0, 1.0};
  std::vector<Param*> params = net.Params();
  std::vector<double> curve;
  std::vector<std::size_t> order(x.rows());
  for (std::size_t epoch = 0; epoch < c.epochs; ++epoch) {
    const double lr = c.learning_rate *
                      std::pow(c.step_factor, static_cast<double>(c.step_period ? epoch / c.step_period : 0));
    if (c.weighted_sampler) {
      order = sampler.Draw(x.rows(), rng);
    } else {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += c.batch_size) {
      const std::size_t end = std::min(order.size(), start + c.batch_size);
      const std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      const MatrixD xb = Rows(x, idx);
      const std::vector<std::uint8_t> yb = Pick(y, idx);
      const MatrixD logits = net.Forward(xb, true, &rng);
      MatrixD grad;
      double loss = 0.0;
      try {
        loss = ClassWeightedLossBatch(logits, yb, weights, &grad);
      } catch (const Error&) {
        loss = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(loss)) {
        Fail(ErrorKind::kNumerical, "training diverged at epoch " + std::to_string(epoch));
      }
      net.ZeroGrad();
      net.Backward(grad);
      for (Param* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
          p->velocity[i] = c.momentum * p->velocity[i] + p->grad[i];
          p->value[i] -= lr * p->velocity[i];
        }
      }
      epoch_loss += loss;
      ++batches;
    }
    curve.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1)));
  }
  return curve;
}

EvalReport Evaluate(const std::vector<double>& prob_h1, const std::vector<std::uint8_t>& y) {
  if (prob_h1.size() != y.size()) Fail(ErrorKind::kInvalidArgument, "prediction count mismatch");
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool pred = prob_h1[i] > 0.5;
    if (pred && y[i]) ++tp;
    else if (pred) ++fp;
    else if (y[i]) ++fn;
    else ++tn;
  }
  EvalReport r;
  if (tp + fp == 0) LogWarning("no H1 predictions; H1 precision set to 0");
  r.h1.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  r.h1.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  r.h1.f1 = F1(r.h1.precision, r.h1.recall);
  r.h0.precision = tn + fn > 0 ? tn / (tn + fn) : 0.0;
  r.h0.recall = tn + fp > 0 ? tn / (tn + fp) : 0.0;
  r.h0.f1 = F1(r.h0.precision, r.h0.recall);
  return r;
}

AggregateReport AggregateOverSeeds(const std::vector<EvalReport>& reports) {
  AggregateReport out;
  if (reports.empty()) return out;
  out.model = reports.front().model;
  out.scenario = reports.front().scenario;
  out.n_seeds = reports.size();
  auto stat = [&](auto getter) {
    MetricStat s;
    for (const auto& r : reports) s.mean += getter(r);
    s.mean /= static_cast<double>(reports.size());
    if (reports.size() > 1) {
      double ss = 0.0;
      for (const auto& r : reports) ss += (getter(r) - s.mean) * (getter(r) - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(reports.size() - 1));
    }
    return s;
  };
  out.h0 = {stat([](const EvalReport& r) { return r.h0.precision; }),
            stat([](const EvalReport& r) { return r.h0.recall; }),
            stat([](const EvalReport& r) { return r.h0.f1; })};
  out.h1 = {stat([](const EvalReport& r) { return r.h1.precision; }),
            stat([](const EvalReport& r) { return r.h1.recall; }),
            stat([](const EvalReport& r) { return r.h1.f1; })};
  return out;
}

std::vector<double> TrainedModel::PredictProbaH1(const MatrixD& x) const {
  if (forest) return forest->PredictProba(x);
  if (!network) Fail(ErrorKind::kInvalidArgument, "model has no parameters");
  const MatrixD z = network->Logits(x);
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = 1.0 / (1.0 + std::exp(z(i, 0) - z(i, 1)));
  return out;
}

ForestParams ForestParamsFromJson(const json& j) {
  ForestParams p;
  p.n_trees = Get<std::size_t>(j, "n_trees", p.n_trees);
  if (j.contains("max_features")) {
    const auto& v = j.at("max_features");
    p.max_features = v.is_string() ? v.get<std::string>() : std::to_string(v.get<double>());
  }
  p.max_depth = Get<int>(j, "max_depth", p.max_depth);
  p.min_samples_split = Get<std::size_t>(j, "min_samples_split", p.min_samples_split);
  p.min_samples_leaf = Get<std::size_t>(j, "min_samples_leaf", p.min_samples_leaf);
  p.bootstrap = Get<bool>(j, "bootstrap", p.bootstrap);
  p.balanced_class_weight = Get<bool>(j, "balanced_class_weight", p.balanced_class_weight);
  return p;
}

json ToJson(const ForestParams& p) {
  return json{{"n_trees", p.n_trees},
              {"max_features", p.max_features},
              {"max_depth", p.max_depth},
              {"min_samples_split", p.min_samples_split},
              {"min_samples_leaf", p.min_samples_leaf},
              {"bootstrap", p.bootstrap},
              {"balanced_class_weight", p.balanced_class_weight}};
}

NetTrainConfig NetTrainConfigFromJson(const json& j) {
  NetTrainConfig c;
  c.epochs = Get<std::size_t>(j, "epochs", c.epochs);
  c.batch_size = Get<std::size_t>(j, "batch_size", c.batch_size);
  c.learning_rate = Get<double>(j, "learning_rate", c.learning_rate);
  c.momentum = Get<double>(j, "momentum", c.momentum);
  c.step_period = Get<std::size_t>(j, "step_period", c.step_period);
  c.step_factor = Get<double>(j, "step_factor", c.step_factor);
  c.weighted_sampler = Get<bool>(j, "weighted_sampler", c.weighted_sampler);
  c.class_weighted_loss = Get<bool>(j, "class_weighted_loss", c.class_weighted_loss);
  return c;
}

MlpConfig MlpConfigFromJson(const json& j, std::size_t input_dim) {
  MlpConfig c;
  c.input_dim = input_dim;
  c.hidden = Get<std::vector<std::size_t>>(j, "hidden", c.hidden);
  c.dropout = Get<double>(j, "dropout", c.dropout);
  return c;
}

FusionConfig FusionConfigFromJson(const json& j, std::size_t h, std::size_t m, std::size_t t) {
  FusionConfig c;
  c.h = h;
  c.m = m;
  c.t = t;
  c.tabular_hidden = Get<std::vector<std::size_t>>(j, "tabular_hidden", c.tabular_hidden);
  c.conv_channels = Get<std::vector<std::size_t>>(j, "conv_channels", c.conv_channels);
  c.kernel = Get<std::size_t>(j, "kernel", c.kernel);
  c.pool = Get<std::size_t>(j, "pool", c.pool);
  c.merge_hidden = Get<std::size_t>(j, "merge_hidden", c.merge_hidden);
  c.dropout = Get<double>(j, "dropout", c.dropout);
  return c;
}

TrainedModel FitModel(ModelFamily family, const json& hp, const MatrixD& x, const std::vector<std::uint8_t>& y,
                      std::size_t h, std::size_t m, std::size_t t, std::uint64_t seed) {
  TrainedModel model;
  model.family = family;
  model.seed = seed;
  model.h = h;
  model.m = m;
  model.t = t;
  if (IsForest(family)) {
    const ForestParams p = ForestParamsFromJson(hp);
    model.hyperparams = ToJson(p);
    model.forest = FitForest(x, y, family == ModelFamily::kRf ? ForestVariant::kRandomForest : ForestVariant::kExtraTrees,
                             p, seed);
    return model;
  }
  std::shared_ptr<Network> net;
  if (family == ModelFamily::kMlp) {
    net = MakeMlp(MlpConfigFromJson(hp, x.cols()), seed);
  } else {
    if (x.cols() != m * t + h) Fail(ErrorKind::kInvalidArgument, "fusion input is not an early-fusion matrix");
    net = MakeFusion(FusionConfigFromJson(hp, h, m, t), seed);
  }
  model.hyperparams = hp;
  model.loss_curve = FitNetwork(*net, x, y, NetTrainConfigFromJson(hp), seed);
  model.network = std::move(net);
  return model;
}

std::vector<std::vector<std::size_t>> KFoldPartition(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > n) Fail(ErrorKind::kInvalidArgument, "bad fold count");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(DeriveSeed(seed, "folds"));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(idx[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

json DefaultSearchSpace(ModelFamily family) {
  if (IsForest(family)) {
    return json{{"n_trees", {{"int", {100, 500}}}},
                {"max_features", {"sqrt", "log2", "0.3"}},
                {"max_depth", {{"int", {8, 32}}, {"extra", {-1}}}},
                {"min_samples_split", {{"int", {2, 20}}}},
                {"min_samples_leaf", {{"int", {1, 10}}}},
                {"bootstrap", {true, false}}};
  }
  json space{{"learning_rate", {0.003, 0.01, 0.03}},
             {"momentum", {0.9}},
             {"dropout", {0.0, 0.1, 0.2, 0.3}},
             {"batch_size", {64, 128}},
             {"epochs", {20}},
             {"step_period", {10}},
             {"step_factor", {0.5}}};
  if (family == ModelFamily::kMlp) {
    space["hidden"] = json::array({json::array({64, 32, 16}), json::array({128, 64, 32}), json::array({32, 16, 8})});
  } else {
    space["conv_channels"] = json::array({json::array({16, 16}), json::array({32, 16})});
    space["tabular_hidden"] = json::array({json::array({64, 32}), json::array({32, 16})});
    space["merge_hidden"] = {32, 64};
  }
  return space;
}

json SampleHyperparams(const json& space, std::mt19937_64& rng) {
  if (!space.is_object() || space.empty()) Fail(ErrorKind::kInvalidArgument, "empty search space");
  json out = json::object();
  for (const auto& [key, spec] : space.items()) {
    if (spec.is_array()) {
      if (spec.empty()) Fail(ErrorKind::kInvalidArgument, "no choices for '" + key + "'");
      out[key] = spec[std::uniform_int_distribution<std::size_t>(0, spec.size() - 1)(rng)];
    } else if (spec.is_object() && spec.contains("int")) {
      const auto lo = spec["int"].at(0).get<long long>(), hi = spec["int"].at(1).get<long long>();
      if (lo > hi) Fail(ErrorKind::kInvalidArgument, "empty range for '" + key + "'");
      const json extra = spec.value("extra", json::array());
      const auto n = static_cast<std::size_t>(hi - lo + 1) + extra.size();
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      out[key] = pick < static_cast<std::size_t>(hi - lo + 1) ? json(lo + static_cast<long long>(pick))
                                                                : extra[pick - static_cast<std::size_t>(hi - lo + 1)];
    } else {
      out[key] = spec;  // fixed value
    }
  }
  return out;
}

CvResult CrossValidate(ModelFamily family, const MatrixD& x, const std::vector<std::uint8_t>& y,
                       std::size_t h, std::size_t m, std::size_t t, const json& space, std::size_t budget,
                       std::uint64_t seed, std::size_t n_folds) {
  if (budget == 0) Fail(ErrorKind::kInvalidArgument, "search budget must be >= 1");
  std::mt19937_64 rng(DeriveSeed(seed, "search"));
  CvResult result;
  for (std::size_t b = 0; b < budget; ++b) result.candidates.push_back(SampleHyperparams(space, rng));
  const auto folds = KFoldPartition(x.rows(), n_folds, seed);
  result.fold_f1.assign(budget, std::vector<double>(n_folds, 0.0));
  const auto tasks = static_cast<std::ptrdiff_t>(budget * n_folds);
  auto run = [&](std::ptrdiff_t task) {
    const std::size_t c = static_cast<std::size_t>(task) / n_folds, f = static_cast<std::size_t>(task) % n_folds;
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < n_folds; ++g) {
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train.begin(), train.end());
    const auto ytrain = Pick(y, train);
    const auto yval = Pick(y, folds[f]);
    const TrainedModel model = FitModel(family, result.candidates[c], Rows(x, train), ytrain, h, m, t,
                                        DeriveSeed(seed, "cv", task));
    result.fold_f1[c][f] = Evaluate(model.PredictProbaH1(Rows(x, folds[f])), yval).h1.f1;
  };
  if (IsForest(family)) {
    for (std::ptrdiff_t task = 0; task < tasks; ++task) run(task);  // trees are parallel inside
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t task = 0; task < tasks; ++task) run(task);
  }
  for (std::size_t c = 0; c < budget; ++c) {
    const double mean = std::accumulate(result.fold_f1[c].begin(), result.fold_f1[c].end(), 0.0) /
                        static_cast<double>(n_folds);
    if (mean > result.best_score) {
      result.best_score = mean;
      result.best_params = result.candidates[c];
    }
  }
  result.model = FitModel(family, result.best_params, x, y, h, m, t, seed);
  return result;
}

}  // namespace hospx
