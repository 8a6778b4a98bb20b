#include "hospx/forest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hospx {
namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double proxy = -1.0;  // larger is better
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<double>& xt, std::size_t n_rows, std::size_t n_features,
              const std::vector<std::uint8_t>& y, ForestVariant variant, const ForestParams& params,
              std::array<double, 2> cw, std::uint64_t seed)
      : xt_(xt), n_rows_(n_rows), n_features_(n_features), y_(y), variant_(variant),
        params_(params), cw_(cw), rng_(seed),
        mtry_(ResolveMaxFeatures(params.max_features, n_features)) {}

  DecisionTree Build() {
    if (params_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n_rows_ - 1);
      samples_.resize(n_rows_);
      for (auto& s : samples_) s = pick(rng_);
    } else {
      samples_.resize(n_rows_);
      std::iota(samples_.begin(), samples_.end(), 0);
    }
    features_.resize(n_features_);
    std::iota(features_.begin(), features_.end(), 0);
    Grow(0, samples_.size(), 0);
    return DecisionTree(std::move(nodes_));
  }

 private:
  double X(std::size_t row, std::size_t f) const { return xt_[f * n_rows_ + row]; }

  int Grow(std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double c0 = 0, c1 = 0;
    for (std::size_t i = begin; i < end; ++i) (y_[samples_[i]] ? c1 : c0) += 1.0;
    {
      TreeNode& node = nodes_[id];
      node.count0 = c0;
      node.count1 = c1;
      node.cover = c0 + c1;
      const double w0 = c0 * cw_[0], w1 = c1 * cw_[1];
      node.value = w0 + w1 > 0 ? w1 / (w0 + w1) : 0.0;
    }
    const std::size_t n = end - begin;
    const bool depth_ok = params_.max_depth < 0 || depth < params_.max_depth;
    if (!depth_ok || n < params_.min_samples_split || n < 2 * params_.min_samples_leaf || c0 == 0 ||
        c1 == 0) {
      return id;
    }
    const Split split = FindSplit(begin, end, c0, c1);
    if (split.feature < 0) return id;
    const auto mid = std::partition(samples_.begin() + begin, samples_.begin() + end, [&](std::size_t s) {
      return X(s, split.feature) <= split.threshold;
    });
    const auto m = static_cast<std::size_t>(mid - samples_.begin());
    const int left = Grow(begin, m, depth + 1);
    const int right = Grow(m, end, depth + 1);
    TreeNode& node = nodes_[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  // Weighted Gini proxy: sum over children of (w0^2 + w1^2) / W.
  static double Proxy(double l0, double l1, double r0, double r1) {
    const double wl = l0 + l1, wr = r0 + r1;
    if (wl <= 0 || wr <= 0) return -1.0;
    return (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr;
  }

  Split FindSplit(std::size_t begin, std::size_t end, double c0, double c1) {
    Split best;
    const std::size_t n = end - begin;
    const std::size_t min_leaf = std::max<std::size_t>(1, params_.min_samples_leaf);
    std::size_t visited = 0;
    // Features are drawn without replacement; constant ones do not count
    // towards the budget.
    for (std::size_t j = 0; j < n_features_ && visited < mtry_; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, n_features_ - 1);
      std::swap(features_[j], features_[pick(rng_)]);
      const std::size_t f = features_[j];
      double lo = X(samples_[begin], f), hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        const double v = X(samples_[i], f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(lo < hi)) continue;
      ++visited;
      if (variant_ == ForestVariant::kExtraTrees) {
        double threshold = std::uniform_real_distribution<double>(lo, hi)(rng_);
        if (threshold >= hi) threshold = lo;
        double l0 = 0, l1 = 0;
        std::size_t nl = 0;
        for (std::size_t i = begin; i < end; ++i) {
          const std::size_t s = samples_[i];
          if (X(s, f) <= threshold) {
            ++nl;
            (y_[s] ? l1 : l0) += 1.0;
          }
        }
        if (nl < min_leaf || n - nl < min_leaf) continue;
        const double p = Proxy(l0 * cw_[0], l1 * cw_[1], (c0 - l0) * cw_[0], (c1 - l1) * cw_[1]);
        if (p > best.proxy) best = {static_cast<int>(f), threshold, p};
        continue;
      }
      buf_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t s = samples_[i];
        buf_.push_back({X(s, f), y_[s]});
      }
      std::sort(buf_.begin(), buf_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      double l0 = 0, l1 = 0;
      for (std::size_t i = 1; i < n; ++i) {
        (buf_[i - 1].second ? l1 : l0) += 1.0;
        if (!(buf_[i - 1].first < buf_[i].first)) continue;
        if (i < min_leaf || n - i < min_leaf) continue;
        const double p = Proxy(l0 * cw_[0], l1 * cw_[1], (c0 - l0) * cw_[0], (c1 - l1) * cw_[1]);
        if (p > best.proxy) {
          double threshold = 0.5 * (buf_[i - 1].first + buf_[i].first);
          if (threshold >= buf_[i].first) threshold = buf_[i - 1].first;
          best = {static_cast<int>(f), threshold, p};
        }
      }
    }
    return best;
  }

  const std::vector<double>& xt_;
  std::size_t n_rows_, n_features_;
  const std::vector<std::uint8_t>& y_;
  ForestVariant variant_;
  const ForestParams& params_;
  std::array<double, 2> cw_;
  std::mt19937_64 rng_;
  std::size_t mtry_;
  std::vector<std::size_t> samples_, features_;
  std::vector<std::pair<double, std::uint8_t>> buf_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

double DecisionTree::PredictProba(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const TreeNode& n = nodes_[i];
    i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].value;
}

int DecisionTree::Depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  int depth = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    depth = std::max(depth, d);
    if (!nodes_[i].is_leaf()) {
      stack.push_back({nodes_[i].left, d + 1});
      stack.push_back({nodes_[i].right, d + 1});
    }
  }
  return depth;
}

void DecisionTree::Validate(std::size_t n_features) const {
  if (nodes_.empty()) Fail(ErrorKind::kInvalidArgument, "tree has no nodes");
  const auto n = static_cast<int>(nodes_.size());
  std::vector<int> parents(nodes_.size(), 0);
  for (int i = 0; i < n; ++i) {
    const TreeNode& node = nodes_[i];
    if (node.is_leaf()) {
      if (!(node.value >= 0.0 && node.value <= 1.0)) {
        Fail(ErrorKind::kInvalidArgument, "leaf probability outside [0,1]");
      }
      continue;
    }
    if (static_cast<std::size_t>(node.feature) >= n_features) {
      Fail(ErrorKind::kInvalidArgument, "split feature index out of range");
    }
    for (int c : {node.left, node.right}) {
      if (c <= i || c >= n) Fail(ErrorKind::kInvalidArgument, "invalid child reference");
      if (++parents[c] > 1) Fail(ErrorKind::kInvalidArgument, "node with two parents");
    }
  }
}

std::string_view ToString(ForestVariant v) {
  return v == ForestVariant::kRandomForest ? "rf" : "et";
}

std::size_t ResolveMaxFeatures(const std::string& spec, std::size_t k) {
  std::size_t out = 0;
  if (spec == "sqrt") {
    out = static_cast<std::size_t>(std::sqrt(static_cast<double>(k)));
  } else if (spec == "log2") {
    out = static_cast<std::size_t>(std::log2(static_cast<double>(std::max<std::size_t>(k, 1))));
  } else if (spec == "all") {
    out = k;
  } else {
    double fraction = 0.0;
    try {
      std::size_t used = 0;
      fraction = std::stod(spec, &used);
      if (used != spec.size()) fraction = 0.0;
    } catch (const std::exception&) {
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
      Fail(ErrorKind::kInvalidArgument, "bad max_features '" + spec + "'");
    }
    out = static_cast<std::size_t>(fraction * static_cast<double>(k));
  }
  return std::clamp<std::size_t>(out, 1, std::max<std::size_t>(k, 1));
}

std::array<double, 2> BalancedClassWeights(const std::vector<std::uint8_t>& labels) {
  double n1 = 0;
  for (auto l : labels) n1 += l ? 1.0 : 0.0;
  const double n0 = static_cast<double>(labels.size()) - n1;
  if (n0 == 0 || n1 == 0) Fail(ErrorKind::kInvalidArgument, "class weights need both classes");
  const double w0 = 1.0 / n0, w1 = 1.0 / n1;
  const double mean = 0.5 * (w0 + w1);
  return {w0 / mean, w1 / mean};
}

ForestModel::ForestModel(ForestVariant variant, ForestParams params, std::array<double, 2> class_weights,
                         std::size_t n_features, std::vector<DecisionTree> trees)
    : variant_(variant), params_(std::move(params)), class_weights_(class_weights),
      n_features_(n_features), trees_(std::move(trees)) {
  if (trees_.empty()) Fail(ErrorKind::kInvalidArgument, "forest needs at least one tree");
}

double ForestModel::PredictProba(std::span<const double> x) const {
  if (x.size() != n_features_) Fail(ErrorKind::kInvalidArgument, "feature count mismatch");
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.PredictProba(x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> ForestModel::PredictProba(const MatrixD& x, Exec exec) const {
  if (x.cols() != n_features_) Fail(ErrorKind::kInvalidArgument, "feature count mismatch");
  std::vector<double> out(x.rows());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = PredictProba(x.row(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = PredictProba(x.row(i));
  }
  return out;
}

ForestModel FitForest(const MatrixD& x, const std::vector<std::uint8_t>& y, ForestVariant variant,
                      const ForestParams& params, std::uint64_t seed, Exec exec) {
  if (x.rows() != y.size()) Fail(ErrorKind::kInvalidArgument, "label count mismatch");
  if (x.rows() == 0 || x.cols() == 0) Fail(ErrorKind::kInvalidArgument, "empty training matrix");
  if (params.n_trees == 0) Fail(ErrorKind::kInvalidArgument, "n_trees must be positive");
  for (double v : x.data()) {
    if (!std::isfinite(v)) Fail(ErrorKind::kInvalidArgument, "training matrix has non-finite values");
  }
  const auto weights = BalancedClassWeights(y);  // also rejects single-class input
  const std::array<double, 2> cw = params.balanced_class_weight ? weights : std::array<double, 2>{1.0, 1.0};
  const std::size_t n = x.rows(), k = x.cols();
  std::vector<double> xt(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) xt[j * n + i] = x(i, j);
  }
  std::vector<DecisionTree> trees(params.n_trees);
  const auto n_trees = static_cast<std::ptrdiff_t>(params.n_trees);
  auto grow = [&](std::ptrdiff_t t) {
    TreeBuilder builder(xt, n, k, y, variant, params, cw, DeriveSeed(seed, "tree", t));
    trees[t] = builder.Build();
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < n_trees; ++t) grow(t);
  } else {
    for (std::ptrdiff_t t = 0; t < n_trees; ++t) grow(t);
  }
  return ForestModel(variant, params, cw, k, std::move(trees));
}

}  // namespace hospx
