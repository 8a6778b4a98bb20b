#include "hospx/explain.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "hospx/stats.h"

namespace hospx {
namespace {

// Path-dependent TreeSHAP (Lundberg et al.) with an explicit path buffer.
struct PathElement {
  int feature;
  double zero_fraction, one_fraction, pweight;
};

void ExtendPath(PathElement* path, int depth, double zero_fraction, double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) / static_cast<double>(depth + 1);
    path[i].pweight = zero_fraction * path[i].pweight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void UnwindPath(PathElement* path, int depth, int index) {
  const double one = path[index].one_fraction, zero = path[index].zero_fraction;
  double next = path[depth].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next * (depth + 1) / ((i + 1) * one);
      next = tmp - path[i].pweight * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      path[i].pweight = path[i].pweight * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

double UnwoundPathSum(const PathElement* path, int depth, int index) {
  const double one = path[index].one_fraction, zero = path[index].zero_fraction;
  double next = path[depth].pweight, total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = next * (depth + 1) / ((i + 1) * one);
      total += tmp;
      next = path[i].pweight - tmp * zero * (depth - i) / static_cast<double>(depth + 1);
    } else if (zero != 0.0) {
      total += path[i].pweight / zero / ((depth - i) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

void Recurse(const std::vector<TreeNode>& nodes, std::span<const double> x, std::vector<double>& phi, int node,
             int depth, PathElement* parent_path, double zero_fraction, double one_fraction, int feature) {
  PathElement* path = parent_path + depth + 1;
  std::copy(parent_path, parent_path + depth + 1, path);
  ExtendPath(path, depth, zero_fraction, one_fraction, feature);
  const TreeNode& n = nodes[node];
  if (n.is_leaf()) {
    for (int i = 1; i <= depth; ++i) {
      const double w = UnwoundPathSum(path, depth, i);
      phi[path[i].feature] += w * (path[i].one_fraction - path[i].zero_fraction) * n.value;
    }
    return;
  }
  const int hot = x[n.feature] <= n.threshold ? n.left : n.right;
  const int cold = hot == n.left ? n.right : n.left;
  const double cover = n.cover;
  const double hot_zero = cover > 0 ? nodes[hot].cover / cover : 0.0;
  const double cold_zero = cover > 0 ? nodes[cold].cover / cover : 0.0;
  double incoming_zero = 1.0, incoming_one = 1.0;
  int index = 0;
  while (index <= depth && path[index].feature != n.feature) ++index;
  if (index <= depth) {
    incoming_zero = path[index].zero_fraction;
    incoming_one = path[index].one_fraction;
    UnwindPath(path, depth, index);
    --depth;
  }
  Recurse(nodes, x, phi, hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, n.feature);
  Recurse(nodes, x, phi, cold, depth + 1, path, cold_zero * incoming_zero, 0.0, n.feature);
}

double Median(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  return QuantileSorted(v, 0.5);
}

std::vector<std::string> TopK(const std::vector<FeatureShapStats>& stats, std::size_t k) {
  std::vector<std::size_t> order(stats.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (stats[a].median != stats[b].median) return stats[a].median > stats[b].median;
    if (stats[a].mean != stats[b].mean) return stats[a].mean > stats[b].mean;
    return stats[a].feature < stats[b].feature;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(stats[order[i]].feature);
  return out;
}

void CheckBackground(const MatrixD& background, std::size_t k) {
  if (background.rows() == 0) Fail(ErrorKind::kInvalidArgument, "empty background set");
  if (background.cols() != k) Fail(ErrorKind::kInvalidArgument, "background width mismatch");
}

ShapEstimate Finish(const std::vector<double>& sum, const std::vector<double>& sumsq, std::size_t n) {
  ShapEstimate e;
  e.values.resize(sum.size());
  e.standard_errors.resize(sum.size());
  const double dn = static_cast<double>(n);
  for (std::size_t j = 0; j < sum.size(); ++j) {
    const double mean = sum[j] / dn;
    e.values[j] = mean;
    const double var = n > 1 ? std::max(0.0, (sumsq[j] - dn * mean * mean) / (dn - 1.0)) : 0.0;
    e.standard_errors[j] = std::sqrt(var / dn);
  }
  return e;
}

}  // namespace

std::vector<double> TreeShap(const DecisionTree& tree, std::span<const double> x) {
  std::vector<double> phi(x.size(), 0.0);
  const auto& nodes = tree.nodes();
  const int maxd = tree.Depth() + 2;
  std::vector<PathElement> buffer(static_cast<std::size_t>(maxd * (maxd + 1) / 2 + maxd));
  Recurse(nodes, x, phi, 0, 0, buffer.data(), 1.0, 1.0, -1);
  return phi;
}

double TreeExpectedValue(const DecisionTree& tree) {
  const auto& nodes = tree.nodes();
  double total = 0.0;
  const double root = nodes[0].cover;
  for (const auto& n : nodes) {
    if (n.is_leaf()) total += n.cover * n.value;
  }
  return root > 0 ? total / root : nodes[0].value;
}

std::vector<double> TreeShap(const ForestModel& forest, std::span<const double> x) {
  if (x.size() != forest.n_features()) Fail(ErrorKind::kInvalidArgument, "feature count mismatch");
  std::vector<double> phi(x.size(), 0.0);
  for (const auto& tree : forest.trees()) {
    const auto p = TreeShap(tree, x);
    for (std::size_t j = 0; j < x.size(); ++j) phi[j] += p[j];
  }
  const double n = static_cast<double>(forest.trees().size());
  for (double& v : phi) v /= n;
  return phi;
}

double ForestExpectedValue(const ForestModel& forest) {
  double total = 0.0;
  for (const auto& tree : forest.trees()) total += TreeExpectedValue(tree);
  return total / static_cast<double>(forest.trees().size());
}

ShapMatrix TreeShapMatrix(const ForestModel& forest, const MatrixD& x, Exec exec) {
  if (x.cols() != forest.n_features()) Fail(ErrorKind::kInvalidArgument, "feature count mismatch");
  ShapMatrix m;
  m.method = "tree";
  m.values = MatrixD(x.rows(), x.cols());
  m.outputs.resize(x.rows());
  m.base_value = ForestExpectedValue(forest);
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  auto one = [&](std::ptrdiff_t i) {
    const auto phi = TreeShap(forest, x.row(i));
    std::copy(phi.begin(), phi.end(), m.values.row(i).begin());
    m.outputs[i] = forest.PredictProba(x.row(i));
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  }
  return m;
}

ShapEstimate SamplingShap(const PredictFn& predict, std::span<const double> x, const MatrixD& background,
                          std::size_t n_permutations, std::mt19937_64& rng) {
  const std::size_t k = x.size();
  CheckBackground(background, k);
  if (n_permutations == 0) Fail(ErrorKind::kInvalidArgument, "need at least one permutation");
  std::vector<double> sum(k, 0.0), sumsq(k, 0.0);
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::uniform_int_distribution<std::size_t> pick(0, background.rows() - 1);
  // Permutations are evaluated in chunks to keep batches moderately sized.
  const std::size_t chunk = std::max<std::size_t>(1, 4096 / (k + 1));
  std::vector<std::vector<std::size_t>> perms;
  for (std::size_t done = 0; done < n_permutations;) {
    const std::size_t count = std::min(chunk, n_permutations - done);
    MatrixD batch(count * (k + 1), k);
    perms.clear();
    for (std::size_t p = 0; p < count; ++p) {
      std::shuffle(perm.begin(), perm.end(), rng);
      perms.push_back(perm);
      const auto b = background.row(pick(rng));
      std::vector<double> z(b.begin(), b.end());
      std::copy(z.begin(), z.end(), batch.row(p * (k + 1)).begin());
      for (std::size_t step = 0; step < k; ++step) {
        z[perm[step]] = x[perm[step]];
        std::copy(z.begin(), z.end(), batch.row(p * (k + 1) + step + 1).begin());
      }
    }
    const std::vector<double> out = predict(batch);
    for (std::size_t p = 0; p < count; ++p) {
      for (std::size_t step = 0; step < k; ++step) {
        const double d = out[p * (k + 1) + step + 1] - out[p * (k + 1) + step];
        sum[perms[p][step]] += d;
        sumsq[perms[p][step]] += d * d;
      }
    }
    done += count;
  }
  return Finish(sum, sumsq, n_permutations);
}

ShapEstimate GradientShap(Network& net, std::span<const double> x, const MatrixD& background,
                          std::size_t n_samples, std::mt19937_64& rng) {
  const std::size_t k = x.size();
  if (k != net.input_dim()) Fail(ErrorKind::kInvalidArgument, "feature count mismatch");
  CheckBackground(background, k);
  if (n_samples == 0) Fail(ErrorKind::kInvalidArgument, "need at least one sample");
  MatrixD points(n_samples, k), diffs(n_samples, k);
  std::uniform_int_distribution<std::size_t> pick(0, background.rows() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto b = background.row(pick(rng));
    const double alpha = unit(rng);
    for (std::size_t j = 0; j < k; ++j) {
      diffs(s, j) = x[j] - b[j];
      points(s, j) = b[j] + alpha * diffs(s, j);
    }
  }
  net.Forward(points, false, nullptr);
  MatrixD g(n_samples, 2);
  for (std::size_t s = 0; s < n_samples; ++s) g(s, 1) = 1.0;
  const MatrixD grad = net.Backward(g);
  std::vector<double> sum(k, 0.0), sumsq(k, 0.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = diffs(s, j) * grad(s, j);
      sum[j] += v;
      sumsq[j] += v * v;
    }
  }
  return Finish(sum, sumsq, n_samples);
}

ShapEstimate GradientShap(const TrainedModel& model, std::span<const double> x, const MatrixD& background,
                          std::size_t n_samples, std::mt19937_64& rng) {
  if (!model.network) Fail(ErrorKind::kInvalidArgument, "gradient attributions need a differentiable model");
  return GradientShap(*model.network, x, background, n_samples, rng);
}

PredictFn NetworkLogitFn(const TrainedModel& model) {
  if (!model.network) Fail(ErrorKind::kInvalidArgument, "not a network model");
  std::shared_ptr<Network> net = model.network;
  return [net](const MatrixD& x) {
    const MatrixD z = net->Logits(x);
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = z(i, 1);
    return out;
  };
}

ShapMatrix SamplingShapMatrix(const PredictFn& predict, const MatrixD& x, const MatrixD& background,
                              std::size_t n_permutations, std::uint64_t seed) {
  ShapMatrix m;
  m.method = "sampling";
  m.values = MatrixD(x.rows(), x.cols());
  m.outputs = predict(x);
  const auto base = predict(background);
  m.base_value = std::accumulate(base.begin(), base.end(), 0.0) / static_cast<double>(base.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::mt19937_64 rng(DeriveSeed(seed, "sampling-shap", i));
    const auto e = SamplingShap(predict, x.row(i), background, n_permutations, rng);
    std::copy(e.values.begin(), e.values.end(), m.values.row(i).begin());
  }
  return m;
}

ShapMatrix GradientShapMatrix(const TrainedModel& model, const MatrixD& x, const MatrixD& background,
                              std::size_t n_samples, std::uint64_t seed) {
  if (!model.network) Fail(ErrorKind::kInvalidArgument, "gradient attributions need a differentiable model");
  const PredictFn logit = NetworkLogitFn(model);
  ShapMatrix m;
  m.method = "gradient";
  m.values = MatrixD(x.rows(), x.cols());
  m.outputs = logit(x);
  const auto base = logit(background);
  m.base_value = std::accumulate(base.begin(), base.end(), 0.0) / static_cast<double>(base.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::mt19937_64 rng(DeriveSeed(seed, "gradient-shap", i));
    const auto e = GradientShap(*model.network, x.row(i), background, n_samples, rng);
    std::copy(e.values.begin(), e.values.end(), m.values.row(i).begin());
  }
  return m;
}

std::vector<std::size_t> SampleRows(std::size_t rows, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), 0);
  if (count >= rows) return idx;
  std::mt19937_64 rng(DeriveSeed(seed, "rows"));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

ShapSummary SummarizeShap(const std::vector<ShapMatrix>& matrices, std::size_t top_k) {
  if (matrices.empty()) Fail(ErrorKind::kInvalidArgument, "no attribution matrices");
  const std::size_t k = matrices.front().values.cols();
  for (const auto& m : matrices) {
    if (m.values.cols() != k || m.feature_names != matrices.front().feature_names) {
      Fail(ErrorKind::kInvalidArgument, "attribution matrices have different features");
    }
  }
  ShapSummary s;
  s.features.resize(k);
  std::vector<double> col;
  for (std::size_t j = 0; j < k; ++j) {
    col.clear();
    for (const auto& m : matrices) {
      for (std::size_t i = 0; i < m.values.rows(); ++i) col.push_back(std::abs(m.values(i, j)));
    }
    FeatureShapStats& f = s.features[j];
    const auto& names = matrices.front().feature_names;
    f.feature = j < names.size() ? names[j] : "f" + std::to_string(j);
    if (col.empty()) continue;
    f.mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    f.median = Median(col);
    f.q1 = QuantileSorted(col, 0.25);
    f.q3 = QuantileSorted(col, 0.75);
    const double iqr = f.q3 - f.q1;
    f.lo_whisker = std::max(f.q1 - 1.5 * iqr, col.front());
    f.hi_whisker = std::min(f.q3 + 1.5 * iqr, col.back());
  }
  s.top = TopK(s.features, top_k);
  return s;
}

Overlap TopKOverlap(const ShapSummary& a, const ShapSummary& b, std::size_t k) {
  std::set<std::string> ua, ub;
  for (const auto& f : a.features) ua.insert(f.feature);
  for (const auto& f : b.features) ub.insert(f.feature);
  if (ua != ub) Fail(ErrorKind::kInvalidArgument, "summaries cover different feature sets");
  if (k == 0) Fail(ErrorKind::kInvalidArgument, "k must be positive");
  const auto ta = TopK(a.features, k), tb = TopK(b.features, k);
  const std::set<std::string> sa(ta.begin(), ta.end());
  Overlap o;
  for (const auto& name : tb) o.count += sa.count(name);
  o.fraction = static_cast<double>(o.count) / static_cast<double>(k);
  return o;
}

void WriteShapSummary(const ShapSummary& s, std::ostream& out) {
  out << "feature\tmedian\tmean\tq1\tq3\tlo_whisker\thi_whisker\n";
  char buf[256];
  for (const auto& f : s.features) {
    std::snprintf(buf, sizeof(buf), "\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\n", f.median, f.mean, f.q1, f.q3,
                  f.lo_whisker, f.hi_whisker);
    out << f.feature << buf;
  }
}

ShapSummary ReadShapSummary(std::istream& in, std::size_t top_k) {
  ShapSummary s;
  std::string line;
  if (!std::getline(in, line) || line.rfind("feature\t", 0) != 0) {
    Fail(ErrorKind::kIo, "not an attribution summary");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    FeatureShapStats f;
    if (!std::getline(row, f.feature, '\t') ||
        !(row >> f.median >> f.mean >> f.q1 >> f.q3 >> f.lo_whisker >> f.hi_whisker)) {
      Fail(ErrorKind::kIo, "malformed attribution summary line");
    }
    s.features.push_back(std::move(f));
  }
  s.top = TopK(s.features, top_k);
  return s;
}

void WriteShapPlotData(const std::vector<ShapMatrix>& matrices, const ShapSummary& summary, std::ostream& out) {
  out << "feature\trank\tabs_shap\n";
  const auto& names = matrices.empty() ? std::vector<std::string>{} : matrices.front().feature_names;
  char buf[64];
  for (std::size_t r = 0; r < summary.top.size(); ++r) {
    const auto it = std::find(names.begin(), names.end(), summary.top[r]);
    if (it == names.end()) continue;
    const auto j = static_cast<std::size_t>(it - names.begin());
    for (const auto& m : matrices) {
      for (std::size_t i = 0; i < m.values.rows(); ++i) {
        std::snprintf(buf, sizeof(buf), "\t%zu\t%.8g\n", r + 1, std::abs(m.values(i, j)));
        out << summary.top[r] << buf;
      }
    }
  }
}

}  // namespace hospx
