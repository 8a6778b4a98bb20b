#include "hospx/networks.h"

namespace hospx {
namespace {

MatrixD Columns(const MatrixD& x, std::size_t begin, std::size_t count) {
  MatrixD out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::copy_n(x.row(i).begin() + begin, count, out.row(i).begin());
  }
  return out;
}

}  // namespace

MlpNetwork::MlpNetwork(const MlpConfig& config, std::uint64_t seed) : config_(config) {
  if (config.input_dim == 0) Fail(ErrorKind::kInvalidArgument, "MLP input dimension is zero");
  std::mt19937_64 rng(DeriveSeed(seed, "mlp-init"));
  std::size_t width = config.input_dim;
  for (std::size_t i = 0; i < config.hidden.size(); ++i) {
    net_.Add(std::make_unique<Dense>(width, config.hidden[i], "dense" + std::to_string(i), rng));
    net_.Add(std::make_unique<Relu>());
    net_.Add(std::make_unique<Dropout>(config.dropout));
    width = config.hidden[i];
  }
  net_.Add(std::make_unique<Dense>(width, 2, "output", rng));
}

MatrixD MlpNetwork::Forward(const MatrixD& x, bool training, std::mt19937_64* rng) {
  return net_.Forward(x, training, rng);
}

MatrixD MlpNetwork::Backward(const MatrixD& g) { return net_.Backward(g); }

FusionNetwork::FusionNetwork(const FusionConfig& c, std::uint64_t seed) : config_(c) {
  if (c.h == 0 || c.m == 0 || c.t == 0) Fail(ErrorKind::kInvalidArgument, "fusion shape has a zero dimension");
  if (c.conv_channels.empty()) Fail(ErrorKind::kInvalidArgument, "fusion needs a convolution layer");
  std::mt19937_64 rng(DeriveSeed(seed, "fusion-init"));
  std::size_t width = c.h;
  for (std::size_t i = 0; i < c.tabular_hidden.size(); ++i) {
    tabular_.Add(std::make_unique<Dense>(width, c.tabular_hidden[i], "tabular" + std::to_string(i), rng));
    tabular_.Add(std::make_unique<Relu>());
    tabular_.Add(std::make_unique<Dropout>(c.dropout));
    width = c.tabular_hidden[i];
  }
  tabular_width_ = width;

  std::size_t channels = c.m, steps = c.t;
  for (std::size_t i = 0; i < c.conv_channels.size(); ++i) {
    auto conv = std::make_unique<Conv1D>(channels, c.conv_channels[i], steps, c.kernel, c.kernel / 2,
                                         "conv" + std::to_string(i), rng);
    steps = conv->out_steps();
    channels = c.conv_channels[i];
    temporal_.Add(std::move(conv));
    temporal_.Add(std::make_unique<Relu>());
    if (c.pool > 1 && steps >= c.pool) {
      auto pool = std::make_unique<MaxPool1D>(channels, steps, c.pool);
      steps = pool->out_steps();
      temporal_.Add(std::move(pool));
    }
  }
  temporal_width_ = channels * steps;

  head_.Add(std::make_unique<Dense>(tabular_width_ + temporal_width_, c.merge_hidden, "merge", rng));
  head_.Add(std::make_unique<Relu>());
  head_.Add(std::make_unique<Dropout>(c.dropout));
  head_.Add(std::make_unique<Dense>(c.merge_hidden, 2, "output", rng));
}

MatrixD FusionNetwork::Forward(const MatrixD& x, bool training, std::mt19937_64* rng) {
  const std::size_t mt = config_.m * config_.t;
  if (x.cols() != mt + config_.h) Fail(ErrorKind::kInvalidArgument, "fusion input width mismatch");
  const MatrixD a = tabular_.Forward(Columns(x, mt, config_.h), training, rng);
  const MatrixD b = temporal_.Forward(Columns(x, 0, mt), training, rng);
  MatrixD merged(x.rows(), tabular_width_ + temporal_width_);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = merged.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), row.begin());
    std::copy(b.row(i).begin(), b.row(i).end(), row.begin() + tabular_width_);
  }
  return head_.Forward(merged, training, rng);
}

MatrixD FusionNetwork::Backward(const MatrixD& g) {
  const MatrixD gm = head_.Backward(g);
  const MatrixD ga = tabular_.Backward(Columns(gm, 0, tabular_width_));
  const MatrixD gb = temporal_.Backward(Columns(gm, tabular_width_, temporal_width_));
  const std::size_t mt = config_.m * config_.t;
  MatrixD gx(g.rows(), mt + config_.h);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    auto row = gx.row(i);
    std::copy(gb.row(i).begin(), gb.row(i).end(), row.begin());
    std::copy(ga.row(i).begin(), ga.row(i).end(), row.begin() + mt);
  }
  return gx;
}

std::vector<Param*> FusionNetwork::Params() {
  std::vector<Param*> out = tabular_.Params();
  for (Param* p : temporal_.Params()) out.push_back(p);
  for (Param* p : head_.Params()) out.push_back(p);
  return out;
}

std::unique_ptr<Network> MakeMlp(const MlpConfig& config, std::uint64_t seed) {
  return std::make_unique<MlpNetwork>(config, seed);
}

std::unique_ptr<Network> MakeFusion(const FusionConfig& config, std::uint64_t seed) {
  return std::make_unique<FusionNetwork>(config, seed);
}

}  // namespace hospx
