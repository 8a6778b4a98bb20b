#include "hospx/nn.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace hospx {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

ConstMapMat View(const MatrixD& m) {
  return ConstMapMat(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                     static_cast<Eigen::Index>(m.cols()));
}
MapMat View(MatrixD& m) {
  return MapMat(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

Param MakeParam(std::string name, std::size_t size) {
  Param p;
  p.name = std::move(name);
  p.value.assign(size, 0.0);
  p.grad.assign(size, 0.0);
  p.velocity.assign(size, 0.0);
  return p;
}

void HeInit(Param& p, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : p.value) v = d(rng);
}

}  // namespace

Dense::Dense(std::size_t in, std::size_t out, std::string name, std::mt19937_64& rng)
    : in_(in), out_(out), w_(MakeParam(name + ".weight", in * out)),
      b_(MakeParam(name + ".bias", out)) {
  HeInit(w_, in, rng);
}

MatrixD Dense::Forward(const MatrixD& x, bool, std::mt19937_64*) {
  if (x.cols() != in_) Fail(ErrorKind::kInvalidArgument, "dense layer input width mismatch");
  x_ = x;
  MatrixD y(x.rows(), out_);
  ConstMapMat w(w_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
  Eigen::Map<const Eigen::RowVectorXd> b(b_.value.data(), static_cast<Eigen::Index>(out_));
  auto yv = View(y);
  yv.noalias() = View(x) * w.transpose();
  yv.rowwise() += b;
  return y;
}

MatrixD Dense::Backward(const MatrixD& g) {
  ConstMapMat w(w_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
  MapMat gw(w_.grad.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
  Eigen::Map<Eigen::RowVectorXd> gb(b_.grad.data(), static_cast<Eigen::Index>(out_));
  const auto gv = View(g);
  gw.noalias() += gv.transpose() * View(x_);
  gb += gv.colwise().sum();
  MatrixD gx(g.rows(), in_);
  View(gx).noalias() = gv * w;
  return gx;
}

MatrixD Relu::Forward(const MatrixD& x, bool, std::mt19937_64*) {
  y_ = x;
  for (double& v : y_.data()) v = v > 0.0 ? v : 0.0;
  return y_;
}

MatrixD Relu::Backward(const MatrixD& g) {
  MatrixD gx = g;
  auto& d = gx.data();
  const auto& y = y_.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(y[i] > 0.0)) d[i] = 0.0;
  }
  return gx;
}

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) Fail(ErrorKind::kInvalidArgument, "dropout rate must be in [0,1)");
}

MatrixD Dropout::Forward(const MatrixD& x, bool training, std::mt19937_64* rng) {
  if (!training || rate_ == 0.0) {
    mask_.clear();
    return x;
  }
  if (!rng) Fail(ErrorKind::kInvalidArgument, "dropout in training needs an RNG");
  std::bernoulli_distribution keep(1.0 - rate_);
  const double scale = 1.0 / (1.0 - rate_);
  MatrixD y = x;
  mask_.resize(y.data().size());
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    mask_[i] = keep(*rng) ? scale : 0.0;
    y.data()[i] *= mask_[i];
  }
  return y;
}

MatrixD Dropout::Backward(const MatrixD& g) {
  if (mask_.empty()) return g;
  MatrixD gx = g;
  for (std::size_t i = 0; i < mask_.size(); ++i) gx.data()[i] *= mask_[i];
  return gx;
}

Conv1D::Conv1D(std::size_t in_channels, std::size_t out_channels, std::size_t steps,
               std::size_t kernel, std::size_t pad, std::string name, std::mt19937_64& rng)
    : cin_(in_channels), cout_(out_channels), steps_(steps), kernel_(kernel), pad_(pad),
      out_steps_(steps + 2 * pad + 1 - kernel),
      w_(MakeParam(name + ".weight", out_channels * in_channels * kernel)),
      b_(MakeParam(name + ".bias", out_channels)) {
  if (steps + 2 * pad < kernel) Fail(ErrorKind::kInvalidArgument, "convolution kernel longer than input");
  HeInit(w_, in_channels * kernel, rng);
}

MatrixD Conv1D::Forward(const MatrixD& x, bool, std::mt19937_64*) {
  if (x.cols() != cin_ * steps_) Fail(ErrorKind::kInvalidArgument, "conv input width mismatch");
  batch_ = x.rows();
  const std::size_t rows = cin_ * kernel_, cols = batch_ * out_steps_;
  col_.assign(rows * cols, 0.0);
  for (std::size_t b = 0; b < batch_; ++b) {
    const auto xr = x.row(b);
    for (std::size_t c = 0; c < cin_; ++c) {
      for (std::size_t kk = 0; kk < kernel_; ++kk) {
        double* dst = &col_[(c * kernel_ + kk) * cols + b * out_steps_];
        for (std::size_t s = 0; s < out_steps_; ++s) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s + kk) - static_cast<std::ptrdiff_t>(pad_);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(steps_)) dst[s] = xr[c * steps_ + src];
        }
      }
    }
  }
  ConstMapMat w(w_.value.data(), static_cast<Eigen::Index>(cout_), static_cast<Eigen::Index>(rows));
  ConstMapMat col(col_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  RowMat out = w * col;  // cout x (batch*out_steps)
  MatrixD y(batch_, cout_ * out_steps_);
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t o = 0; o < cout_; ++o) {
      for (std::size_t s = 0; s < out_steps_; ++s) {
        y(b, o * out_steps_ + s) = out(o, b * out_steps_ + s) + b_.value[o];
      }
    }
  }
  return y;
}

MatrixD Conv1D::Backward(const MatrixD& g) {
  const std::size_t rows = cin_ * kernel_, cols = batch_ * out_steps_;
  RowMat go(cout_, cols);
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t o = 0; o < cout_; ++o) {
      for (std::size_t s = 0; s < out_steps_; ++s) go(o, b * out_steps_ + s) = g(b, o * out_steps_ + s);
    }
  }
  ConstMapMat w(w_.value.data(), static_cast<Eigen::Index>(cout_), static_cast<Eigen::Index>(rows));
  MapMat gw(w_.grad.data(), static_cast<Eigen::Index>(cout_), static_cast<Eigen::Index>(rows));
  ConstMapMat col(col_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  gw.noalias() += go * col.transpose();
  for (std::size_t o = 0; o < cout_; ++o) b_.grad[o] += go.row(static_cast<Eigen::Index>(o)).sum();
  const RowMat gcol = w.transpose() * go;
  MatrixD gx(batch_, cin_ * steps_);
  for (std::size_t b = 0; b < batch_; ++b) {
    auto gr = gx.row(b);
    for (std::size_t c = 0; c < cin_; ++c) {
      for (std::size_t kk = 0; kk < kernel_; ++kk) {
        const auto r = static_cast<Eigen::Index>(c * kernel_ + kk);
        for (std::size_t s = 0; s < out_steps_; ++s) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s + kk) - static_cast<std::ptrdiff_t>(pad_);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(steps_)) {
            gr[c * steps_ + src] += gcol(r, static_cast<Eigen::Index>(b * out_steps_ + s));
          }
        }
      }
    }
  }
  return gx;
}

MaxPool1D::MaxPool1D(std::size_t channels, std::size_t steps, std::size_t size)
    : channels_(channels), steps_(steps), size_(size) {
  if (size == 0 || size > steps) Fail(ErrorKind::kInvalidArgument, "bad pooling size");
}

MatrixD MaxPool1D::Forward(const MatrixD& x, bool, std::mt19937_64*) {
  if (x.cols() != channels_ * steps_) Fail(ErrorKind::kInvalidArgument, "pool input width mismatch");
  const std::size_t out_steps = steps_ / size_;
  in_cols_ = x.cols();
  MatrixD y(x.rows(), channels_ * out_steps);
  argmax_.assign(y.data().size(), 0);
  for (std::size_t b = 0; b < x.rows(); ++b) {
    for (std::size_t c = 0; c < channels_; ++c) {
      for (std::size_t s = 0; s < out_steps; ++s) {
        std::size_t best = c * steps_ + s * size_;
        for (std::size_t q = 1; q < size_; ++q) {
          const std::size_t idx = c * steps_ + s * size_ + q;
          if (x(b, idx) > x(b, best)) best = idx;
        }
        const std::size_t o = c * out_steps + s;
        y(b, o) = x(b, best);
        argmax_[b * y.cols() + o] = best;
      }
    }
  }
  return y;
}

MatrixD MaxPool1D::Backward(const MatrixD& g) {
  MatrixD gx(g.rows(), in_cols_);
  for (std::size_t b = 0; b < g.rows(); ++b) {
    for (std::size_t o = 0; o < g.cols(); ++o) gx(b, argmax_[b * g.cols() + o]) += g(b, o);
  }
  return gx;
}

MatrixD Sequential::Forward(const MatrixD& x, bool training, std::mt19937_64* rng) {
  MatrixD a = x;
  for (auto& l : layers_) a = l->Forward(a, training, rng);
  return a;
}

MatrixD Sequential::Backward(const MatrixD& g) {
  MatrixD a = g;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) a = (*it)->Backward(a);
  return a;
}

std::vector<Param*> Sequential::Params() {
  std::vector<Param*> out;
  for (auto& l : layers_) {
    for (Param* p : l->Params()) out.push_back(p);
  }
  return out;
}

void Network::ZeroGrad() {
  for (Param* p : Params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

MatrixD Network::Logits(const MatrixD& x) {
  constexpr std::size_t kBatch = 1024;
  MatrixD out(x.rows(), 2);
  for (std::size_t start = 0; start < x.rows(); start += kBatch) {
    const std::size_t end = std::min(x.rows(), start + kBatch);
    MatrixD batch(end - start, x.cols());
    std::copy(x.data().begin() + start * x.cols(), x.data().begin() + end * x.cols(),
              batch.data().begin());
    const MatrixD y = Forward(batch, false, nullptr);
    std::copy(y.data().begin(), y.data().end(), out.data().begin() + start * 2);
  }
  return out;
}

}  // namespace hospx
