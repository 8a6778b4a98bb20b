#ifndef HOSPX_NN_H_
#define HOSPX_NN_H_

// Small double-precision network toolkit with explicit backward passes.
// Activations are batch-major matrices; temporal tensors are stored per
// sample as channel-major (channel * T + step) rows, which is also the
// flattened X2 layout.

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "hospx/common.h"

namespace hospx {

struct Param {
  std::string name;
  std::vector<double> value, grad, velocity;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng) = 0;
  // Accumulates parameter gradients and returns the input gradient.
  virtual MatrixD Backward(const MatrixD& grad_out) = 0;
  virtual std::vector<Param*> Params() { return {}; }
};

class Dense : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, std::string name, std::mt19937_64& rng);
  MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng) override;
  MatrixD Backward(const MatrixD& grad_out) override;
  std::vector<Param*> Params() override { return {&w_, &b_}; }

 private:
  std::size_t in_, out_;
  Param w_, b_;  // w_ is out x in
  MatrixD x_;
};

class Relu : public Layer {
 public:
  MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng) override;
  MatrixD Backward(const MatrixD& grad_out) override;

 private:
  MatrixD y_;
};

// Inverted dropout; identity outside training.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate);
  MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng) override;
  MatrixD Backward(const MatrixD& grad_out) override;

 private:
  double rate_;
  std::vector<double> mask_;
};

// 1-D convolution along time, stride 1, zero padding.
class Conv1D : public Layer {
 public:
  Conv1D(std::size_t in_channels, std::size_t out_channels, std::size_t steps, std::size_t kernel,
         std::size_t pad, std::string name, std::mt19937_64& rng);
  MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng) override;
  MatrixD Backward(const MatrixD& grad_out) override;
  std::vector<Param*> Params() override { return {&w_, &b_}; }
  std::size_t out_steps() const { return out_steps_; }

 private:
  std::size_t cin_, cout_, steps_, kernel_, pad_, out_steps_;
  Param w_, b_;  // w_ is cout x (cin * kernel)
  std::vector<double> col_;  // (cin*kernel) x (batch*out_steps)
  std::size_t batch_ = 0;
};

// Non-overlapping max pooling along time; trailing steps that do not fill a
// window are dropped.
class MaxPool1D : public Layer {
 public:
  MaxPool1D(std::size_t channels, std::size_t steps, std::size_t size);
  MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng) override;
  MatrixD Backward(const MatrixD& grad_out) override;
  std::size_t out_steps() const { return steps_ / size_; }

 private:
  std::size_t channels_, steps_, size_;
  std::vector<std::size_t> argmax_;
  std::size_t in_cols_ = 0;
};

class Sequential {
 public:
  void Add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng);
  MatrixD Backward(const MatrixD& grad_out);
  std::vector<Param*> Params();

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Classifier over early-fusion rows producing two logits (H0, H1).
class Network {
 public:
  virtual ~Network() = default;
  virtual std::string Kind() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng) = 0;
  // Gradient of the loss with respect to the input rows.
  virtual MatrixD Backward(const MatrixD& grad_logits) = 0;
  virtual std::vector<Param*> Params() = 0;
  void ZeroGrad();
  // Inference (dropout off), in batches.
  MatrixD Logits(const MatrixD& x);
};

struct MlpConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {64, 32, 16};
  double dropout = 0.2;
};

// Branch A: dense stack over X1. Branch B: conv/pool stack over X2.
struct FusionConfig {
  std::size_t h = 0, m = 0, t = 0;
  std::vector<std::size_t> tabular_hidden = {64, 32};
  std::vector<std::size_t> conv_channels = {16, 16};
  std::size_t kernel = 3;
  std::size_t pool = 2;
  std::size_t merge_hidden = 32;
  double dropout = 0.2;
};

std::unique_ptr<Network> MakeMlp(const MlpConfig& config, std::uint64_t seed);
std::unique_ptr<Network> MakeFusion(const FusionConfig& config, std::uint64_t seed);

}  // namespace hospx

#endif  // HOSPX_NN_H_
