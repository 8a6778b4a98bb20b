#ifndef HOSPX_NETWORKS_H_
#define HOSPX_NETWORKS_H_

#include "hospx/nn.h"

namespace hospx {

// Dense/ReLU/Dropout blocks followed by a 2-logit output layer.
class MlpNetwork : public Network {
 public:
  MlpNetwork(const MlpConfig& config, std::uint64_t seed);
  std::string Kind() const override { return "mlp"; }
  std::size_t input_dim() const override { return config_.input_dim; }
  MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng) override;
  MatrixD Backward(const MatrixD& grad_logits) override;
  std::vector<Param*> Params() override { return net_.Params(); }
  const MlpConfig& config() const { return config_; }

 private:
  MlpConfig config_;
  Sequential net_;
};

// Early-fusion rows are split into X2 (first m*t columns, channel-major) and
// X1 (last h columns); each branch is encoded separately and the hidden
// representations are concatenated before the classification head.
class FusionNetwork : public Network {
 public:
  FusionNetwork(const FusionConfig& config, std::uint64_t seed);
  std::string Kind() const override { return "fusion"; }
  std::size_t input_dim() const override { return config_.m * config_.t + config_.h; }
  MatrixD Forward(const MatrixD& x, bool training, std::mt19937_64* rng) override;
  MatrixD Backward(const MatrixD& grad_logits) override;
  std::vector<Param*> Params() override;
  const FusionConfig& config() const { return config_; }
  std::size_t tabular_width() const { return tabular_width_; }
  std::size_t temporal_width() const { return temporal_width_; }

 private:
  FusionConfig config_;
  Sequential tabular_, temporal_, head_;
  std::size_t tabular_width_ = 0, temporal_width_ = 0;
};

}  // namespace hospx

#endif  // HOSPX_NETWORKS_H_
