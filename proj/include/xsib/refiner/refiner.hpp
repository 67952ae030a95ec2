#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsib/core/motion.hpp"
#include "xsib/nn/params.hpp"

namespace xsib::refiner {

using nn::Tensor;

struct RefinerConfig {
  int segment_length = 10;
  std::vector<int> conv_channels{32, 64};
  int conv_kernel = 3;
  int gcn_layers = 2;
  int gcn_hidden = 64;
  /// Throws ConfigError unless segment_length divides `stride`.
  void validate(int stride) const;
};
void to_json(nlohmann::json& j, const RefinerConfig& c);
void from_json(const nlohmann::json& j, RefinerConfig& c);

/// Residual autoencoder with graph convolutions over the skeleton, applied
/// per character to non-overlapping segments in DCT space.
class MotionRefiner {
 public:
  MotionRefiner(const SkeletonSpec& skeleton, RefinerConfig config, std::uint64_t seed);

  const RefinerConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// x [N, S, J, 9] with S = segment_length -> same shape, before
  /// re-orthonormalization.
  Tensor forward(const Tensor& x) const;

  /// Refines every segment of a window (frame count divisible by the segment
  /// length) and re-orthonormalizes the rotation channels. No graph is kept.
  MotionWindow refine(const MotionWindow& window) const;

 private:
  RefinerConfig config_;
  int joints_ = 0;
  nn::ParamStore params_;
  Tensor adjacency_, dct_, idct_;
  std::vector<nn::Conv1d> enc_conv_, dec_conv_;
  std::vector<nn::GraphConv> gcn_;
};

/// Mean over rollout steps of the mean squared error.
Tensor loss_refine(const std::vector<Tensor>& refined, const std::vector<Tensor>& gt);

}  // namespace xsib::refiner
