#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsib/interaction/pae.hpp"
#include "xsib/nn/checkpoint.hpp"

namespace xsib::eval {

struct FeatureConfig {
  int window = 10;  // frames per embedded clip
  int stride = 5;
  int hidden = 128;
  int latent = 32;
  int steps = 1500;
  int batch = 64;
  double learning_rate = 1e-3;
};
void to_json(nlohmann::json& j, const FeatureConfig& c);
void from_json(const nlohmann::json& j, FeatureConfig& c);

/// Frozen motion autoencoder whose bottleneck embeds short two-character
/// clips for FID. Clips are expressed relative to the first character's root
/// at the clip's first frame, so the embedding ignores global placement.
class FeatureExtractor {
 public:
  FeatureExtractor(const SkeletonSpec& skeleton, FeatureConfig config, std::uint64_t seed);

  const FeatureConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  int input_size() const;

  /// Canonicalized positions of clip [start, start + window).
  std::vector<double> clip_input(const MotionWindow& world, int start) const;
  /// Embeddings of every clip inside frames [0, horizon) of each sequence,
  /// one row per clip, in sequence order.
  Eigen::MatrixXd features(const std::vector<MotionWindow>& sequences, int horizon) const;

  /// Sets the input normalization from `train`, then trains the autoencoder.
  /// Returns the final reconstruction loss (normalized units).
  double fit(const std::vector<MotionWindow>& train, std::mt19937_64& rng);

  /// Per-input mean and inverse standard deviation.
  std::vector<std::vector<double>> normalization() const { return {mean_, inv_std_}; }
  void set_normalization(const std::vector<std::vector<double>>& stats);

 private:
  nn::Tensor encode(const nn::Tensor& x) const;
  nn::Tensor normalize(const std::vector<double>& raw, int rows) const;

  FeatureConfig config_;
  int joints_ = 0;
  int root_joint_ = 0;
  nn::ParamStore params_;
  nn::Linear enc0_, enc1_, dec0_, dec1_;
  std::vector<double> mean_, inv_std_;
};

struct EvalDiscriminatorConfig {
  int horizon = 30;  // N
  int window_stride = 10;
  interaction::DiscriminatorConfig net;
  int steps = 1500;
  int batch = 32;
  double learning_rate = 1e-3;
  bool periodic = true;  // classify PAE phase features instead of raw PJD
  int pae_phase_channels = 15;
  int pae_hidden = 32;
  int pae_steps = 1000;
};
void to_json(nlohmann::json& j, const EvalDiscriminatorConfig& c);
void from_json(const nlohmann::json& j, EvalDiscriminatorConfig& c);

/// Realism classifier over PJD windows, trained separately from any model
/// under evaluation. In periodic mode a private autoencoder, fit on real
/// windows only, turns each window into phase features first.
class EvalDiscriminator {
 public:
  EvalDiscriminator(const SkeletonSpec& skeleton, EvalDiscriminatorConfig config, std::uint64_t seed);

  const EvalDiscriminatorConfig& config() const { return config_; }
  const std::vector<JointPair>& pairs() const { return pairs_; }
  nn::ParamStore& params() { return net_.params(); }
  const nn::ParamStore& params() const { return net_.params(); }
  /// Null unless periodic.
  interaction::PeriodicAutoencoder* pae() { return pae_.get(); }
  const interaction::PeriodicAutoencoder* pae() const { return pae_.get(); }
  double input_scale() const { return input_scale_; }

  /// Realism probability of each (N + 1)-frame world window.
  std::vector<double> score(const std::vector<MotionWindow>& windows) const;

  /// Trains real windows of `real` against `fakes` (windows from a held-out
  /// generator, may be empty) and two corruptions of real windows: frames in
  /// random order, and the second character taken from another time.
  /// Returns the last discriminator loss.
  double fit(const std::vector<MotionWindow>& real, const std::vector<MotionWindow>& fakes, std::mt19937_64& rng);

  void set_input_scale(double scale);

 private:
  nn::Tensor logits(const std::vector<MotionWindow>& windows) const;

  EvalDiscriminatorConfig config_;
  std::vector<JointPair> pairs_;
  std::unique_ptr<interaction::PeriodicAutoencoder> pae_;
  interaction::Discriminator net_;
  double input_scale_ = 1.0;
};

/// Random (N + 1)-frame window of a sequence.
MotionWindow random_window(const std::vector<MotionWindow>& sequences, int frames, std::mt19937_64& rng);
/// The window with its frames permuted at random (both characters alike).
MotionWindow temporally_shuffled(const MotionWindow& window, std::mt19937_64& rng);
/// The window with the second character replaced by the same character at a
/// different time of `source`; `frames` long.
MotionWindow misaligned(const MotionWindow& source, int start, int frames, std::mt19937_64& rng);

/// Frozen evaluation models: FID features and the interaction discriminator.
struct EvalAssets {
  SkeletonSpec skeleton;
  std::unique_ptr<FeatureExtractor> features;
  std::unique_ptr<EvalDiscriminator> discriminator;

  nn::Checkpoint checkpoint() const;
  static EvalAssets from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::string& path) const;
  static EvalAssets load(const std::string& path);
};

}  // namespace xsib::eval
