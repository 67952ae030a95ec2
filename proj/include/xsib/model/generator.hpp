#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsib/core/transform.hpp"
#include "xsib/nn/params.hpp"

namespace xsib::model {

using nn::Tensor;

struct GeneratorConfig {
  int window = 20;  // T
  int stride = 10;  // l, frames the output window advances
  int dct_k = 20;   // retained temporal coefficients
  std::vector<int> conv_channels{64, 128};
  int conv_kernel = 3;
  int gcn_layers = 2;
  int gcn_hidden = 128;
  int latent_dim = 32;
  int film_hidden = 64;
  void validate() const;
};
void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

/// Encoder output for a packed batch.
struct Encoded {
  Tensor features;  // [N, J, h], the pre-decoder feature map
  Tensor base;      // [N, K, J, 9] coefficients of the shifted input the decoder refines
  Tensor initial;   // [N, T, J, 9] stage-1 prediction, keypose space
};

struct LatentSample {
  Tensor mu, logvar, epsilon, z;  // [N, latent]
};

struct FilmParams {
  Tensor gamma, beta;  // [N, 1, h], broadcast over joints
};

struct GeneratorOutput {
  Encoded encoded;
  Tensor relative;   // [N, T, J, 9] stage-1 prediction in the counterpart's root frame
  LatentSample latent;
  FilmParams film;
  Tensor modulated;  // [N, J, h]
  Tensor raw;        // [N, T, J, 9] decoded window before re-orthonormalization
};

/// Shared-weight in-betweening network. Rows of every packed tensor are
/// characters: row c·B + b is character c of sample b, in its own keypose space.
class Generator {
 public:
  Generator(const SkeletonSpec& skeleton, GeneratorConfig config, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  int joints() const { return joints_; }
  int root_joint() const { return root_joint_; }

  /// DCT -> temporal convs -> graph convs, plus the decoded stage-1 window.
  /// `observation` is [N, T, J, 9], `keypose` the local keypose poses [N, J, 9].
  Encoded encode_individual(const Tensor& observation, const Tensor& keypose) const;

  /// Projects the counterpart-space stage-1 prediction to (mu, logvar) and
  /// reparameterizes with `epsilon` [N, latent].
  LatentSample condition_cross_space(const Tensor& relative, const Tensor& epsilon) const;
  FilmParams film(const Tensor& z) const;

  /// features·gamma + beta, decoded and rendered by the inverse DCT.
  Tensor modulate_and_decode(const Encoded& encoded, const FilmParams& film, Tensor* modulated = nullptr) const;
  /// Decoder alone (shared by both stages).
  Tensor decode(const Tensor& features, const Tensor& base) const;

  /// Full forward pass. `roots` are the keypose root transforms of the rows.
  GeneratorOutput forward(const Tensor& observation, const Tensor& keypose, const std::vector<RigidTransform2D>& roots,
                          const Tensor& epsilon) const;

  /// Stage-1 prediction of each row expressed in the other character's
  /// per-frame root frame.
  Tensor counterpart_features(const Tensor& initial, const std::vector<RigidTransform2D>& roots) const;

  /// Zeroes the last FiLM layer so it emits gamma = 1, beta = 0.
  void film_identity_init();

  Tensor dct_matrix() const { return dct_; }
  Tensor idct_matrix() const { return idct_; }

 private:
  Tensor per_joint_coefficients(const Tensor& x) const;

  GeneratorConfig config_;
  int joints_ = 0;
  int root_joint_ = 0;
  nn::ParamStore params_;
  Tensor adjacency_, dct_, idct_;
  std::vector<nn::Conv1d> enc_conv_, dec_conv_;
  std::vector<nn::GraphConv> enc_gcn_, dec_gcn_;
  nn::Conv1d rel_conv_;
  nn::GraphConv rel_gcn_;
  nn::Linear rel_head_;
  nn::Linear film1_, film2_;
};

/// Re-normalizes forward and Gram-Schmidts up for every joint block.
std::vector<double> orthonormalized(std::span<const double> window);

}  // namespace xsib::model
