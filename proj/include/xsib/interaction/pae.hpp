#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsib/interaction/pjd.hpp"
#include "xsib/nn/params.hpp"

namespace xsib::interaction {

struct PaeConfig {
  int input_channels = 17;  // PJD pairs
  int horizon = 30;         // N
  int phase_channels = 15;  // C_phi
  int hidden = 32;
  int kernel = 3;
  double input_scale = 1.0;  // multiplies PJD offsets before encoding
  void validate() const;
};
void to_json(nlohmann::json& j, const PaeConfig& c);
void from_json(const nlohmann::json& j, PaeConfig& c);

/// Per-channel sinusoid parameters of one window.
struct PhaseParams {
  std::vector<double> amplitude, frequency, bias, phase;  // C_phi each; frequency in cycles per window
  /// Channel with the largest amplitude.
  int dominant_channel() const;
};

/// Graph tensors of an encoding; every field is [B, C_phi] except latent and
/// h, which are [B, C_phi, N].
struct PhaseTensors {
  Tensor latent, amplitude, frequency, bias, phase, h;
};

/// Conv encoder to C_phi latent curves, a DFT for frequency / amplitude /
/// bias, a per-channel linear layer for phase, and a conv decoder from the
/// sinusoid reconstruction h back to the PJD signal.
class PeriodicAutoencoder {
 public:
  PeriodicAutoencoder(PaeConfig config, std::uint64_t seed);

  const PaeConfig& config() const { return config_; }
  PaeConfig& mutable_config() { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// dynamics [B, pairs, N] in PJD units.
  PhaseTensors encode(const Tensor& dynamics) const;
  /// h [B, C_phi, N] -> PJD units.
  Tensor decode(const Tensor& h) const;
  /// Mean squared error of decode(encode(x).h) against x, in PJD units.
  Tensor reconstruction_loss(const Tensor& dynamics) const;

  PhaseParams encode_params(const PjdDynamics& dynamics) const;

  /// Frequency, amplitude and DC bias of latent curves [B, C, N], as used by
  /// encode. Exposed for testing the spectral stage in isolation.
  PhaseTensors spectral(const Tensor& latent) const;

 private:
  PaeConfig config_;
  nn::ParamStore params_;
  nn::Conv1d enc0_, enc1_, dec0_, dec1_;
  Tensor phase_w_, phase_b_;   // [C, N, 2], [C, 2]
  Tensor cos_, sin_, bins_, time_;
};

struct DiscriminatorConfig {
  std::vector<int> widths{32, 32, 32};
  int kernel = 3;
};
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

/// Temporal convs over h, mean over time, linear head to one logit per window.
class Discriminator {
 public:
  Discriminator(int in_channels, DiscriminatorConfig config, std::uint64_t seed, const std::string& prefix = "disc");
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const DiscriminatorConfig& config() const { return config_; }

  /// h [B, C, N] -> logits [B].
  Tensor logits(const Tensor& h) const;
  /// sigmoid(logits), the realism probability.
  Tensor score(const Tensor& h) const;

 private:
  DiscriminatorConfig config_;
  nn::ParamStore params_;
  std::vector<nn::Conv1d> convs_;
  nn::Linear head_;
};

struct AdversarialLoss {
  Tensor value;          // mean log D(real) + mean log(1 - D(fake))
  Tensor discriminator;  // -value, minimized by the discriminator
  Tensor generator;      // mean -log D(fake), the non-saturating generator term
};

AdversarialLoss loss_adversarial(const Tensor& real_logits, const Tensor& fake_logits);

/// Area under the ROC curve with ties counted as one half.
double roc_auc(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores);

}  // namespace xsib::interaction
