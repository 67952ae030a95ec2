#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsib/core/errors.hpp"
#include "xsib/core/sampling.hpp"
#include "xsib/nn/optim.hpp"
#include "xsib/train/model_bundle.hpp"

namespace xsib::train {

struct TrainConfig {
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int epochs = 100;
  int steps_per_epoch = 50;
  int batch_size = 16;
  double lambda_mse = 1.0;
  double lambda_kl = 0.01;
  double lambda_adv = 0.1;      // 0 disables the discriminator
  double lambda_initial = 0.5;  // auxiliary loss on the stage-1 prediction
  double ss_floor = 0.1;
  double ss_decay_fraction = 0.5;  // share of training over which p decays
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  int rollout_steps = 3;  // P
  bool mirror = true;
  bool train_refiner = true;
  double refiner_noise = 0.0;  // std (m) of joint jitter added to refiner inputs
  double disc_lr = 0.0;        // discriminator learning rate; 0 uses learning_rate
  double disc_noise = 0.0;     // std of instance noise on the discriminator input h
  int pae_steps = 1500;
  double pae_lr = 1e-3;
  int pae_batch = 32;
  ModelConfig model;
  ClipSampling sampling;
  void validate() const;
};
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Probability of feeding ground truth at `epoch`: linear from 1 down to the
/// floor over the first ss_decay_fraction of training, then constant.
double scheduled_sampling_prob(int epoch, const TrainConfig& config);

struct StepLosses {
  double total = 0;      // everything the generator minimizes
  double inbetween = 0;  // lambda_mse·mse + lambda_kl·kl
  double mse = 0, kl = 0, initial = 0;
  double adv_value = 0;  // mean log D(real) + mean log(1 - D(fake))
  double adv_generator = 0, discriminator = 0, refine = 0;
  double ss_prob = 1.0;
  std::vector<double> teacher_forced;  // share of rows fed ground truth per rollout step
};
void to_json(nlohmann::json& j, const StepLosses& s);
void from_json(const nlohmann::json& j, StepLosses& s);

struct TrainState {
  int epoch = 0;
  long long step = 0;
  bool pae_trained = false;
  std::vector<StepLosses> history;
  std::mt19937_64 rng;
};

/// Thrown when a loss becomes non-finite; `diagnostics` is a JSON dump.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

/// Forward half of a training step. The tensors keep their graphs so the
/// update phases can backpropagate.
struct Rollout {
  StepLosses losses;
  nn::Tensor generator_loss;
  nn::Tensor h_real, h_fake;           // PAE latents of the real and generated windows
  std::vector<nn::Tensor> preds, truths;  // per rollout step, packed keypose space
};

class Trainer {
 public:
  /// `data` holds the training sequences in world space; mirroring is applied
  /// here when enabled.
  Trainer(TrainConfig config, const Dataset& data);

  const TrainConfig& config() const { return config_; }
  TrainConfig& mutable_config() { return config_; }
  ModelBundle& model() { return *model_; }
  const ModelBundle& model() const { return *model_; }
  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }
  const Dataset& data() const { return data_; }

  /// Fits the PJD input scale, trains the PAE on real windows and freezes it.
  /// Returns the final reconstruction loss.
  double pretrain_pae();

  /// Draws a batch with the state RNG and runs one rollout step.
  StepLosses train_step();
  /// P sequential predictions per clip with scheduled sampling, then
  /// separate generator, discriminator and refiner updates.
  StepLosses rollout_train_step(const std::vector<TrainingClip>& batch);

  /// The phases of rollout_train_step. Each update touches only its own
  /// network's parameters.
  Rollout rollout(const std::vector<TrainingClip>& batch);
  void update_generator(Rollout& r);
  void update_discriminator(Rollout& r);
  void update_refiner(Rollout& r);

  /// Runs until config.epochs, calling `on_epoch` with a JSON record after
  /// each epoch. Pretrains the PAE first if needed.
  void run(const std::function<void(const nlohmann::json&)>& on_epoch = {});

  /// Random real PJD windows [count, pairs, N] in world space.
  nn::Tensor sample_pjd_windows(int count);

  nn::Checkpoint checkpoint() const;
  void save(const std::string& path) const;
  /// Restores model, optimizers, RNG and history; `data` must be the same
  /// training set the run started with.
  static std::unique_ptr<Trainer> resume(const std::string& path, const Dataset& data);

  nn::Adam& generator_optimizer() { return gen_opt_; }
  nn::Adam& discriminator_optimizer() { return disc_opt_; }
  nn::Adam& refiner_optimizer() { return ref_opt_; }

 private:
  TrainConfig config_;
  Dataset data_;
  std::unique_ptr<ModelBundle> model_;
  TrainState state_;
  nn::Adam gen_opt_, disc_opt_, ref_opt_;
};

/// World-space frames [F - N - 1, F) of a rollout assembled from the step
/// predictions, the newest prediction winning where windows overlap; frames
/// before the first prediction come from `gt`. Tensors are packed [2B, ., J, 9]
/// in keypose space.
nn::Tensor assemble_rollout(const nn::Tensor& gt, const std::vector<nn::Tensor>& preds, int stride, int horizon);

}  // namespace xsib::train
