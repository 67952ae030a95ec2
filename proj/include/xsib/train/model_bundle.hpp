#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "xsib/interaction/pae.hpp"
#include "xsib/model/generator.hpp"
#include "xsib/nn/checkpoint.hpp"
#include "xsib/refiner/refiner.hpp"

namespace xsib::train {

struct ModelConfig {
  model::GeneratorConfig generator;
  refiner::RefinerConfig refiner;
  interaction::PaeConfig pae;
  interaction::DiscriminatorConfig discriminator;
  std::string pair_mode = "corresponding";  // or "all"
};
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Every network of the system on one skeleton. Not copyable: parameters are
/// graph nodes shared by reference.
class ModelBundle {
 public:
  ModelBundle(const SkeletonSpec& skeleton, ModelConfig config, std::uint64_t seed);
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;

  const SkeletonSpec& skeleton() const { return skeleton_; }
  const ModelConfig& config() const { return config_; }
  const std::vector<JointPair>& pairs() const { return pairs_; }

  model::Generator generator;
  refiner::MotionRefiner refiner;
  interaction::PeriodicAutoencoder pae;
  interaction::Discriminator discriminator;

  /// Sections "skeleton", "model_config", "params/{generator,refiner,pae,discriminator}".
  void save_into(nn::Checkpoint& ckpt) const;
  /// Restores parameters and the PAE input scale from a checkpoint.
  void load_from(const nn::Checkpoint& ckpt);
  /// Builds a bundle from the skeleton and configuration a checkpoint carries.
  static std::unique_ptr<ModelBundle> from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  SkeletonSpec skeleton_;
  ModelConfig config_;
  std::vector<JointPair> pairs_;
};

}  // namespace xsib::train
