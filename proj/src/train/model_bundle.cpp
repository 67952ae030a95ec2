#include "xsib/train/model_bundle.hpp"

#include <nlohmann/json.hpp>

#include "xsib/core/errors.hpp"

namespace xsib::train {

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"generator", c.generator},
       {"refiner", c.refiner},
       {"pae", c.pae},
       {"discriminator", c.discriminator},
       {"pair_mode", c.pair_mode}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  if (j.contains("generator")) c.generator = j.at("generator").get<model::GeneratorConfig>();
  if (j.contains("refiner")) c.refiner = j.at("refiner").get<refiner::RefinerConfig>();
  if (j.contains("pae")) c.pae = j.at("pae").get<interaction::PaeConfig>();
  if (j.contains("discriminator")) c.discriminator = j.at("discriminator").get<interaction::DiscriminatorConfig>();
  c.pair_mode = j.value("pair_mode", c.pair_mode);
}

namespace {

std::vector<JointPair> resolve_pairs(const SkeletonSpec& s, const std::string& mode) {
  if (mode == "corresponding") return s.joint_pair_map.empty() ? SkeletonSpec::corresponding_pairs(s.joint_count()) : s.joint_pair_map;
  if (mode == "all") return SkeletonSpec::all_pairs(s.joint_count());
  throw ConfigError("unknown pair_mode " + mode);
}

interaction::PaeConfig pae_for(interaction::PaeConfig c, std::size_t pairs) {
  c.input_channels = static_cast<int>(pairs);
  return c;
}

}  // namespace

ModelBundle::ModelBundle(const SkeletonSpec& skeleton, ModelConfig config, std::uint64_t seed)
    : generator(skeleton, config.generator, seed),
      refiner(skeleton, config.refiner, seed + 1),
      pae(pae_for(config.pae, resolve_pairs(skeleton, config.pair_mode).size()), seed + 2),
      discriminator(config.pae.phase_channels, config.discriminator, seed + 3),
      skeleton_(skeleton),
      config_(std::move(config)),
      pairs_(resolve_pairs(skeleton, config_.pair_mode)) {
  config_.refiner.validate(config_.generator.stride);
  config_.pae.input_channels = static_cast<int>(pairs_.size());
}

void ModelBundle::save_into(nn::Checkpoint& ckpt) const {
  ckpt.add("skeleton", nn::to_bytes(nlohmann::json(skeleton_).dump()));
  nlohmann::json cfg = config_;
  cfg["pae"]["input_scale"] = pae.config().input_scale;
  ckpt.add("model_config", nn::to_bytes(cfg.dump()));
  ckpt.add("params/generator", nn::encode_params(generator.params()));
  ckpt.add("params/refiner", nn::encode_params(refiner.params()));
  ckpt.add("params/pae", nn::encode_params(pae.params()));
  ckpt.add("params/discriminator", nn::encode_params(discriminator.params()));
  ckpt.manifest += nn::params_manifest("params/generator", generator.params());
  ckpt.manifest += nn::params_manifest("params/refiner", refiner.params());
  ckpt.manifest += nn::params_manifest("params/pae", pae.params());
  ckpt.manifest += nn::params_manifest("params/discriminator", discriminator.params());
}

void ModelBundle::load_from(const nn::Checkpoint& ckpt) {
  nn::decode_params(ckpt.get("params/generator"), generator.params(), "params/generator");
  nn::decode_params(ckpt.get("params/refiner"), refiner.params(), "params/refiner");
  nn::decode_params(ckpt.get("params/pae"), pae.params(), "params/pae");
  nn::decode_params(ckpt.get("params/discriminator"), discriminator.params(), "params/discriminator");
  try {
    const auto cfg = nlohmann::json::parse(nn::to_text(ckpt.get("model_config")));
    pae.mutable_config().input_scale = cfg.at("pae").value("input_scale", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("model_config", e.what());
  }
}

std::unique_ptr<ModelBundle> ModelBundle::from_checkpoint(const nn::Checkpoint& ckpt) {
  SkeletonSpec skeleton;
  ModelConfig config;
  try {
    skeleton = nlohmann::json::parse(nn::to_text(ckpt.get("skeleton"))).get<SkeletonSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("skeleton", e.what());
  }
  try {
    config = nlohmann::json::parse(nn::to_text(ckpt.get("model_config"))).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("model_config", e.what());
  }
  auto bundle = std::make_unique<ModelBundle>(skeleton, config, 0);
  bundle->load_from(ckpt);
  return bundle;
}

}  // namespace xsib::train
