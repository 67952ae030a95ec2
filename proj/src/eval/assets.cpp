#include "xsib/eval/assets.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "xsib/core/errors.hpp"
#include "xsib/core/transform.hpp"
#include "xsib/interaction/pjd.hpp"
#include "xsib/nn/ops.hpp"
#include "xsib/nn/optim.hpp"

namespace xsib::eval {

using nn::Tensor;

void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = {{"window", c.window}, {"stride", c.stride}, {"hidden", c.hidden}, {"latent", c.latent},
       {"steps", c.steps},   {"batch", c.batch},   {"learning_rate", c.learning_rate}};
}

void from_json(const nlohmann::json& j, FeatureConfig& c) {
  const FeatureConfig d;
  c.window = j.value("window", d.window);
  c.stride = j.value("stride", d.stride);
  c.hidden = j.value("hidden", d.hidden);
  c.latent = j.value("latent", d.latent);
  c.steps = j.value("steps", d.steps);
  c.batch = j.value("batch", d.batch);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
}

void to_json(nlohmann::json& j, const EvalDiscriminatorConfig& c) {
  j = {{"horizon", c.horizon}, {"window_stride", c.window_stride}, {"net", c.net},
       {"steps", c.steps},     {"batch", c.batch},                 {"learning_rate", c.learning_rate},
       {"periodic", c.periodic}, {"pae_phase_channels", c.pae_phase_channels}, {"pae_hidden", c.pae_hidden},
       {"pae_steps", c.pae_steps}};
}

void from_json(const nlohmann::json& j, EvalDiscriminatorConfig& c) {
  const EvalDiscriminatorConfig d;
  c.horizon = j.value("horizon", d.horizon);
  c.window_stride = j.value("window_stride", d.window_stride);
  c.net = j.contains("net") ? j.at("net").get<interaction::DiscriminatorConfig>() : d.net;
  c.steps = j.value("steps", d.steps);
  c.batch = j.value("batch", d.batch);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.periodic = j.value("periodic", d.periodic);
  c.pae_phase_channels = j.value("pae_phase_channels", d.pae_phase_channels);
  c.pae_hidden = j.value("pae_hidden", d.pae_hidden);
  c.pae_steps = j.value("pae_steps", d.pae_steps);
}

FeatureExtractor::FeatureExtractor(const SkeletonSpec& skeleton, FeatureConfig config, std::uint64_t seed)
    : config_(config), joints_(skeleton.joint_count()), root_joint_(skeleton.root_joint()) {
  if (config_.window < 1 || config_.stride < 1 || config_.hidden < 1 || config_.latent < 1) {
    throw ConfigError("bad feature extractor sizes");
  }
  std::mt19937_64 rng(seed);
  const int in = input_size();
  enc0_ = nn::Linear(params_, "fid.enc0", in, config_.hidden, rng);
  enc1_ = nn::Linear(params_, "fid.enc1", config_.hidden, config_.latent, rng);
  dec0_ = nn::Linear(params_, "fid.dec0", config_.latent, config_.hidden, rng);
  dec1_ = nn::Linear(params_, "fid.dec1", config_.hidden, in, rng);
  mean_.assign(in, 0.0);
  inv_std_.assign(in, 1.0);
}

int FeatureExtractor::input_size() const { return config_.window * 2 * joints_ * 3; }

std::vector<double> FeatureExtractor::clip_input(const MotionWindow& world, int start) const {
  if (world.joints() != joints_ || start < 0 || start + config_.window > world.frames()) {
    throw RangeError("feature clip outside the sequence");
  }
  const RigidTransform2D frame = root_transform_of(world.joint(start, 0, root_joint_));
  std::vector<double> out;
  out.reserve(input_size());
  for (int t = 0; t < config_.window; ++t)
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < joints_; ++j) {
        const Vec3 p = frame.inverse_point(world.position(start + t, c, j));
        out.insert(out.end(), {p.x(), p.y(), p.z()});
      }
  return out;
}

Tensor FeatureExtractor::normalize(const std::vector<double>& raw, int rows) const {
  const int in = input_size();
  std::vector<double> v(raw.size());
  for (int r = 0; r < rows; ++r)
    for (int k = 0; k < in; ++k) v[r * in + k] = (raw[r * in + k] - mean_[k]) * inv_std_[k];
  return Tensor({rows, in}, std::move(v));
}

Tensor FeatureExtractor::encode(const Tensor& x) const { return enc1_(nn::elu(enc0_(x))); }

Eigen::MatrixXd FeatureExtractor::features(const std::vector<MotionWindow>& sequences, int horizon) const {
  std::vector<double> raw;
  int rows = 0;
  for (const auto& s : sequences) {
    if (s.frames() < horizon) throw RangeError("FID: horizon exceeds a sequence");
    for (int start = 0; start + config_.window <= horizon; start += config_.stride) {
      const auto clip = clip_input(s, start);
      raw.insert(raw.end(), clip.begin(), clip.end());
      ++rows;
    }
  }
  if (rows == 0) throw RangeError("FID: horizon shorter than one feature clip");
  nn::NoGradGuard guard;
  const Tensor z = encode(normalize(raw, rows));
  Eigen::MatrixXd out(rows, config_.latent);
  for (int r = 0; r < rows; ++r)
    for (int k = 0; k < config_.latent; ++k) out(r, k) = z.values()[r * config_.latent + k];
  return out;
}

void FeatureExtractor::set_normalization(const std::vector<std::vector<double>>& stats) {
  const std::size_t in = input_size();
  if (stats.size() != 2 || stats[0].size() != in || stats[1].size() != in) {
    throw IntegrityError("eval/feature_norm", "normalization does not match the extractor");
  }
  mean_ = stats[0];
  inv_std_ = stats[1];
}

double FeatureExtractor::fit(const std::vector<MotionWindow>& train, std::mt19937_64& rng) {
  const int in = input_size();
  std::vector<std::vector<double>> clips;
  for (const auto& s : train)
    for (int start = 0; start + config_.window <= s.frames(); start += config_.stride)
      clips.push_back(clip_input(s, start));
  if (clips.size() < 2) throw SamplingError("not enough clips to fit the feature extractor");

  std::fill(mean_.begin(), mean_.end(), 0.0);
  std::vector<double> var(in, 0.0);
  for (const auto& c : clips)
    for (int k = 0; k < in; ++k) mean_[k] += c[k] / clips.size();
  for (const auto& c : clips)
    for (int k = 0; k < in; ++k) var[k] += (c[k] - mean_[k]) * (c[k] - mean_[k]) / clips.size();
  for (int k = 0; k < in; ++k) inv_std_[k] = 1.0 / std::max(std::sqrt(var[k]), 1e-3);

  nn::Adam opt(params_, {config_.learning_rate, 0.9, 0.999, 1e-8});
  std::uniform_int_distribution<std::size_t> pick(0, clips.size() - 1);
  double last = 0.0;
  for (int step = 0; step < config_.steps; ++step) {
    std::vector<double> raw;
    for (int b = 0; b < config_.batch; ++b) {
      const auto& c = clips[pick(rng)];
      raw.insert(raw.end(), c.begin(), c.end());
    }
    const Tensor x = normalize(raw, config_.batch);
    params_.zero_grad();
    const Tensor loss = nn::mse(dec1_(nn::elu(dec0_(encode(x)))), x);
    loss.backward();
    opt.step();
    last = loss.item();
  }
  params_.set_trainable(false);
  return last;
}

namespace {

std::unique_ptr<interaction::PeriodicAutoencoder> make_pae(const EvalDiscriminatorConfig& c, int pairs,
                                                           std::uint64_t seed) {
  if (!c.periodic) return nullptr;
  interaction::PaeConfig pc;
  pc.input_channels = pairs;
  pc.horizon = c.horizon;
  pc.phase_channels = c.pae_phase_channels;
  pc.hidden = c.pae_hidden;
  return std::make_unique<interaction::PeriodicAutoencoder>(pc, seed + 1);
}

}  // namespace

EvalDiscriminator::EvalDiscriminator(const SkeletonSpec& skeleton, EvalDiscriminatorConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      pairs_(SkeletonSpec::corresponding_pairs(skeleton.joint_count())),
      pae_(make_pae(config_, static_cast<int>(pairs_.size()), seed)),
      net_(config_.periodic ? config_.pae_phase_channels : static_cast<int>(pairs_.size()), config_.net, seed,
           "eval_disc") {
  if (config_.horizon < 2 || config_.window_stride < 1) throw ConfigError("bad eval discriminator window");
}

void EvalDiscriminator::set_input_scale(double scale) {
  input_scale_ = scale;
  if (pae_) pae_->mutable_config().input_scale = scale;
}

Tensor EvalDiscriminator::logits(const std::vector<MotionWindow>& windows) const {
  std::vector<interaction::PjdDynamics> d;
  for (const auto& w : windows) d.push_back(interaction::compute_pjd(w, pairs_, config_.horizon));
  const Tensor x = interaction::stack_pjd(d);
  if (pae_) return net_.logits(pae_->encode(x).h);
  return net_.logits(x * input_scale_);
}

std::vector<double> EvalDiscriminator::score(const std::vector<MotionWindow>& windows) const {
  if (windows.empty()) return {};
  nn::NoGradGuard guard;
  const Tensor s = nn::sigmoid(logits(windows));
  return {s.values().begin(), s.values().end()};
}

MotionWindow random_window(const std::vector<MotionWindow>& sequences, int frames, std::mt19937_64& rng) {
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < sequences.size(); ++i)
    if (sequences[i].frames() >= frames) ok.push_back(i);
  if (ok.empty()) throw SamplingError("no sequence holds a " + std::to_string(frames) + "-frame window");
  const auto& s = sequences[ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)]];
  return s.slice(std::uniform_int_distribution<int>(0, s.frames() - frames)(rng), frames);
}

MotionWindow temporally_shuffled(const MotionWindow& window, std::mt19937_64& rng) {
  std::vector<int> order(window.frames());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  MotionWindow out = window;
  for (int f = 0; f < window.frames(); ++f)
    for (int c = 0; c < 2; ++c) out.set_pose(f, c, window.pose(order[f], c));
  return out;
}

MotionWindow misaligned(const MotionWindow& source, int start, int frames, std::mt19937_64& rng) {
  const int last = source.frames() - frames;
  if (start < 0 || last < 0 || start > last) throw RangeError("misaligned window outside the sequence");
  // Any other start at least a third of a window away.
  const int gap = std::max(1, frames / 3);
  std::vector<int> options;
  for (int s = 0; s <= last; ++s)
    if (std::abs(s - start) >= gap) options.push_back(s);
  if (options.empty()) throw SamplingError("sequence too short for a misaligned window");
  const int other = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
  MotionWindow out = source.slice(start, frames);
  for (int f = 0; f < frames; ++f) out.set_pose(f, 1, source.pose(other + f, 1));
  return out;
}

double EvalDiscriminator::fit(const std::vector<MotionWindow>& real, const std::vector<MotionWindow>& fakes,
                              std::mt19937_64& rng) {
  const int F = config_.horizon + 1;
  {
    double sq = 0.0;
    std::size_t n = 0;
    for (int k = 0; k < 128; ++k) {
      const auto d = interaction::compute_pjd(random_window(real, F, rng), pairs_, config_.horizon);
      for (double v : d.offsets) sq += v * v;
      n += d.offsets.size();
    }
    const double rms = std::sqrt(sq / n);
    set_input_scale(rms > 1e-12 ? 1.0 / rms : 1.0);
  }
  if (pae_) {
    // Real windows only; the autoencoder never sees a negative.
    pae_->params().set_trainable(true);
    nn::Adam opt(pae_->params(), {config_.learning_rate, 0.9, 0.999, 1e-8});
    for (int step = 0; step < config_.pae_steps; ++step) {
      std::vector<interaction::PjdDynamics> d;
      for (int b = 0; b < config_.batch; ++b)
        d.push_back(interaction::compute_pjd(random_window(real, F, rng), pairs_, config_.horizon));
      pae_->params().zero_grad();
      const Tensor loss = pae_->reconstruction_loss(interaction::stack_pjd(d)) * (input_scale_ * input_scale_);
      loss.backward();
      opt.step();
    }
    pae_->params().set_trainable(false);
  }
  for (const auto& f : fakes)
    if (f.frames() != F) throw ShapeError("eval discriminator fakes must be " + std::to_string(F) + " frames");

  nn::Adam opt(net_.params(), {config_.learning_rate, 0.9, 0.999, 1e-8});
  std::uniform_int_distribution<int> kind(fakes.empty() ? 1 : 0, 2);
  double last = 0.0;
  for (int step = 0; step < config_.steps; ++step) {
    std::vector<MotionWindow> pos, neg;
    for (int b = 0; b < config_.batch; ++b) {
      pos.push_back(random_window(real, F, rng));
      switch (kind(rng)) {
        case 0:
          neg.push_back(fakes[std::uniform_int_distribution<std::size_t>(0, fakes.size() - 1)(rng)]);
          break;
        case 1:
          neg.push_back(temporally_shuffled(random_window(real, F, rng), rng));
          break;
        default: {
          const auto long_window = random_window(real, 3 * F, rng);
          neg.push_back(misaligned(long_window, std::uniform_int_distribution<int>(0, 2 * F)(rng), F, rng));
        }
      }
    }
    net_.params().zero_grad();
    const auto loss = interaction::loss_adversarial(logits(pos), logits(neg)).discriminator;
    loss.backward();
    opt.step();
    last = loss.item();
  }
  net_.params().set_trainable(false);
  return last;
}

nn::Checkpoint EvalAssets::checkpoint() const {
  if (!features || !discriminator) throw ConfigError("incomplete evaluation assets");
  nn::Checkpoint ckpt;
  const nlohmann::json cfg = {{"skeleton", skeleton},
                              {"features", features->config()},
                              {"discriminator", discriminator->config()},
                              {"discriminator_input_scale", discriminator->input_scale()}};
  ckpt.add("eval/config", nn::to_bytes(cfg.dump()));
  ckpt.add("eval/feature_norm", nn::encode_doubles(features->normalization()));
  ckpt.add("params/features", nn::encode_params(features->params()));
  ckpt.add("params/eval_discriminator", nn::encode_params(discriminator->params()));
  ckpt.manifest = nn::params_manifest("params/features", features->params()) +
                  nn::params_manifest("params/eval_discriminator", discriminator->params());
  if (const auto* pae = discriminator->pae()) {
    ckpt.add("params/eval_pae", nn::encode_params(pae->params()));
    ckpt.manifest += nn::params_manifest("params/eval_pae", pae->params());
  }
  return ckpt;
}

EvalAssets EvalAssets::from_checkpoint(const nn::Checkpoint& ckpt) {
  nlohmann::json cfg;
  EvalAssets a;
  try {
    cfg = nlohmann::json::parse(nn::to_text(ckpt.get("eval/config")));
    a.skeleton = cfg.at("skeleton").get<SkeletonSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("eval/config", e.what());
  }
  a.features = std::make_unique<FeatureExtractor>(a.skeleton, cfg.at("features").get<FeatureConfig>(), 0);
  a.features->set_normalization(nn::decode_doubles(ckpt.get("eval/feature_norm"), "eval/feature_norm"));
  nn::decode_params(ckpt.get("params/features"), a.features->params(), "params/features");
  a.features->params().set_trainable(false);
  a.discriminator =
      std::make_unique<EvalDiscriminator>(a.skeleton, cfg.at("discriminator").get<EvalDiscriminatorConfig>(), 0);
  a.discriminator->set_input_scale(cfg.at("discriminator_input_scale").get<double>());
  nn::decode_params(ckpt.get("params/eval_discriminator"), a.discriminator->params(), "params/eval_discriminator");
  a.discriminator->params().set_trainable(false);
  if (auto* pae = a.discriminator->pae()) {
    nn::decode_params(ckpt.get("params/eval_pae"), pae->params(), "params/eval_pae");
    pae->params().set_trainable(false);
  }
  return a;
}

void EvalAssets::save(const std::string& path) const { nn::write_checkpoint(path, checkpoint()); }

EvalAssets EvalAssets::load(const std::string& path) { return from_checkpoint(nn::read_checkpoint(path)); }

}  // namespace xsib::eval
