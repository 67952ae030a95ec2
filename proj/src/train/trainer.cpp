#include "xsib/train/trainer.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "xsib/core/augment.hpp"
#include "xsib/core/errors.hpp"
#include "xsib/interaction/pjd.hpp"
#include "xsib/model/losses.hpp"
#include "xsib/model/space_ops.hpp"
#include "xsib/nn/ops.hpp"

namespace xsib::train {

using namespace nn;
using model::pack_characters;

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !(pae_lr > 0)) throw ConfigError("learning rates must be > 0");
  if (!(adam_beta1 > 0 && adam_beta1 < 1 && adam_beta2 > 0 && adam_beta2 < 1)) throw ConfigError("Adam betas in (0,1)");
  if (epochs < 1 || steps_per_epoch < 1 || batch_size < 1) throw ConfigError("epochs, steps and batch must be >= 1");
  if (!(lambda_mse > 0) || !(lambda_kl > 0)) throw ConfigError("lambda_mse and lambda_kl must be > 0");
  if (lambda_adv < 0 || lambda_initial < 0) throw ConfigError("loss weights must be >= 0");
  if (!(ss_floor >= 0 && ss_floor <= 1)) throw ConfigError("ss_floor must lie in [0, 1]");
  if (!(ss_decay_fraction > 0 && ss_decay_fraction <= 1)) throw ConfigError("ss_decay_fraction must lie in (0, 1]");
  if (!(grad_clip > 0)) throw ConfigError("grad_clip must be > 0");
  if (rollout_steps < 1) throw ConfigError("rollout_steps must be >= 1");
  const auto& g = model.generator;
  const int needed = sampling.reference_frames + g.stride * (rollout_steps - 1) + g.stride;
  if (sampling.reference_frames != g.window || needed > sampling.clip_frames) {
    throw ConfigError("clip of " + std::to_string(sampling.clip_frames) + " frames cannot hold " +
                      std::to_string(rollout_steps) + " rollout steps");
  }
  if (model.pae.horizon + 1 > g.window + g.stride * rollout_steps) throw ConfigError("PJD horizon exceeds the clip");
  if (refiner_noise < 0) throw ConfigError("refiner_noise must be >= 0");
  if (disc_lr < 0 || disc_noise < 0) throw ConfigError("disc_lr and disc_noise must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"epochs", c.epochs},
       {"steps_per_epoch", c.steps_per_epoch},
       {"batch_size", c.batch_size},
       {"lambda_mse", c.lambda_mse},
       {"lambda_kl", c.lambda_kl},
       {"lambda_adv", c.lambda_adv},
       {"lambda_initial", c.lambda_initial},
       {"ss_floor", c.ss_floor},
       {"ss_decay_fraction", c.ss_decay_fraction},
       {"grad_clip", c.grad_clip},
       {"seed", c.seed},
       {"rollout_steps", c.rollout_steps},
       {"mirror", c.mirror},
       {"train_refiner", c.train_refiner},
       {"refiner_noise", c.refiner_noise},
       {"disc_lr", c.disc_lr},
       {"disc_noise", c.disc_noise},
       {"pae_steps", c.pae_steps},
       {"pae_lr", c.pae_lr},
       {"pae_batch", c.pae_batch},
       {"model", c.model},
       {"sampling",
        {{"clip_frames", c.sampling.clip_frames},
         {"reference_frames", c.sampling.reference_frames},
         {"key_offset_min", c.sampling.key_offset_min},
         {"key_offset_max", c.sampling.key_offset_max},
         {"arrival_threshold", c.sampling.arrival_threshold}}}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.epochs = j.value("epochs", d.epochs);
  c.steps_per_epoch = j.value("steps_per_epoch", d.steps_per_epoch);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.lambda_mse = j.value("lambda_mse", d.lambda_mse);
  c.lambda_kl = j.value("lambda_kl", d.lambda_kl);
  c.lambda_adv = j.value("lambda_adv", d.lambda_adv);
  c.lambda_initial = j.value("lambda_initial", d.lambda_initial);
  c.ss_floor = j.value("ss_floor", d.ss_floor);
  c.ss_decay_fraction = j.value("ss_decay_fraction", d.ss_decay_fraction);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.seed = j.value("seed", d.seed);
  c.rollout_steps = j.value("rollout_steps", d.rollout_steps);
  c.mirror = j.value("mirror", d.mirror);
  c.train_refiner = j.value("train_refiner", d.train_refiner);
  c.refiner_noise = j.value("refiner_noise", d.refiner_noise);
  c.disc_lr = j.value("disc_lr", d.disc_lr);
  c.disc_noise = j.value("disc_noise", d.disc_noise);
  c.pae_steps = j.value("pae_steps", d.pae_steps);
  c.pae_lr = j.value("pae_lr", d.pae_lr);
  c.pae_batch = j.value("pae_batch", d.pae_batch);
  c.model = j.contains("model") ? j.at("model").get<ModelConfig>() : ModelConfig{};
  c.sampling = ClipSampling{};
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    c.sampling.clip_frames = s.value("clip_frames", c.sampling.clip_frames);
    c.sampling.reference_frames = s.value("reference_frames", c.sampling.reference_frames);
    c.sampling.key_offset_min = s.value("key_offset_min", c.sampling.key_offset_min);
    c.sampling.key_offset_max = s.value("key_offset_max", c.sampling.key_offset_max);
    c.sampling.arrival_threshold = s.value("arrival_threshold", c.sampling.arrival_threshold);
  }
}

void to_json(nlohmann::json& j, const StepLosses& s) {
  j = {{"total", s.total},
       {"inbetween", s.inbetween},
       {"mse", s.mse},
       {"kl", s.kl},
       {"initial", s.initial},
       {"adv_value", s.adv_value},
       {"adv_generator", s.adv_generator},
       {"discriminator", s.discriminator},
       {"refine", s.refine},
       {"ss_prob", s.ss_prob},
       {"teacher_forced", s.teacher_forced}};
}

void from_json(const nlohmann::json& j, StepLosses& s) {
  s.total = j.at("total").get<double>();
  s.inbetween = j.at("inbetween").get<double>();
  s.mse = j.at("mse").get<double>();
  s.kl = j.at("kl").get<double>();
  s.initial = j.at("initial").get<double>();
  s.adv_value = j.at("adv_value").get<double>();
  s.adv_generator = j.at("adv_generator").get<double>();
  s.discriminator = j.at("discriminator").get<double>();
  s.refine = j.at("refine").get<double>();
  s.ss_prob = j.at("ss_prob").get<double>();
  s.teacher_forced = j.at("teacher_forced").get<std::vector<double>>();
}

double scheduled_sampling_prob(int epoch, const TrainConfig& c) {
  const double decay_epochs = c.ss_decay_fraction * c.epochs;
  if (epoch <= 0) return 1.0;
  if (epoch >= decay_epochs) return c.ss_floor;
  return std::max(c.ss_floor, 1.0 - (1.0 - c.ss_floor) * epoch / decay_epochs);
}

namespace {

AdamConfig adam_for(const TrainConfig& c, double lr) { return {lr, c.adam_beta1, c.adam_beta2, 1e-8}; }

Tensor normal_tensor(std::mt19937_64& rng, Shape shape, double std) {
  std::vector<double> v(numel(shape));
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& x : v) x = std * n(rng);
  return Tensor(std::move(shape), std::move(v));
}

// World-space PJD [B, pairs, F - 1] of packed keypose-space frames.
Tensor packed_pjd(const Tensor& frames, const model::YawFrames& roots, const std::vector<JointPair>& pairs) {
  const int B = frames.dim(0) / 2;
  const Tensor world = model::yaw_transform(frames, roots, false);
  return interaction::pjd_tensor(slice(world, 0, 0, B), slice(world, 0, B, 2 * B), pairs);
}

void require_finite(double v, const char* what, const StepLosses& s, long long step) {
  if (std::isfinite(v)) return;
  nlohmann::json diag = {{"step", step}, {"failed", what}, {"losses", s}};
  throw DivergenceError(std::string("non-finite ") + what + " loss at step " + std::to_string(step), diag.dump());
}

}  // namespace

Tensor assemble_rollout(const Tensor& gt, const std::vector<Tensor>& preds, int stride, int horizon) {
  const int F = gt.dim(1);
  const int begin = F - horizon - 1;
  std::vector<Tensor> parts;
  int f = begin;
  while (f < F) {
    // Newest step whose output window [stride (p + 1), stride (p + 1) + T) holds f.
    const int p = std::min(static_cast<int>(preds.size()) - 1, f / stride - 1);
    if (p < 0) {
      const int end = std::min(F, stride);
      parts.push_back(slice(gt, 1, f, end));
      f = end;
      continue;
    }
    const int start = stride * (p + 1);
    const int T = preds[p].dim(1);
    const int end = p + 1 < static_cast<int>(preds.size()) ? std::min(start + stride, F) : std::min(start + T, F);
    if (f >= start + T) throw ShapeError("rollout does not cover frame " + std::to_string(f));
    parts.push_back(slice(preds[p], 1, f - start, end - start));
    f = end;
  }
  return concat(parts, 1);
}

Trainer::Trainer(TrainConfig config, const Dataset& data) : config_(std::move(config)) {
  config_.validate();
  data.validate();
  data_ = config_.mirror ? with_mirrored(data) : data;
  model_ = std::make_unique<ModelBundle>(data_.skeleton, config_.model, config_.seed);
  state_.rng.seed(config_.seed);
  gen_opt_ = Adam(model_->generator.params(), adam_for(config_, config_.learning_rate));
  disc_opt_ = Adam(model_->discriminator.params(),
                   adam_for(config_, config_.disc_lr > 0 ? config_.disc_lr : config_.learning_rate));
  ref_opt_ = Adam(model_->refiner.params(), adam_for(config_, config_.learning_rate));
}

Tensor Trainer::sample_pjd_windows(int count) {
  const int N = config_.model.pae.horizon;
  std::vector<interaction::PjdDynamics> out;
  std::vector<int> eligible;
  for (int i = 0; i < static_cast<int>(data_.sequences.size()); ++i)
    if (data_.sequences[i].frames() > N + 1) eligible.push_back(i);
  if (eligible.empty()) throw SamplingError("no sequence holds a PJD window");
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  for (int k = 0; k < count; ++k) {
    const auto& seq = data_.sequences[eligible[pick(state_.rng)]];
    std::uniform_int_distribution<int> start(0, seq.frames() - N - 1);
    out.push_back(interaction::compute_pjd(seq, model_->pairs(), N, start(state_.rng)));
  }
  return interaction::stack_pjd(out);
}

double Trainer::pretrain_pae() {
  auto& pae = model_->pae;
  pae.params().set_trainable(true);
  {
    const Tensor sample = sample_pjd_windows(256);
    double sq = 0;
    for (double v : sample.values()) sq += v * v;
    const double rms = std::sqrt(sq / sample.size());
    pae.mutable_config().input_scale = rms > 1e-9 ? 1.0 / rms : 1.0;
  }
  Adam opt(pae.params(), adam_for(config_, config_.pae_lr));
  double last = 0;
  for (int s = 0; s < config_.pae_steps; ++s) {
    const Tensor batch = sample_pjd_windows(config_.pae_batch);
    pae.params().zero_grad();
    const Tensor loss = pae.reconstruction_loss(batch) * (pae.config().input_scale * pae.config().input_scale);
    loss.backward();
    clip_grad_norm(pae.params(), config_.grad_clip);
    opt.step();
    last = loss.item();
  }
  pae.params().set_trainable(false);
  state_.pae_trained = true;
  return last;
}

StepLosses Trainer::train_step() {
  std::vector<TrainingClip> batch;
  for (int b = 0; b < config_.batch_size; ++b) {
    batch.push_back(sample_training_clip(data_, state_.rng, {}, config_.sampling));
  }
  return rollout_train_step(batch);
}

Rollout Trainer::rollout(const std::vector<TrainingClip>& batch) {
  const auto& gen = model_->generator;
  model_->pae.params().set_trainable(false);
  const auto& gc = gen.config();
  const int B = static_cast<int>(batch.size()), T = gc.window, l = gc.stride, P = config_.rollout_steps;
  if (B < 1) throw ShapeError("empty training batch");

  std::vector<MotionWindow> clips;
  std::vector<KeyposeTarget> targets;
  for (const auto& c : batch) {
    clips.push_back(c.clip);
    targets.push_back(c.target);
  }
  const Tensor gt = pack_characters(clips);
  const Tensor keypose = model::packed_keypose_poses(targets);
  const auto roots = model::packed_roots(targets);

  Rollout r;
  StepLosses& out = r.losses;
  out.ss_prob = scheduled_sampling_prob(state_.epoch, config_);
  std::bernoulli_distribution teacher(out.ss_prob);

  std::vector<Tensor> initials;
  Tensor kl_sum, prev;
  for (int p = 0; p < P; ++p) {
    const Tensor window = slice(gt, 1, l * p, l * p + T);
    Tensor input = window;
    if (p == 0) {
      out.teacher_forced.push_back(1.0);
    } else {
      // One draw per sample, shared by its two characters.
      std::vector<double> mask(2 * B);
      int forced = 0;
      for (int b = 0; b < B; ++b) {
        const double m = teacher(state_.rng) ? 1.0 : 0.0;
        mask[b] = mask[B + b] = m;
        forced += static_cast<int>(m);
      }
      out.teacher_forced.push_back(static_cast<double>(forced) / B);
      const Tensor m({2 * B, 1, 1, 1}, mask);
      input = window * m + prev * (Tensor::full({2 * B, 1, 1, 1}, 1.0) - m);
    }
    const Tensor eps = normal_tensor(state_.rng, {2 * B, gc.latent_dim}, 1.0);
    const auto o = gen.forward(input, keypose, roots, eps);
    r.preds.push_back(o.raw);
    initials.push_back(o.encoded.initial);
    r.truths.push_back(slice(gt, 1, l * (p + 1), l * (p + 1) + T));
    const Tensor kl = model::loss_kl(o.latent.mu, o.latent.logvar);
    kl_sum = p == 0 ? kl : kl_sum + kl;
    prev = o.raw;
  }
  const Tensor l_mse = model::loss_mse(r.preds, r.truths);
  const Tensor l_init = model::loss_mse(initials, r.truths);
  const Tensor l_kl = kl_sum * (1.0 / P);
  const Tensor inbetween = model::loss_inbetween(l_mse, l_kl, {config_.lambda_mse, config_.lambda_kl});
  Tensor total = inbetween + l_init * config_.lambda_initial;

  if (config_.lambda_adv > 0) {
    // The window ends with the last predicted frame.
    const int N = config_.model.pae.horizon, F = T + l * P;
    const auto frames = model::yaw_frames(roots);
    const Tensor fake_frames = assemble_rollout(slice(gt, 1, 0, F), r.preds, l, N);
    {
      NoGradGuard guard;
      r.h_real = model_->pae.encode(packed_pjd(slice(gt, 1, F - N - 1, F), frames, model_->pairs())).h;
    }
    r.h_fake = model_->pae.encode(packed_pjd(fake_frames, frames, model_->pairs())).h;
    if (config_.disc_noise > 0) {
      r.h_real = r.h_real + normal_tensor(state_.rng, r.h_real.shape(), config_.disc_noise);
      r.h_fake = r.h_fake + normal_tensor(state_.rng, r.h_fake.shape(), config_.disc_noise);
    }
    const auto adv = interaction::loss_adversarial(model_->discriminator.logits(r.h_real),
                                                   model_->discriminator.logits(r.h_fake));
    total = total + adv.generator * config_.lambda_adv;
    out.adv_generator = adv.generator.item();
    out.adv_value = adv.value.item();
  }

  out.mse = l_mse.item();
  out.kl = l_kl.item();
  out.initial = l_init.item();
  out.inbetween = inbetween.item();
  out.total = total.item();
  r.generator_loss = total;
  return r;
}

void Trainer::update_generator(Rollout& r) {
  require_finite(r.losses.total, "generator", r.losses, state_.step);
  auto& params = model_->generator.params();
  params.zero_grad();
  r.generator_loss.backward();
  clip_grad_norm(params, config_.grad_clip);
  gen_opt_.step();
}

void Trainer::update_discriminator(Rollout& r) {
  if (!r.h_fake.defined()) return;
  auto& disc = model_->discriminator;
  // Also clears what the generator backward left in the discriminator.
  disc.params().zero_grad();
  const auto adv = interaction::loss_adversarial(disc.logits(r.h_real), disc.logits(r.h_fake.detach()));
  r.losses.discriminator = adv.discriminator.item();
  require_finite(r.losses.discriminator, "discriminator", r.losses, state_.step);
  adv.discriminator.backward();
  clip_grad_norm(disc.params(), config_.grad_clip);
  disc_opt_.step();
}

void Trainer::update_refiner(Rollout& r) {
  if (!config_.train_refiner) return;
  auto& ref = model_->refiner;
  const int T = model_->generator.config().window, l = model_->generator.config().stride;
  const int S = ref.config().segment_length;
  std::vector<Tensor> refined, seg_truth;
  for (std::size_t p = 0; p < r.preds.size(); ++p) {
    // The newly synthesized frames, detached so nothing flows into the generator.
    const Tensor fresh = slice(r.preds[p], 1, T - l, T).detach();
    const Tensor truth = slice(r.truths[p], 1, T - l, T);
    for (int s = 0; s < l; s += S) {
      Tensor in = slice(fresh, 1, s, s + S);
      if (config_.refiner_noise > 0) in = in + normal_tensor(state_.rng, in.shape(), config_.refiner_noise);
      refined.push_back(ref.forward(in));
      seg_truth.push_back(slice(truth, 1, s, s + S));
    }
  }
  const Tensor loss = refiner::loss_refine(refined, seg_truth);
  r.losses.refine = loss.item();
  require_finite(r.losses.refine, "refiner", r.losses, state_.step);
  ref.params().zero_grad();
  loss.backward();
  clip_grad_norm(ref.params(), config_.grad_clip);
  ref_opt_.step();
}

StepLosses Trainer::rollout_train_step(const std::vector<TrainingClip>& batch) {
  Rollout r = rollout(batch);
  update_generator(r);
  update_discriminator(r);
  update_refiner(r);
  ++state_.step;
  state_.epoch = static_cast<int>(state_.step / config_.steps_per_epoch);
  state_.history.push_back(r.losses);
  return r.losses;
}

void Trainer::run(const std::function<void(const nlohmann::json&)>& on_epoch) {
  if (!state_.pae_trained) {
    const double loss = pretrain_pae();
    if (on_epoch) on_epoch({{"event", "pae_pretrained"}, {"reconstruction", loss}});
  }
  while (state_.epoch < config_.epochs) {
    const int epoch = state_.epoch;
    StepLosses mean;
    int n = 0;
    while (state_.epoch == epoch) {
      const auto s = train_step();
      mean.total += s.total;
      mean.inbetween += s.inbetween;
      mean.mse += s.mse;
      mean.kl += s.kl;
      mean.initial += s.initial;
      mean.adv_value += s.adv_value;
      mean.adv_generator += s.adv_generator;
      mean.discriminator += s.discriminator;
      mean.refine += s.refine;
      mean.ss_prob = s.ss_prob;
      ++n;
    }
    if (on_epoch) {
      nlohmann::json rec = {{"event", "epoch"}, {"epoch", epoch}, {"step", state_.step}};
      for (auto [k, v] : std::initializer_list<std::pair<const char*, double>>{{"total", mean.total},
                                                                            {"inbetween", mean.inbetween},
                                                                            {"mse", mean.mse},
                                                                            {"kl", mean.kl},
                                                                            {"initial", mean.initial},
                                                                            {"adv_value", mean.adv_value},
                                                                            {"adv_generator", mean.adv_generator},
                                                                            {"discriminator", mean.discriminator},
                                                                            {"refine", mean.refine}}) {
        rec[k] = v / n;
      }
      rec["ss_prob"] = mean.ss_prob;
      on_epoch(rec);
    }
  }
}

nn::Checkpoint Trainer::checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.add("train_config", to_bytes(nlohmann::json(config_).dump()));
  model_->save_into(ckpt);
  std::ostringstream rng;
  rng << state_.rng;
  nlohmann::json st = {{"epoch", state_.epoch},
                       {"step", state_.step},
                       {"pae_trained", state_.pae_trained},
                       {"rng", rng.str()},
                       {"history", state_.history},
                       {"optimizer_steps", {gen_opt_.steps(), disc_opt_.steps(), ref_opt_.steps()}}};
  ckpt.add("state", to_bytes(st.dump()));
  ckpt.add("adam/generator/m", encode_doubles(gen_opt_.first_moments()));
  ckpt.add("adam/generator/v", encode_doubles(gen_opt_.second_moments()));
  ckpt.add("adam/discriminator/m", encode_doubles(disc_opt_.first_moments()));
  ckpt.add("adam/discriminator/v", encode_doubles(disc_opt_.second_moments()));
  ckpt.add("adam/refiner/m", encode_doubles(ref_opt_.first_moments()));
  ckpt.add("adam/refiner/v", encode_doubles(ref_opt_.second_moments()));
  return ckpt;
}

void Trainer::save(const std::string& path) const { write_checkpoint(path, checkpoint()); }

namespace {

void restore_moments(std::vector<std::vector<double>>& dst, const nn::Checkpoint& ckpt, const std::string& name) {
  auto src = decode_doubles(ckpt.get(name), name);
  if (src.size() != dst.size()) throw IntegrityError(name, "optimizer layout differs from the model");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].size() != dst[i].size()) throw IntegrityError(name, "optimizer layout differs from the model");
  }
  dst = std::move(src);
}

}  // namespace

std::unique_ptr<Trainer> Trainer::resume(const std::string& path, const Dataset& data) {
  const auto ckpt = read_checkpoint(path);
  TrainConfig cfg;
  nlohmann::json st;
  try {
    cfg = nlohmann::json::parse(to_text(ckpt.get("train_config"))).get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("train_config", e.what());
  }
  try {
    st = nlohmann::json::parse(to_text(ckpt.get("state")));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("state", e.what());
  }
  auto t = std::make_unique<Trainer>(cfg, data);
  t->model_->load_from(ckpt);
  try {
    t->state_.epoch = st.at("epoch").get<int>();
    t->state_.step = st.at("step").get<long long>();
    t->state_.pae_trained = st.at("pae_trained").get<bool>();
    t->state_.history = st.at("history").get<std::vector<StepLosses>>();
    std::istringstream rng(st.at("rng").get<std::string>());
    rng >> t->state_.rng;
    const auto steps = st.at("optimizer_steps").get<std::vector<long long>>();
    t->gen_opt_.set_steps(steps.at(0));
    t->disc_opt_.set_steps(steps.at(1));
    t->ref_opt_.set_steps(steps.at(2));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("state", e.what());
  }
  restore_moments(t->gen_opt_.first_moments(), ckpt, "adam/generator/m");
  restore_moments(t->gen_opt_.second_moments(), ckpt, "adam/generator/v");
  restore_moments(t->disc_opt_.first_moments(), ckpt, "adam/discriminator/m");
  restore_moments(t->disc_opt_.second_moments(), ckpt, "adam/discriminator/v");
  restore_moments(t->ref_opt_.first_moments(), ckpt, "adam/refiner/m");
  restore_moments(t->ref_opt_.second_moments(), ckpt, "adam/refiner/v");
  if (t->state_.pae_trained) t->model_->pae.params().set_trainable(false);
  return t;
}

}  // namespace xsib::train
