#include "xsib/service/session.hpp"

#include <chrono>
#include <nlohmann/json.hpp>
#include <sodium.h>

#include "xsib/core/container.hpp"
#include "xsib/core/errors.hpp"
#include "xsib/core/transform.hpp"
#include "xsib/model/space_ops.hpp"
#include "xsib/nn/ops.hpp"

namespace xsib::service {

void to_json(nlohmann::json& j, const RolloutConfig& c) {
  j = {{"use_refiner", c.use_refiner},
       {"refine_emit_only", c.refine_emit_only},
       {"foot_pin", c.foot_pin},
       {"deterministic", c.deterministic},
       {"blend", c.blend},
       {"blend_frames", c.blend_frames},
       {"foot_height_threshold", c.contact.height_threshold},
       {"foot_lock_speed", c.contact.lock_speed}};
}

void from_json(const nlohmann::json& j, RolloutConfig& c) {
  const RolloutConfig d;
  c.use_refiner = j.value("use_refiner", d.use_refiner);
  c.refine_emit_only = j.value("refine_emit_only", d.refine_emit_only);
  c.foot_pin = j.value("foot_pin", d.foot_pin);
  c.deterministic = j.value("deterministic", d.deterministic);
  c.blend = j.value("blend", d.blend);
  c.blend_frames = j.value("blend_frames", d.blend_frames);
  c.contact.height_threshold = j.value("foot_height_threshold", d.contact.height_threshold);
  c.contact.lock_speed = j.value("foot_lock_speed", d.contact.lock_speed);
}

std::string to_string(StepStatus s) {
  switch (s) {
    case StepStatus::Ok:
      return "ok";
    case StepStatus::Arrived:
      return "arrived";
    case StepStatus::Idle:
      return "idle";
    case StepStatus::Unreached:
      return "unreached";
    case StepStatus::Fault:
      return "fault";
  }
  return "unknown";
}

namespace {

std::string base64(const std::vector<std::uint8_t>& bytes) {
  if (sodium_init() < 0) throw Error("libsodium failed to initialize");
  const auto variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

Pose lerp_pose(const Pose& a, const Pose& b, double w) {
  Pose out = a;
  for (int j = 0; j < a.joint_count(); ++j) {
    out.positions[j] = (1 - w) * a.positions[j] + w * b.positions[j];
    out.forward[j] = (1 - w) * a.forward[j] + w * b.forward[j];
    out.up[j] = (1 - w) * a.up[j] + w * b.up[j];
  }
  out.orthonormalize();
  return out;
}

}  // namespace

std::string encode_frames(const MotionWindow& frames) { return base64(encode_f32(frames.data())); }

void to_json(nlohmann::json& j, const RolloutStep& s) {
  j = {{"index", s.index},
       {"status", to_string(s.status)},
       {"keypose_index", s.keypose_index},
       {"arrival", s.arrival},
       {"latency_ms", s.latency_ms},
       {"blended", s.blended},
       {"frame_count", s.frames.frames()},
       {"joints", s.frames.joints()},
       {"frames", encode_frames(s.frames)}};
  if (!s.message.empty()) j["message"] = s.message;
}

double arrival_distance(const MotionWindow& motion, int frame, int character, const KeyposeTarget& target) {
  const auto& pose = target.pose_pair[character];
  double total = 0.0;
  for (int j = 0; j < motion.joints(); ++j) total += (motion.position(frame, character, j) - pose.positions[j]).norm();
  return total / motion.joints();
}

Session::Session(std::string id, std::shared_ptr<const train::ModelBundle> model, const MotionWindow& initial,
                 std::uint64_t seed, RolloutConfig config)
    : id_(std::move(id)), model_(std::move(model)), config_(config), rng_(seed) {
  const int T = model_->generator.config().window;
  if (initial.frames() < T) throw ShapeError("session needs at least " + std::to_string(T) + " initial frames");
  if (initial.joints() != model_->skeleton().joint_count()) throw ConfigError("initial clip does not match the model");
  if (initial.space[0].kind != SpaceKind::World || initial.space[1].kind != SpaceKind::World) {
    throw ConfigError("initial clip must be in world space");
  }
  initial.require_finite("initial clip");
  if (config_.use_refiner) {
    model_->refiner.config().validate(model_->generator.config().stride);
  }
  if (config_.blend_frames < 1) throw ConfigError("blend_frames must be >= 1");
  window_ = initial.slice(initial.frames() - T, T);
  last_emitted_ = window_.slice(T - 1, 1);
}

void Session::set_keyposes(std::vector<KeyposeTarget> keyposes) {
  for (const auto& k : keyposes) {
    k.validate();
    for (const auto& p : k.pose_pair)
      if (p.joint_count() != model_->skeleton().joint_count()) throw ConfigError("keypose does not match the model");
  }
  std::lock_guard step(step_mutex_);
  std::lock_guard lock(state_mutex_);
  keyposes_ = std::move(keyposes);
  active_ = 0;
  segments_ = 0;
  pending_.clear();
  if (terminal_ == StepStatus::Unreached) terminal_ = StepStatus::Ok;
}

void Session::apply_edit(int index, const KeyposeEdit& edit) {
  auto& k = keyposes_[index];
  const auto same_pose = [](const Pose& a, const Pose& b) {
    return a.positions == b.positions && a.forward == b.forward && a.up == b.up;
  };
  if (edit.poses && !(same_pose((*edit.poses)[0], k.pose_pair[0]) && same_pose((*edit.poses)[1], k.pose_pair[1]))) {
    KeyposeTarget fresh = KeyposeTarget::from_poses(*edit.poses, model_->skeleton().root_joint(), k.arrival_threshold,
                                                    k.max_segments);
    for (int c = 0; c < 2; ++c) fresh.set_root(c, k.root_transform[c]);
    k = fresh;
  }
  for (int c = 0; c < 2; ++c) {
    const auto& r = edit.roots[c];
    const auto& cur = k.root_transform[c];
    if (r && (r->x != cur.x || r->z != cur.z || r->yaw != cur.yaw)) k.set_root(c, *r);
  }
  if (index == active_) {
    // A moved target gets a fresh segment budget.
    segments_ = 0;
    if (terminal_ == StepStatus::Unreached) terminal_ = StepStatus::Ok;
  }
}

bool Session::edit_keypose(int index, const KeyposeEdit& edit) {
  if (edit.poses) {
    for (const auto& p : *edit.poses)
      if (p.joint_count() != model_->skeleton().joint_count()) throw ConfigError("keypose does not match the model");
  }
  std::unique_lock step(step_mutex_, std::try_to_lock);
  std::lock_guard lock(state_mutex_);
  if (index < 0 || index >= static_cast<int>(keyposes_.size())) {
    throw RangeError("keypose index " + std::to_string(index) + " outside a queue of " +
                     std::to_string(keyposes_.size()));
  }
  if (step.owns_lock()) {
    apply_edit(index, edit);
    return true;
  }
  pending_.emplace_back(index, edit);
  return false;
}

void Session::apply_pending() {
  for (const auto& [index, edit] : pending_)
    if (index < static_cast<int>(keyposes_.size())) apply_edit(index, edit);
  pending_.clear();
}

RolloutStep Session::synthesize(const KeyposeTarget& target) {
  const auto& gen = model_->generator;
  const int T = gen.config().window, l = gen.config().stride, L = gen.config().latent_dim;
  nn::NoGradGuard guard;

  const MotionWindow kp = to_keypose_spaces(window_, target);
  const auto roots = model::packed_roots({target});
  std::vector<double> eps(2 * L, 0.0);
  if (!config_.deterministic) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& e : eps) e = n(rng_);
  }
  const auto out = gen.forward(model::pack_characters({kp}), model::packed_keypose_poses({target}), roots,
                               nn::Tensor({2, L}, eps));
  MotionWindow pred = model::unpack_characters(out.raw, 1, &kp)[0];
  const auto ortho = model::orthonormalized(pred.data());
  std::copy(ortho.begin(), ortho.end(), pred.data().begin());

  const MotionWindow fresh = pred.slice(T - l, l);
  MotionWindow emit = config_.use_refiner ? model_->refiner.refine(fresh) : fresh;
  MotionWindow fed = pred;
  if (config_.use_refiner && !config_.refine_emit_only) {
    std::copy(emit.data().begin(), emit.data().end(), fed.joint(T - l, 0, 0));
  }
  fed = keypose_spaces_to_world(fed, target);
  emit = keypose_spaces_to_world(emit, target);

  RolloutStep s;
  if (!fed.all_finite() || !emit.all_finite()) {
    s.status = StepStatus::Fault;
    s.message = "non-finite synthesis output; last good state kept";
    return s;
  }
  if (config_.foot_pin) {
    // The previous frame gives the pin its starting velocity.
    MotionWindow ctx = last_emitted_;
    ctx.append(emit);
    emit = foot_pin_postprocess(ctx, model_->skeleton(), config_.contact).slice(1, l);
  }
  for (int c = 0; c < 2; ++c) s.arrival[c] = arrival_distance(emit, l - 1, c, target);
  const bool arrived = s.arrival[0] < target.arrival_threshold && s.arrival[1] < target.arrival_threshold;
  if (arrived && config_.blend) {
    const int b = std::min(config_.blend_frames, l);
    for (int k = 0; k < b; ++k) {
      const int f = l - b + k;
      const double w = static_cast<double>(k + 1) / b;
      for (int c = 0; c < 2; ++c) emit.set_pose(f, c, lerp_pose(emit.pose(f, c), target.pose_pair[c], w));
    }
    for (int c = 0; c < 2; ++c) s.arrival[c] = arrival_distance(emit, l - 1, c, target);
    s.blended = true;
    std::copy(emit.data().begin(), emit.data().end(), fed.joint(T - l, 0, 0));
  }
  s.status = arrived ? StepStatus::Arrived : StepStatus::Ok;
  s.frames = emit;
  window_ = fed;
  last_emitted_ = emit.slice(l - 1, 1);
  return s;
}

RolloutStep Session::step() {
  std::lock_guard step(step_mutex_);
  const auto t0 = std::chrono::steady_clock::now();
  KeyposeTarget target;
  RolloutStep s;
  {
    std::lock_guard lock(state_mutex_);
    apply_pending();
    s.keypose_index = active_;
    if (terminal_ != StepStatus::Ok) {
      s.status = terminal_;
      s.message = "rollout stopped";
      return s;
    }
    if (active_ >= static_cast<int>(keyposes_.size())) {
      s.status = StepStatus::Idle;
      s.message = "no active keypose";
      return s;
    }
    target = keyposes_[active_];
    const int T = window_.frames();
    const double d0 = arrival_distance(window_, T - 1, 0, target), d1 = arrival_distance(window_, T - 1, 1, target);
    if (d0 < target.arrival_threshold && d1 < target.arrival_threshold) {
      // Already there: switch without emitting.
      s.status = StepStatus::Arrived;
      s.arrival = {d0, d1};
      ++active_;
      segments_ = 0;
      return s;
    }
  }

  // Synthesis runs outside the state lock so edits and reads never wait on it.
  RolloutStep out = synthesize(target);
  out.keypose_index = s.keypose_index;
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  std::lock_guard lock(state_mutex_);
  if (out.status == StepStatus::Fault) {
    terminal_ = StepStatus::Fault;
    apply_pending();
    return out;
  }
  ++segments_;
  if (out.status == StepStatus::Arrived) {
    ++active_;
    segments_ = 0;
  } else if (segments_ >= target.max_segments) {
    out.status = StepStatus::Unreached;
    out.message = "max_segments reached without arrival";
    terminal_ = StepStatus::Unreached;
  }
  out.index = static_cast<long long>(timeline_.size());
  timeline_.push_back(out);
  apply_pending();
  return out;
}

std::vector<RolloutStep> Session::timeline(long long from) const {
  std::lock_guard lock(state_mutex_);
  if (from < 0) from = 0;
  if (from >= static_cast<long long>(timeline_.size())) return {};
  return {timeline_.begin() + from, timeline_.end()};
}

MotionWindow Session::window() const {
  std::lock_guard lock(state_mutex_);
  return window_;
}

std::vector<KeyposeTarget> Session::keyposes() const {
  std::lock_guard lock(state_mutex_);
  return keyposes_;
}

int Session::active_keypose() const {
  std::lock_guard lock(state_mutex_);
  return active_;
}

bool Session::finished() const {
  std::lock_guard lock(state_mutex_);
  return terminal_ != StepStatus::Ok || active_ >= static_cast<int>(keyposes_.size());
}

OfflineResult run_offline(std::shared_ptr<const train::ModelBundle> model, const MotionWindow& input,
                          const std::vector<KeyposeTarget>& keyposes, std::uint64_t seed, RolloutConfig config) {
  OfflineResult r;
  r.motion = input;
  if (keyposes.empty()) return r;
  Session session("offline", std::move(model), input, seed, config);
  session.set_keyposes(keyposes);
  while (!session.finished()) {
    auto s = session.step();
    if (s.frames.frames() > 0) r.motion.append(s.frames);
    const bool stop = s.status == StepStatus::Fault || s.status == StepStatus::Idle;
    r.steps.push_back(std::move(s));
    if (stop) break;
  }
  return r;
}

}  // namespace xsib::service
