#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsib/core/foot.hpp"
#include "xsib/train/model_bundle.hpp"

namespace xsib::service {

struct RolloutConfig {
  bool use_refiner = true;
  bool refine_emit_only = false;  // refine emitted frames but feed raw ones back
  bool foot_pin = true;
  bool deterministic = false;     // epsilon = 0
  bool blend = false;             // ease the arriving step into the keypose
  int blend_frames = 5;
  FootContact contact;
};
void to_json(nlohmann::json& j, const RolloutConfig& c);
void from_json(const nlohmann::json& j, RolloutConfig& c);

enum class StepStatus { Ok, Arrived, Idle, Unreached, Fault };
std::string to_string(StepStatus s);

struct RolloutStep {
  long long index = -1;  // position in the session timeline, -1 when nothing was emitted
  StepStatus status = StepStatus::Idle;
  int keypose_index = -1;
  MotionWindow frames;                 // l frames, world space; empty unless emitted
  std::array<double, 2> arrival{0, 0};  // mean joint distance of the last frame to the keypose
  double latency_ms = 0.0;
  bool blended = false;
  std::string message;
};
/// Base64 of the little-endian f32 values (frames × 2 × J × 9).
std::string encode_frames(const MotionWindow& frames);
/// Frames travel as base64 little-endian f32 (frames × 2 × J × 9).
void to_json(nlohmann::json& j, const RolloutStep& s);

/// Mean over joints of the world distance between `frame` of `character` and
/// the target pose.
double arrival_distance(const MotionWindow& motion, int frame, int character, const KeyposeTarget& target);

/// Edit of one queued keypose; absent fields stay as they are.
struct KeyposeEdit {
  std::array<std::optional<RigidTransform2D>, 2> roots;
  std::optional<std::array<Pose, 2>> poses;
};

/// One interactive rollout: the current T-frame world window, a keypose queue
/// and its own RNG. Steps are serialized; edits made during a step are queued
/// and applied before the next one.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const train::ModelBundle> model, const MotionWindow& initial,
          std::uint64_t seed, RolloutConfig config = {});

  const std::string& id() const { return id_; }
  const RolloutConfig& config() const { return config_; }
  const train::ModelBundle& model() const { return *model_; }

  /// Replaces the queue; the first keypose becomes active.
  void set_keyposes(std::vector<KeyposeTarget> keyposes);
  /// Throws RangeError for an invalid index. Returns true when applied now,
  /// false when queued behind an in-flight step.
  bool edit_keypose(int index, const KeyposeEdit& edit);

  RolloutStep step();

  /// Steps emitted so far, from `from` on.
  std::vector<RolloutStep> timeline(long long from = 0) const;
  /// The current conditioning window (world space, T frames).
  MotionWindow window() const;
  std::vector<KeyposeTarget> keyposes() const;
  int active_keypose() const;
  /// True once the queue is exhausted, a keypose went unreached, or a fault occurred.
  bool finished() const;

 private:
  void apply_pending();
  void apply_edit(int index, const KeyposeEdit& edit);
  RolloutStep synthesize(const KeyposeTarget& target);

  std::string id_;
  std::shared_ptr<const train::ModelBundle> model_;
  RolloutConfig config_;
  std::mt19937_64 rng_;

  mutable std::mutex state_mutex_;  // everything below
  std::mutex step_mutex_;           // one step in flight
  MotionWindow window_;             // conditioning window
  MotionWindow last_emitted_;       // last emitted frame, for foot contact continuity
  std::vector<KeyposeTarget> keyposes_;
  int active_ = 0;
  int segments_ = 0;  // steps spent on the active keypose
  StepStatus terminal_ = StepStatus::Ok;
  std::vector<std::pair<int, KeyposeEdit>> pending_;
  std::vector<RolloutStep> timeline_;
};

struct OfflineResult {
  MotionWindow motion;  // the input followed by every emitted frame
  std::vector<RolloutStep> steps;
};

/// Batch rollout through a Session until the keypose list is done or a step
/// stops the rollout. An empty keypose list echoes the input.
OfflineResult run_offline(std::shared_ptr<const train::ModelBundle> model, const MotionWindow& input,
                          const std::vector<KeyposeTarget>& keyposes, std::uint64_t seed, RolloutConfig config = {});

}  // namespace xsib::service
