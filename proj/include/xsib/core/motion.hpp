#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xsib/core/skeleton.hpp"

namespace xsib {

enum class SpaceKind { World, Keypose, CounterpartRoot };

/// Coordinate space a character's frames are expressed in. `index` names the
/// keypose (for Keypose) or the reference character (for CounterpartRoot).
struct Space {
  SpaceKind kind = SpaceKind::World;
  int index = -1;

  friend bool operator==(const Space&, const Space&) = default;
};

std::string to_string(const Space& s);

/// A T-frame two-character clip stored as T×2×J×9 doubles, frame-major and
/// character-major within a frame.
class MotionWindow {
 public:
  MotionWindow() = default;
  MotionWindow(int frames, int joints, int start_frame = 0, double frame_rate = 30.0);

  int frames() const { return frames_; }
  int joints() const { return joints_; }
  std::size_t values_per_frame() const { return 2u * joints_ * kChannels; }

  double* joint(int frame, int character, int joint) {
    return data_.data() + offset(frame, character, joint);
  }
  const double* joint(int frame, int character, int joint) const {
    return data_.data() + offset(frame, character, joint);
  }
  Vec3 position(int frame, int character, int joint) const;
  void set_position(int frame, int character, int joint, const Vec3& p);

  Pose pose(int frame, int character) const;
  void set_pose(int frame, int character, const Pose& pose);

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  /// Frames [begin, begin + count) as a new window; start_frame is shifted.
  MotionWindow slice(int begin, int count) const;
  /// Appends all frames of `other` (same joint count).
  void append(const MotionWindow& other);

  bool all_finite() const;
  /// Throws DataIntegrityError naming the first non-finite value.
  void require_finite(const char* what) const;

  std::array<Space, 2> space{};
  int start_frame = 0;
  double frame_rate = 30.0;

 private:
  std::size_t offset(int frame, int character, int joint) const {
    return ((static_cast<std::size_t>(frame) * 2 + character) * joints_ + joint) * kChannels;
  }

  int frames_ = 0;
  int joints_ = 0;
  std::vector<double> data_;
};

/// Skeleton plus world-space sequences with free-form per-sequence metadata.
struct Dataset {
  SkeletonSpec skeleton;
  double frame_rate = 30.0;
  std::vector<MotionWindow> sequences;
  std::vector<nlohmann::json> meta;

  std::size_t total_frames() const;
  /// Checks skeleton, joint counts and finiteness; throws on failure.
  void validate() const;
};

/// Mean over bones and characters of the per-bone length variance across frames.
double bone_length_variance(const MotionWindow& motion, const SkeletonSpec& skeleton);

}  // namespace xsib
