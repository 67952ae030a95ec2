#pragma once

#include <array>

#include "xsib/core/motion.hpp"

namespace xsib {

/// Ground-plane rigid transform: yaw about +y followed by an (x, z)
/// translation. Maps character-local coordinates (+x forward) to its parent
/// space.
struct RigidTransform2D {
  double x = 0.0;
  double z = 0.0;
  double yaw = 0.0;

  Vec3 apply_point(const Vec3& p) const;
  Vec3 apply_vector(const Vec3& v) const;
  Vec3 inverse_point(const Vec3& p) const;
  Vec3 inverse_vector(const Vec3& v) const;

  RigidTransform2D inverse() const;
  /// (a * b)(p) = a(b(p)).
  friend RigidTransform2D operator*(const RigidTransform2D& a, const RigidTransform2D& b);

  /// Ground projection of `root_position` with the yaw of `root_forward`.
  static RigidTransform2D from_root(const Vec3& root_position, const Vec3& root_forward);
};

/// Root transform of a joint block (9 channels).
RigidTransform2D root_transform_of(const double* root_block);
RigidTransform2D root_transform_of(const Pose& pose, int root_joint);

/// Applies `t` (or its inverse) to every frame of one character.
void transform_character(MotionWindow& window, int character, const RigidTransform2D& t, bool inverse);
Pose transform_pose(const Pose& pose, const RigidTransform2D& t, bool inverse);

/// A keypose pair plus the per-character root placement the user can edit.
struct KeyposeTarget {
  std::array<Pose, 2> pose_pair;  // world space
  std::array<RigidTransform2D, 2> root_transform;
  double arrival_threshold = 0.1;
  int max_segments = 60;

  void validate() const;

  /// Builds a target whose root transforms are derived from the poses.
  static KeyposeTarget from_poses(const std::array<Pose, 2>& poses, int root_joint, double threshold = 0.1,
                                  int max_segments = 60);

  /// Moves the keypose so that character `c`'s root sits at `root`. The pose is
  /// carried rigidly.
  void set_root(int character, const RigidTransform2D& root);

  /// The keypose of character `c` expressed in its own keypose space.
  Pose local_pose(int character) const;
};

/// Re-expresses one character of a world-space window relative to the
/// keypose root of that character. The other character is untouched.
MotionWindow to_keypose_space(const MotionWindow& window, const KeyposeTarget& target, int character);
/// Both characters, each in its own keypose space.
MotionWindow to_keypose_spaces(const MotionWindow& window, const KeyposeTarget& target);
/// Inverse of to_keypose_spaces.
MotionWindow keypose_spaces_to_world(const MotionWindow& window, const KeyposeTarget& target);

/// Character `character` re-expressed relative to the other character's
/// per-frame root (hip ground projection and facing yaw). The window must be
/// in world space; the output holds both characters, with the reference
/// character left in world space.
MotionWindow to_counterpart_space(const MotionWindow& world, int character, int root_joint);
/// Same, for a window whose characters sit in their keypose spaces.
MotionWindow to_counterpart_space(const MotionWindow& keypose_window, const KeyposeTarget& target, int character,
                                  int root_joint);

}  // namespace xsib
