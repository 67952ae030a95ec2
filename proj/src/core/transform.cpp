#include "xsib/core/transform.hpp"

#include <cmath>

#include "xsib/core/errors.hpp"

namespace xsib {

Vec3 RigidTransform2D::apply_vector(const Vec3& v) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return Vec3(c * v.x() + s * v.z(), v.y(), -s * v.x() + c * v.z());
}

Vec3 RigidTransform2D::apply_point(const Vec3& p) const {
  Vec3 r = apply_vector(p);
  r.x() += x;
  r.z() += z;
  return r;
}

Vec3 RigidTransform2D::inverse_vector(const Vec3& v) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return Vec3(c * v.x() - s * v.z(), v.y(), s * v.x() + c * v.z());
}

Vec3 RigidTransform2D::inverse_point(const Vec3& p) const {
  return inverse_vector(Vec3(p.x() - x, p.y(), p.z() - z));
}

RigidTransform2D RigidTransform2D::inverse() const {
  const Vec3 t = inverse_vector(Vec3(-x, 0.0, -z));
  return {t.x(), t.z(), -yaw};
}

RigidTransform2D operator*(const RigidTransform2D& a, const RigidTransform2D& b) {
  const Vec3 t = a.apply_point(Vec3(b.x, 0.0, b.z));
  return {t.x(), t.z(), a.yaw + b.yaw};
}

RigidTransform2D RigidTransform2D::from_root(const Vec3& root_position, const Vec3& root_forward) {
  // Local +x maps to (cos, 0, -sin).
  const double yaw = (root_forward.x() == 0.0 && root_forward.z() == 0.0)
                         ? 0.0
                         : std::atan2(-root_forward.z(), root_forward.x());
  return {root_position.x(), root_position.z(), yaw};
}

RigidTransform2D root_transform_of(const double* b) {
  return RigidTransform2D::from_root(Vec3(b[0], b[1], b[2]), Vec3(b[3], b[4], b[5]));
}

RigidTransform2D root_transform_of(const Pose& pose, int root_joint) {
  return RigidTransform2D::from_root(pose.positions.at(root_joint), pose.forward.at(root_joint));
}

namespace {

void transform_block(double* b, const RigidTransform2D& t, bool inverse) {
  const Vec3 p(b[0], b[1], b[2]), f(b[3], b[4], b[5]), u(b[6], b[7], b[8]);
  const Vec3 p2 = inverse ? t.inverse_point(p) : t.apply_point(p);
  const Vec3 f2 = inverse ? t.inverse_vector(f) : t.apply_vector(f);
  const Vec3 u2 = inverse ? t.inverse_vector(u) : t.apply_vector(u);
  for (int k = 0; k < 3; ++k) {
    b[kPosOffset + k] = p2[k];
    b[kFwdOffset + k] = f2[k];
    b[kUpOffset + k] = u2[k];
  }
}

}  // namespace

void transform_character(MotionWindow& w, int character, const RigidTransform2D& t, bool inverse) {
  for (int f = 0; f < w.frames(); ++f) {
    for (int j = 0; j < w.joints(); ++j) transform_block(w.joint(f, character, j), t, inverse);
  }
}

Pose transform_pose(const Pose& pose, const RigidTransform2D& t, bool inverse) {
  auto ch = pose.to_channels();
  for (int j = 0; j < pose.joint_count(); ++j) transform_block(ch.data() + j * kChannels, t, inverse);
  return Pose::from_channels(ch.data(), pose.joint_count());
}

void KeyposeTarget::validate() const {
  if (!(arrival_threshold > 0.0)) throw ConfigError("arrival_threshold must be > 0");
  if (max_segments < 1) throw ConfigError("max_segments must be >= 1");
  if (pose_pair[0].joint_count() != pose_pair[1].joint_count() || pose_pair[0].joint_count() == 0) {
    throw ShapeError("keypose pair joint counts differ");
  }
}

KeyposeTarget KeyposeTarget::from_poses(const std::array<Pose, 2>& poses, int root_joint, double threshold,
                                        int max_segments) {
  KeyposeTarget t;
  t.pose_pair = poses;
  for (int c = 0; c < 2; ++c) t.root_transform[c] = root_transform_of(poses[c], root_joint);
  t.arrival_threshold = threshold;
  t.max_segments = max_segments;
  t.validate();
  return t;
}

void KeyposeTarget::set_root(int character, const RigidTransform2D& root) {
  const Pose local = transform_pose(pose_pair[character], root_transform[character], true);
  pose_pair[character] = transform_pose(local, root, false);
  root_transform[character] = root;
}

Pose KeyposeTarget::local_pose(int character) const {
  return transform_pose(pose_pair[character], root_transform[character], true);
}

MotionWindow to_keypose_space(const MotionWindow& window, const KeyposeTarget& target, int character) {
  if (window.space[character].kind != SpaceKind::World) {
    throw ConfigError("to_keypose_space expects a world-space character, got " + to_string(window.space[character]));
  }
  window.require_finite("to_keypose_space");
  MotionWindow out = window;
  transform_character(out, character, target.root_transform[character], true);
  out.space[character] = Space{SpaceKind::Keypose, character};
  return out;
}

MotionWindow to_keypose_spaces(const MotionWindow& window, const KeyposeTarget& target) {
  return to_keypose_space(to_keypose_space(window, target, 0), target, 1);
}

MotionWindow keypose_spaces_to_world(const MotionWindow& window, const KeyposeTarget& target) {
  MotionWindow out = window;
  for (int c = 0; c < 2; ++c) {
    if (out.space[c].kind == SpaceKind::Keypose) {
      transform_character(out, c, target.root_transform[c], false);
      out.space[c] = Space{};
    }
  }
  return out;
}

MotionWindow to_counterpart_space(const MotionWindow& world, int character, int root_joint) {
  if (world.space[0].kind != SpaceKind::World || world.space[1].kind != SpaceKind::World) {
    throw ConfigError("to_counterpart_space expects world-space input");
  }
  const int other = 1 - character;
  MotionWindow out = world;
  for (int f = 0; f < out.frames(); ++f) {
    const RigidTransform2D root = root_transform_of(world.joint(f, other, root_joint));
    for (int j = 0; j < out.joints(); ++j) transform_block(out.joint(f, character, j), root, true);
  }
  out.space[character] = Space{SpaceKind::CounterpartRoot, other};
  return out;
}

MotionWindow to_counterpart_space(const MotionWindow& keypose_window, const KeyposeTarget& target, int character,
                                  int root_joint) {
  return to_counterpart_space(keypose_spaces_to_world(keypose_window, target), character, root_joint);
}

}  // namespace xsib
