#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace xsib {

/// Channels per joint: position (3), forward vector (3), up vector (3).
inline constexpr int kChannels = 9;
inline constexpr int kPosOffset = 0;
inline constexpr int kFwdOffset = 3;
inline constexpr int kUpOffset = 6;

using Vec3 = Eigen::Vector3d;
using JointPair = std::pair<int, int>;

struct SkeletonSpec {
  std::vector<std::string> joint_names;
  std::vector<int> parent_index;  // -1 marks the root
  std::vector<Vec3> rest_offsets;
  std::vector<int> foot_joint_ids;
  std::vector<JointPair> joint_pair_map;
  // mirror_map[j] is the joint that j maps to under left/right mirroring.
  // Empty when the skeleton carries no left/right correspondence.
  std::vector<int> mirror_map;

  int joint_count() const { return static_cast<int>(joint_names.size()); }
  int root_joint() const;

  /// Throws ConfigError on any broken invariant.
  void validate() const;

  /// (parent, child) for every non-root joint, in joint order.
  std::vector<JointPair> bones() const;

  /// Row-major J×J adjacency with self loops, symmetrically normalized.
  std::vector<double> normalized_adjacency() const;

  /// Pairs (i, i) for every joint: J channels.
  static std::vector<JointPair> corresponding_pairs(int joints);
  /// All J² pairs.
  static std::vector<JointPair> all_pairs(int joints);

  /// The 17-joint skeleton used by the synthetic generator.
  /// Local frame: +x forward, +y up, +z right.
  static SkeletonSpec duet17();
};

void to_json(nlohmann::json& j, const SkeletonSpec& s);
void from_json(const nlohmann::json& j, SkeletonSpec& s);

/// One character's frame in some declared space.
struct Pose {
  std::vector<Vec3> positions;
  std::vector<Vec3> forward;
  std::vector<Vec3> up;

  Pose() = default;
  explicit Pose(int joints)
      : positions(joints, Vec3::Zero()),
        forward(joints, Vec3::UnitX()),
        up(joints, Vec3::UnitY()) {}

  int joint_count() const { return static_cast<int>(positions.size()); }

  /// Normalize forward, then Gram-Schmidt up against forward.
  void orthonormalize();

  /// Packs into J×9 channels.
  std::vector<double> to_channels() const;
  static Pose from_channels(const double* channels, int joints);
};

/// Orthonormalizes the rotation channels of a single joint block in place.
/// Degenerate vectors fall back to the canonical axes.
void orthonormalize_joint(double* block);

}  // namespace xsib
