#pragma once

#include <vector>

#include "xsib/core/transform.hpp"
#include "xsib/nn/tensor.hpp"

namespace xsib::model {

using nn::Tensor;

/// Stacks windows into [2B, T, J, 9]; row c·B + b holds character c of window b.
Tensor pack_characters(const std::vector<MotionWindow>& windows);
/// Inverse of pack_characters. Spaces are copied from `like` when given.
std::vector<MotionWindow> unpack_characters(const Tensor& packed, int batch, const MotionWindow* like = nullptr);

/// Swaps the two character halves of a packed [2B, ...] tensor.
Tensor swap_characters(const Tensor& packed);

/// Per-row yaw transform coefficients, each shaped [N, F, 1, 1, 1] with F = 1
/// (constant over time) or the frame count.
struct YawFrames {
  Tensor cos, sin, x, z;
};

/// Coefficients for one transform per packed row (constants).
YawFrames yaw_frames(const std::vector<RigidTransform2D>& transforms);
/// Per-frame root frames read from the root joint of x[N, T, J, 9]. Fully
/// differentiable; the facing comes from the ground projection of the root
/// forward vector.
YawFrames root_frames(const Tensor& x, int root_joint);

/// Applies the frames (local -> parent) or their inverse to every joint block
/// of x[N, T, J, 9]. Positions are translated; forward/up vectors only rotate.
Tensor yaw_transform(const Tensor& x, const YawFrames& frames, bool inverse);

/// Keypose root transforms of a packed batch, row c·B + b from targets[b].
std::vector<RigidTransform2D> packed_roots(const std::vector<KeyposeTarget>& targets);
/// Local keypose poses of a packed batch as [2B, J, 9].
Tensor packed_keypose_poses(const std::vector<KeyposeTarget>& targets);

}  // namespace xsib::model
