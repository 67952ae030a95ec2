#include "xsib/model/space_ops.hpp"

#include <cmath>

#include "xsib/core/errors.hpp"
#include "xsib/nn/ops.hpp"

namespace xsib::model {

using namespace nn;

Tensor pack_characters(const std::vector<MotionWindow>& windows) {
  if (windows.empty()) throw ShapeError("empty batch");
  const int B = static_cast<int>(windows.size());
  const int T = windows[0].frames(), J = windows[0].joints();
  const std::size_t per = static_cast<std::size_t>(J) * kChannels;
  std::vector<double> v(2 * B * T * per);
  for (int b = 0; b < B; ++b) {
    if (windows[b].frames() != T || windows[b].joints() != J) throw ShapeError("ragged batch");
    for (int c = 0; c < 2; ++c) {
      for (int t = 0; t < T; ++t) {
        const double* src = windows[b].joint(t, c, 0);
        std::copy_n(src, per, v.data() + ((static_cast<std::size_t>(c) * B + b) * T + t) * per);
      }
    }
  }
  return Tensor({2 * B, T, J, kChannels}, std::move(v));
}

std::vector<MotionWindow> unpack_characters(const Tensor& packed, int batch, const MotionWindow* like) {
  const int T = packed.dim(1), J = packed.dim(2);
  if (packed.dim(0) != 2 * batch) throw ShapeError("packed batch mismatch");
  const std::size_t per = static_cast<std::size_t>(J) * kChannels;
  std::vector<MotionWindow> out;
  const auto v = packed.values();
  for (int b = 0; b < batch; ++b) {
    MotionWindow w(T, J);
    if (like) {
      w.space = like->space;
      w.frame_rate = like->frame_rate;
    }
    for (int c = 0; c < 2; ++c) {
      for (int t = 0; t < T; ++t) {
        std::copy_n(v.data() + ((static_cast<std::size_t>(c) * batch + b) * T + t) * per, per, w.joint(t, c, 0));
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

Tensor swap_characters(const Tensor& packed) {
  const int B = packed.dim(0) / 2;
  return concat({slice(packed, 0, B, 2 * B), slice(packed, 0, 0, B)}, 0);
}

YawFrames yaw_frames(const std::vector<RigidTransform2D>& transforms) {
  const int N = static_cast<int>(transforms.size());
  std::vector<double> c(N), s(N), x(N), z(N);
  for (int i = 0; i < N; ++i) {
    c[i] = std::cos(transforms[i].yaw);
    s[i] = std::sin(transforms[i].yaw);
    x[i] = transforms[i].x;
    z[i] = transforms[i].z;
  }
  const Shape shape{N, 1, 1, 1, 1};
  return {Tensor(shape, c), Tensor(shape, s), Tensor(shape, x), Tensor(shape, z)};
}

YawFrames root_frames(const Tensor& x, int root_joint) {
  const int N = x.dim(0), T = x.dim(1);
  const Tensor root = slice(x, 2, root_joint, root_joint + 1);  // [N, T, 1, 9]
  auto channel = [&](int k) { return reshape(slice(root, 3, k, k + 1), {N, T, 1, 1, 1}); };
  const Tensor fx = channel(kFwdOffset), fz = channel(kFwdOffset + 2);
  const Tensor r = sqrt(square(fx) + square(fz) + 1e-12);
  return {fx / r, -(fz / r), channel(kPosOffset), channel(kPosOffset + 2)};
}

Tensor yaw_transform(const Tensor& x, const YawFrames& f, bool inverse) {
  const int N = x.dim(0), T = x.dim(1), J = x.dim(2);
  const Tensor v = reshape(x, {N, T, J, 3, 3});
  Tensor X = slice(v, 4, 0, 1), Y = slice(v, 4, 1, 2), Z = slice(v, 4, 2, 3);
  // Only the position slot of each joint block is translated.
  const Tensor mask({3, 1}, {1.0, 0.0, 0.0});
  Tensor Xn, Zn;
  if (inverse) {
    const Tensor dX = X - f.x * mask, dZ = Z - f.z * mask;
    Xn = f.cos * dX - f.sin * dZ;
    Zn = f.sin * dX + f.cos * dZ;
  } else {
    Xn = f.cos * X + f.sin * Z + f.x * mask;
    Zn = f.cos * Z - f.sin * X + f.z * mask;
  }
  return reshape(concat({Xn, Y, Zn}, 4), {N, T, J, kChannels});
}

std::vector<RigidTransform2D> packed_roots(const std::vector<KeyposeTarget>& targets) {
  std::vector<RigidTransform2D> out;
  for (int c = 0; c < 2; ++c)
    for (const auto& t : targets) out.push_back(t.root_transform[c]);
  return out;
}

Tensor packed_keypose_poses(const std::vector<KeyposeTarget>& targets) {
  const int B = static_cast<int>(targets.size());
  const int J = targets.at(0).pose_pair[0].joint_count();
  std::vector<double> v;
  v.reserve(2 * B * J * kChannels);
  for (int c = 0; c < 2; ++c) {
    for (const auto& t : targets) {
      const auto ch = t.local_pose(c).to_channels();
      v.insert(v.end(), ch.begin(), ch.end());
    }
  }
  return Tensor({2 * B, J, kChannels}, std::move(v));
}

}  // namespace xsib::model
