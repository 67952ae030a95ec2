#pragma once

#include <vector>

#include "xsib/core/motion.hpp"
#include "xsib/nn/tensor.hpp"

namespace xsib::interaction {

using nn::Tensor;

/// Frame-to-frame change of the squared distance between joint i of the
/// first character and joint j of the second, for each configured pair.
struct PjdDynamics {
  int horizon = 0;                 // N
  std::vector<JointPair> pairs;
  std::vector<double> offsets;     // pairs × N, row-major
  double at(int pair, int n) const { return offsets[static_cast<std::size_t>(pair) * horizon + n]; }
};

/// Uses world-space frames [start, start + N]. Throws HorizonError when the
/// window holds fewer than N + 1 frames from `start`.
PjdDynamics compute_pjd(const MotionWindow& world, const std::vector<JointPair>& pairs, int horizon, int start = 0);

/// Differentiable batch version: a, b are [B, F, J, 9] (first and second
/// character, shared world space) and the result is [B, pairs, F - 1].
Tensor pjd_tensor(const Tensor& a, const Tensor& b, const std::vector<JointPair>& pairs);

/// Stacks dynamics into [B, pairs, N].
Tensor stack_pjd(const std::vector<PjdDynamics>& batch);

/// One CSV row per pair: "i,j,offset_0,...,offset_{N-1}".
std::string pjd_csv(const PjdDynamics& d);

}  // namespace xsib::interaction
