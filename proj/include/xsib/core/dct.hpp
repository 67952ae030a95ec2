#pragma once

#include <vector>

#include "xsib/core/motion.hpp"

namespace xsib {

/// Row-major K×T orthonormal DCT-II basis: X[k] = sum_n basis[k][n] * x[n].
/// Its transpose is the inverse when K = T.
std::vector<double> dct_basis(int K, int T);

/// Temporal DCT coefficients of a window, stored K×2×J×9 like MotionWindow.
struct DctSpectrum {
  int K = 0;
  int joints = 0;
  std::vector<double> coefficients;

  double& at(int k, int character, int joint, int channel) {
    return coefficients[((static_cast<std::size_t>(k) * 2 + character) * joints + joint) * kChannels + channel];
  }
  double at(int k, int character, int joint, int channel) const {
    return coefficients[((static_cast<std::size_t>(k) * 2 + character) * joints + joint) * kChannels + channel];
  }
};

/// Orthonormal DCT-II along time for every (character, joint, channel), first
/// K coefficients kept. Requires 1 <= K <= T and finite input.
DctSpectrum dct_forward(const MotionWindow& window, int K);

/// Zero-pads to T coefficients and applies the inverse transform.
MotionWindow idct_inverse(const DctSpectrum& spectrum, int T);

/// Single-signal helpers used by tests and the metrics.
std::vector<double> dct_1d(const std::vector<double>& x, int K);
std::vector<double> idct_1d(const std::vector<double>& coeffs, int T);

}  // namespace xsib
