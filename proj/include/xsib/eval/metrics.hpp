#pragma once

#include <Eigen/Core>
#include <vector>

#include "xsib/core/motion.hpp"

namespace xsib::eval {

// Aggregation convention shared by L2P, L2Q and diversity: the per-frame,
// per-character error is the L2 norm of the stacked joint vector (3J values
// for positions, 4J for quaternions); the metric is its mean over frames
// [0, horizon) and both characters. Windows are world space.

/// Throws RangeError when either window is shorter than `horizon`.
double metric_l2p(const MotionWindow& pred, const MotionWindow& gt, int horizon);
/// Quaternions from the forward/up frames, each pred quaternion flipped into
/// the hemisphere of its gt counterpart.
double metric_l2q(const MotionWindow& pred, const MotionWindow& gt, int horizon);

/// Unit quaternion (w, x, y, z) of the frame with columns forward, up,
/// forward × up.
Eigen::Vector4d frame_quaternion(const Vec3& forward, const Vec3& up);

/// Mean over all sample pairs of the pairwise distance under the convention
/// above. Throws ConfigError with fewer than two samples.
double metric_diversity(const std::vector<MotionWindow>& samples, int horizon);

/// Swing and twist angles (radians) of every joint's rotation relative to
/// its parent, twist about the local forward axis. Returns [frames][4J]:
/// character 0 then 1, per joint (swing, twist).
std::vector<std::vector<double>> swing_twist_angles(const MotionWindow& motion, const SkeletonSpec& skeleton,
                                                    int horizon);

struct NpssResult {
  double value = 0.0;
  int skipped_channels = 0;  // channels whose ground truth has no power
};
/// Power spectra of the mean-removed angle channels, each normalized to unit
/// mass; per channel the earth mover's distance is the L1 distance of the
/// cumulative spectra (in bins), averaged with weights equal to the ground
/// truth channel power. Not scaled by 100.
NpssResult npss_channels(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& gt);
NpssResult metric_npss(const MotionWindow& pred, const MotionWindow& gt, const SkeletonSpec& skeleton, int horizon);

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased
};
/// Rows are samples. Needs at least two rows.
GaussianFit fit_gaussian(const Eigen::MatrixXd& samples);

struct FidResult {
  double value = 0.0;
  bool ridge_applied = false;  // a covariance was singular and got eps·I
};
inline constexpr double kFidRidge = 1e-6;
/// |mu1 - mu2|² + tr(S1 + S2 - 2 (S1 S2)^{1/2}), with the square root taken
/// as (S1^{1/2} S2 S1^{1/2})^{1/2} so only symmetric eigen-solves are needed.
FidResult frechet_distance(const GaussianFit& a, const GaussianFit& b);
FidResult metric_fid(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b);

}  // namespace xsib::eval
