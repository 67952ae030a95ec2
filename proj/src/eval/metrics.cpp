#include "xsib/eval/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <cmath>
#include <unsupported/Eigen/FFT>

#include "xsib/core/errors.hpp"

namespace xsib::eval {

namespace {

void require_horizon(const MotionWindow& w, int horizon, const char* what) {
  if (horizon < 1 || w.frames() < horizon) {
    throw RangeError(std::string(what) + ": horizon " + std::to_string(horizon) + " exceeds the " +
                     std::to_string(w.frames()) + "-frame sequence");
  }
}

void require_pair(const MotionWindow& a, const MotionWindow& b, int horizon, const char* what) {
  require_horizon(a, horizon, what);
  require_horizon(b, horizon, what);
  if (a.joints() != b.joints()) throw ShapeError(std::string(what) + ": joint counts differ");
}

double position_distance(const MotionWindow& a, const MotionWindow& b, int horizon) {
  double total = 0.0;
  for (int f = 0; f < horizon; ++f) {
    for (int c = 0; c < 2; ++c) {
      double sq = 0.0;
      for (int j = 0; j < a.joints(); ++j) sq += (a.position(f, c, j) - b.position(f, c, j)).squaredNorm();
      total += std::sqrt(sq);
    }
  }
  return total / (2.0 * horizon);
}

Eigen::Matrix3d frame_matrix(const double* block) {
  const Vec3 f(block[3], block[4], block[5]), u(block[6], block[7], block[8]);
  Eigen::Matrix3d r;
  r.col(0) = f;
  r.col(1) = u;
  r.col(2) = f.cross(u);
  return r;
}

// Symmetric PSD square root through an eigen-decomposition.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

bool singular(const Eigen::MatrixXd& cov) {
  if (cov.rows() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  return es.eigenvalues().minCoeff() <= 1e-12 * top;
}

}  // namespace

double metric_l2p(const MotionWindow& pred, const MotionWindow& gt, int horizon) {
  require_pair(pred, gt, horizon, "L2P");
  return position_distance(pred, gt, horizon);
}

Eigen::Vector4d frame_quaternion(const Vec3& forward, const Vec3& up) {
  Eigen::Matrix3d r;
  r.col(0) = forward;
  r.col(1) = up;
  r.col(2) = forward.cross(up);
  const Eigen::Quaterniond q(r);
  return {q.w(), q.x(), q.y(), q.z()};
}

double metric_l2q(const MotionWindow& pred, const MotionWindow& gt, int horizon) {
  require_pair(pred, gt, horizon, "L2Q");
  double total = 0.0;
  for (int f = 0; f < horizon; ++f) {
    for (int c = 0; c < 2; ++c) {
      double sq = 0.0;
      for (int j = 0; j < pred.joints(); ++j) {
        const double* p = pred.joint(f, c, j);
        const double* g = gt.joint(f, c, j);
        Eigen::Vector4d qp = frame_quaternion(Vec3(p[3], p[4], p[5]), Vec3(p[6], p[7], p[8]));
        const Eigen::Vector4d qg = frame_quaternion(Vec3(g[3], g[4], g[5]), Vec3(g[6], g[7], g[8]));
        if (qp.dot(qg) < 0) qp = -qp;
        sq += (qp - qg).squaredNorm();
      }
      total += std::sqrt(sq);
    }
  }
  return total / (2.0 * horizon);
}

double metric_diversity(const std::vector<MotionWindow>& samples, int horizon) {
  if (samples.size() < 2) throw ConfigError("diversity needs at least two samples");
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t k = i + 1; k < samples.size(); ++k) {
      require_pair(samples[i], samples[k], horizon, "diversity");
      total += position_distance(samples[i], samples[k], horizon);
      ++pairs;
    }
  }
  return total / pairs;
}

std::vector<std::vector<double>> swing_twist_angles(const MotionWindow& motion, const SkeletonSpec& skeleton,
                                                    int horizon) {
  require_horizon(motion, horizon, "NPSS");
  const int J = skeleton.joint_count();
  if (motion.joints() != J) throw ShapeError("NPSS: window does not match the skeleton");
  std::vector<std::vector<double>> out(horizon, std::vector<double>(4 * J));
  for (int f = 0; f < horizon; ++f) {
    for (int c = 0; c < 2; ++c) {
      for (int j = 0; j < J; ++j) {
        Eigen::Matrix3d local = frame_matrix(motion.joint(f, c, j));
        const int parent = skeleton.parent_index[j];
        if (parent >= 0) local = frame_matrix(motion.joint(f, c, parent)).transpose() * local;
        Eigen::Quaterniond q(local);
        if (q.w() < 0) q.coeffs() = -q.coeffs();
        const double twist = 2.0 * std::atan2(q.x(), q.w());
        const double swing = 2.0 * std::asin(std::min(1.0, std::hypot(q.y(), q.z())));
        out[f][(c * J + j) * 2] = swing;
        out[f][(c * J + j) * 2 + 1] = twist;
      }
    }
  }
  return out;
}

NpssResult npss_channels(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& gt) {
  if (pred.size() != gt.size() || pred.empty() || pred[0].size() != gt[0].size()) {
    throw ShapeError("NPSS: angle sequences differ in shape");
  }
  const int T = static_cast<int>(gt.size()), C = static_cast<int>(gt[0].size());
  Eigen::FFT<double> fft;
  auto spectrum = [&](const std::vector<std::vector<double>>& x, int c) {
    std::vector<double> s(T);
    double m = 0.0;
    for (int t = 0; t < T; ++t) m += x[t][c];
    m /= T;
    for (int t = 0; t < T; ++t) s[t] = x[t][c] - m;
    std::vector<std::complex<double>> z;
    fft.fwd(z, s);
    std::vector<double> p(T / 2 + 1);
    for (int k = 0; k <= T / 2; ++k) p[k] = std::norm(z[k]);
    return p;
  };
  NpssResult r;
  double weighted = 0.0, weights = 0.0;
  for (int c = 0; c < C; ++c) {
    const auto pg = spectrum(gt, c), pp = spectrum(pred, c);
    double sg = 0.0, sp = 0.0;
    for (std::size_t k = 0; k < pg.size(); ++k) {
      sg += pg[k];
      sp += pp[k];
    }
    if (sg <= 1e-20) {
      ++r.skipped_channels;
      continue;
    }
    double cg = 0.0, cp = 0.0, emd = 0.0;
    for (std::size_t k = 0; k < pg.size(); ++k) {
      cg += pg[k] / sg;
      // A silent prediction counts as all mass at DC.
      cp += sp > 1e-20 ? pp[k] / sp : (k == 0 ? 1.0 : 0.0);
      emd += std::abs(cg - cp);
    }
    weighted += sg * emd;
    weights += sg;
  }
  r.value = weights > 0 ? weighted / weights : 0.0;
  return r;
}

NpssResult metric_npss(const MotionWindow& pred, const MotionWindow& gt, const SkeletonSpec& skeleton, int horizon) {
  return npss_channels(swing_twist_angles(pred, skeleton, horizon), swing_twist_angles(gt, skeleton, horizon));
}

GaussianFit fit_gaussian(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) throw ConfigError("a Gaussian fit needs at least two samples");
  GaussianFit g;
  g.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - g.mean.transpose();
  g.cov = centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
  return g;
}

FidResult frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.mean.size() != b.mean.size()) throw ShapeError("FID: feature sizes differ");
  FidResult r;
  Eigen::MatrixXd s1 = a.cov, s2 = b.cov;
  if (singular(s1) || singular(s2)) {
    r.ridge_applied = true;
    s1 += kFidRidge * Eigen::MatrixXd::Identity(s1.rows(), s1.cols());
    s2 += kFidRidge * Eigen::MatrixXd::Identity(s2.rows(), s2.cols());
  }
  const Eigen::MatrixXd r1 = sqrt_psd(s1);
  const Eigen::MatrixXd inner = r1 * s2 * r1;
  const double cross = sqrt_psd(0.5 * (inner + inner.transpose())).trace();
  r.value = (a.mean - b.mean).squaredNorm() + s1.trace() + s2.trace() - 2.0 * cross;
  r.value = std::max(r.value, 0.0);
  return r;
}

FidResult metric_fid(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b) {
  return frechet_distance(fit_gaussian(features_a), fit_gaussian(features_b));
}

}  // namespace xsib::eval
