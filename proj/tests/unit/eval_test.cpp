#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "generators.hpp"
#include "xsib/core/errors.hpp"
#include "xsib/core/foot.hpp"
#include "xsib/eval/metrics.hpp"
#include "xsib/eval/report.hpp"

using namespace xsib;
using namespace xsib::eval;
using namespace xsib::testing;

namespace {

MotionWindow offset_joint(const MotionWindow& w, int character, int joint, const Vec3& d) {
  MotionWindow out = w;
  for (int f = 0; f < w.frames(); ++f) out.set_position(f, character, joint, w.position(f, character, joint) + d);
  return out;
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n) {
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = uniform(rng, -1, 1);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

const Dataset& duets() {
  static const Dataset d = small_duets(21, 4, 220);
  return d;
}

EvalAssets small_assets(bool periodic = true) {
  EvalAssets a;
  a.skeleton = SkeletonSpec::duet17();
  FeatureConfig fc;
  fc.hidden = 16;
  fc.latent = 4;
  fc.steps = 30;
  fc.batch = 16;
  a.features = std::make_unique<FeatureExtractor>(a.skeleton, fc, 1);
  EvalDiscriminatorConfig dc;
  dc.net.widths = {8, 8};
  dc.steps = 30;
  dc.batch = 8;
  dc.periodic = periodic;
  dc.pae_steps = 20;
  dc.pae_phase_channels = 4;
  dc.pae_hidden = 8;
  a.discriminator = std::make_unique<EvalDiscriminator>(a.skeleton, dc, 2);
  std::mt19937_64 rng(3);
  a.features->fit(duets().sequences, rng);
  a.discriminator->fit(duets().sequences, {}, rng);
  return a;
}

}  // namespace

TEST_CASE("L2P and L2Q vanish on self comparison") {
  std::mt19937_64 rng(1);
  const auto w = random_window(rng, 50, 17);
  CHECK(metric_l2p(w, w, 50) == 0.0);
  CHECK(metric_l2q(w, w, 50) == 0.0);
  CHECK_THROWS_AS(metric_l2p(w, w, 51), RangeError);
}

TEST_CASE("uniform 1 m offset gives L2P of sqrt J") {
  std::mt19937_64 rng(2);
  const auto gt = random_window(rng, 30, 17);
  MotionWindow pred = gt;
  const Vec3 d = random_unit(rng);
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < 17; ++j) pred = offset_joint(pred, c, j, d);
  CHECK(metric_l2p(pred, gt, 30) == doctest::Approx(std::sqrt(17.0)).epsilon(1e-12));
}

TEST_CASE("quaternion extraction matches Eigen and L2Q ignores sign") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Quaterniond q = Eigen::Quaterniond::UnitRandom();
    const Eigen::Matrix3d r = q.toRotationMatrix();
    const auto v = frame_quaternion(r.col(0), r.col(1));
    const double dot = v.dot(Eigen::Vector4d(q.w(), q.x(), q.y(), q.z()));
    CHECK(std::abs(std::abs(dot) - 1.0) < 1e-12);
  }
  // Aligned unit quaternions differ by at most sqrt 2 per joint.
  const auto gt = random_window(rng, 10, 5);
  CHECK(metric_l2q(gt, gt, 10) == 0.0);
  const auto other = random_window(rng, 10, 5);
  const double d = metric_l2q(other, gt, 10);
  CHECK(d > 0);
  CHECK(d <= std::sqrt(2.0 * 5) + 1e-12);
}

TEST_CASE("diversity examples") {
  std::mt19937_64 rng(4);
  const auto a = random_window(rng, 30, 17);
  CHECK(metric_diversity({a, a, a}, 30) == 0.0);
  const auto b = offset_joint(a, 1, 5, Vec3(0, 0, 1));
  // One character at 1 m, the other at 0, averaged over characters.
  CHECK(metric_diversity({a, b}, 30) == doctest::Approx(0.5).epsilon(1e-12));
  const auto c = random_window(rng, 30, 17);
  CHECK(metric_diversity({a, b, c}, 30) == doctest::Approx(metric_diversity({c, a, b}, 30)).epsilon(1e-12));
  // Three samples: mean of the three pairwise distances.
  const double expected = (0.5 + metric_diversity({a, c}, 30) + metric_diversity({b, c}, 30)) / 3;
  CHECK(metric_diversity({a, b, c}, 30) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(metric_diversity({a}, 30), ConfigError);
}

TEST_CASE("FID matches the closed form for commuting Gaussians") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6;
    // Shared eigenbasis, different spectra.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_spd(rng, n));
    const Eigen::MatrixXd Q = qr.householderQ();
    Eigen::VectorXd l1(n), l2(n), m1(n), m2(n);
    for (int i = 0; i < n; ++i) {
      l1(i) = uniform(rng, 0.1, 3);
      l2(i) = uniform(rng, 0.1, 3);
      m1(i) = uniform(rng, -2, 2);
      m2(i) = uniform(rng, -2, 2);
    }
    GaussianFit a{m1, Q * l1.asDiagonal() * Q.transpose()}, b{m2, Q * l2.asDiagonal() * Q.transpose()};
    double closed = (m1 - m2).squaredNorm();
    for (int i = 0; i < n; ++i) closed += std::pow(std::sqrt(l1(i)) - std::sqrt(l2(i)), 2);
    const auto r = frechet_distance(a, b);
    CHECK(std::abs(r.value - closed) < 1e-6);
    CHECK_FALSE(r.ridge_applied);
    CHECK(std::abs(frechet_distance(b, a).value - r.value) < 1e-6);
  }
}

TEST_CASE("FID of general Gaussians matches the trace formula with a direct matrix root") {
  std::mt19937_64 rng(6);
  const int n = 5;
  const Eigen::MatrixXd s1 = random_spd(rng, n), s2 = random_spd(rng, n);
  Eigen::VectorXd m1 = Eigen::VectorXd::Random(n), m2 = Eigen::VectorXd::Random(n);
  // (S1 S2)^{1/2} through the non-symmetric eigen-decomposition.
  Eigen::EigenSolver<Eigen::MatrixXd> es(s1 * s2);
  double tr_sqrt = 0.0;
  for (int i = 0; i < n; ++i) tr_sqrt += std::sqrt(es.eigenvalues()(i)).real();
  const double oracle = (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2 * tr_sqrt;
  CHECK(std::abs(frechet_distance({m1, s1}, {m2, s2}).value - oracle) < 1e-6);
}

TEST_CASE("FID from samples: self comparison, shuffling, empirical moments") {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd x(200, 4), y(200, 4);
  for (int i = 0; i < 200; ++i)
    for (int k = 0; k < 4; ++k) {
      x(i, k) = uniform(rng, -1, 1);
      y(i, k) = uniform(rng, -1, 1) * 2 + 1;
    }
  CHECK(metric_fid(x, x).value <= 1e-6);
  Eigen::MatrixXd xs = x;
  for (int i = 0; i < 200; ++i) xs.row(i) = x.row(199 - i);
  CHECK(std::abs(metric_fid(xs, y).value - metric_fid(x, y).value) < 1e-9);
  CHECK(std::abs(metric_fid(x, y).value - metric_fid(y, x).value) < 1e-6);

  // Points at ±s on each axis: mean 0, covariance diag(2 s² / (2 - 1)) per pair.
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << -1, 1;
  b << 2, 4;  // mean 3, variance 2
  CHECK(metric_fid(a, b).value == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("singular covariance gets a ridge") {
  Eigen::MatrixXd a(3, 2);
  a << 1, 1, 2, 2, 3, 3;  // rank one
  const auto r = metric_fid(a, a);
  CHECK(r.ridge_applied);
  CHECK(r.value <= 1e-6);
  CHECK_THROWS_AS(fit_gaussian(Eigen::MatrixXd(1, 2)), ConfigError);
}

TEST_CASE("NPSS of adjacent-bin sinusoids is one bin") {
  const int T = 64;
  std::vector<std::vector<double>> a(T, std::vector<double>(1)), b(T, std::vector<double>(1));
  for (int t = 0; t < T; ++t) {
    a[t][0] = std::sin(2 * std::numbers::pi * 5 * t / T);
    b[t][0] = std::sin(2 * std::numbers::pi * 6 * t / T);
  }
  CHECK(npss_channels(a, b).value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(npss_channels(a, a).value <= 1e-12);
  // Three bins apart.
  for (int t = 0; t < T; ++t) b[t][0] = std::cos(2 * std::numbers::pi * 8 * t / T);
  CHECK(npss_channels(a, b).value == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("NPSS is scale invariant, zero on self comparison and skips silent channels") {
  std::mt19937_64 rng(8);
  const int T = 40;
  std::vector<std::vector<double>> p(T, std::vector<double>(3)), g(T, std::vector<double>(3));
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < 2; ++c) {
      p[t][c] = uniform(rng, -1, 1);
      g[t][c] = uniform(rng, -1, 1);
    }
    p[t][2] = uniform(rng, -1, 1);
    g[t][2] = 0.5;  // constant: no power once the mean is removed
  }
  const auto base = npss_channels(p, g);
  CHECK(base.skipped_channels == 1);
  auto ps = p, gs = g;
  for (auto& row : ps)
    for (auto& v : row) v *= 7.5;
  for (auto& row : gs)
    for (auto& v : row) v *= 7.5;
  CHECK(npss_channels(ps, gs).value == doctest::Approx(base.value).epsilon(1e-9));

  const auto w = small_duets(2, 1, 120).sequences[0];
  const auto sk = SkeletonSpec::duet17();
  CHECK(metric_npss(w, w, sk, 100).value <= 1e-6);
}

TEST_CASE("swing and twist of a pure twist") {
  const auto sk = SkeletonSpec::duet17();
  MotionWindow w(1, 17);
  const int child = 1;
  REQUIRE(sk.parent_index[child] >= 0);
  Pose pose(17);
  const double angle = 0.7;
  pose.up[child] = Vec3(0, std::cos(angle), std::sin(angle));  // rotated about +x
  w.set_pose(0, 0, pose);
  w.set_pose(0, 1, Pose(17));
  const auto a = swing_twist_angles(w, sk, 1);
  CHECK(a[0][child * 2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(a[0][child * 2 + 1] == doctest::Approx(angle).epsilon(1e-12));
  pose.forward[child] = Vec3(std::cos(angle), std::sin(angle), 0);
  pose.up[child] = Vec3(-std::sin(angle), std::cos(angle), 0);  // rotated about +z
  w.set_pose(0, 0, pose);
  const auto s = swing_twist_angles(w, sk, 1);
  CHECK(s[0][child * 2] == doctest::Approx(angle).epsilon(1e-12));
  CHECK(std::abs(s[0][child * 2 + 1]) < 1e-12);
}

TEST_CASE("foot slide formula points") {
  const double H = 0.025;
  CHECK(foot_contact_weight(0.0, H) * 1.0 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(foot_contact_weight(H, H) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(foot_contact_weight(H / 2, H) * 2.0 == doctest::Approx(2 * (2 - std::sqrt(2.0))).epsilon(1e-9));
}

TEST_CASE("feature extractor embeds clips independently of global placement") {
  const auto a = small_assets();
  const auto& seq = duets().sequences[0];
  MotionWindow moved = seq;
  const RigidTransform2D t{3.0, -2.0, 1.1};
  transform_character(moved, 0, t, false);
  transform_character(moved, 1, t, false);
  const auto f1 = a.features->features({seq}, 100), f2 = a.features->features({moved}, 100);
  CHECK(f1.rows() == (100 - 10) / 5 + 1);
  CHECK((f1 - f2).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(metric_fid(f1, f1).value <= 1e-6);
}

TEST_CASE("interaction metric windows and bounds") {
  const auto a = small_assets();
  const auto& seq = duets().sequences[1];
  for (int h : {40, 60, 80}) {
    const double s = metric_interaction(seq, *a.discriminator, h);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  // Horizon 40 holds exactly one window starting at frame 0.
  const auto only = a.discriminator->score({seq.slice(0, 31)});
  CHECK(metric_interaction(seq, *a.discriminator, 40) == only[0]);
  CHECK_THROWS_AS(metric_interaction(seq, *a.discriminator, 30), RangeError);
}

TEST_CASE("corruptions keep window shapes") {
  std::mt19937_64 rng(9);
  const auto& seq = duets().sequences[0];
  const auto w = seq.slice(10, 31);
  const auto s = temporally_shuffled(w, rng);
  CHECK(s.frames() == 31);
  // Same multiset of frames.
  double sum_w = 0, sum_s = 0;
  for (double v : w.data()) sum_w += v;
  for (double v : s.data()) sum_s += v;
  CHECK(sum_s == doctest::Approx(sum_w));
  const auto m = misaligned(seq, 50, 31, rng);
  CHECK(m.frames() == 31);
  CHECK(m.pose(0, 0).positions[0] == seq.pose(50, 0).positions[0]);
}

TEST_CASE("assets round trip through a checkpoint") {
  const auto a = small_assets();
  const auto b = EvalAssets::from_checkpoint(a.checkpoint());
  const auto& seq = duets().sequences[2];
  CHECK((a.features->features({seq}, 100) - b.features->features({seq}, 100)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.discriminator->score({seq.slice(0, 31)}) == b.discriminator->score({seq.slice(0, 31)}));
}

TEST_CASE("raw-PJD eval discriminator has no autoencoder and round trips") {
  const auto a = small_assets(false);
  CHECK(a.discriminator->pae() == nullptr);
  const auto b = EvalAssets::from_checkpoint(a.checkpoint());
  CHECK(b.discriminator->pae() == nullptr);
  const auto& seq = duets().sequences[1];
  CHECK(a.discriminator->score({seq.slice(5, 31)}) == b.discriminator->score({seq.slice(5, 31)}));
  CHECK(small_assets(true).discriminator->pae() != nullptr);
}

TEST_CASE("evaluate: self comparison, parallel equals sequential, report output") {
  const auto a = small_assets();
  EvalInputs in;
  for (int i = 0; i < 4; ++i) {
    in.gt.push_back(duets().sequences[i].slice(0, 200));
    in.pred.push_back(duets().sequences[i].slice(0, 200));
  }
  in.samples = {{in.gt[0], in.gt[1]}, {in.gt[2], in.gt[2]}};
  const auto seq = evaluate(in, a, {}, 1);
  const auto par = evaluate(in, a, {}, 4);
  CHECK(nlohmann::json(seq) == nlohmann::json(par));
  for (auto [h, v] : seq.l2p) CHECK(v <= 1e-6);
  for (auto [h, v] : seq.l2q) CHECK(v <= 1e-6);
  for (auto [h, v] : seq.npss100) CHECK(v <= 1e-6);
  for (auto [h, v] : seq.fid) CHECK(v <= 1e-6);
  CHECK(seq.fid.size() == 3u);
  CHECK(seq.interaction.size() == 3u);
  CHECK(seq.diversity.at(30) > 0);

  const auto text = report_text(seq, "gt");
  CHECK(text.find("FID@200") != std::string::npos);
  CHECK(text.find("100xNPSS@150") != std::string::npos);
  const auto records = report_records(seq, "gt");
  CHECK(records.size() == 2 + 2 + 1 + 3 + 2 + 3 + 3);

  EvalInputs short_in = in;
  for (auto& w : short_in.pred) w = w.slice(0, 120);
  for (auto& w : short_in.gt) w = w.slice(0, 120);
  const auto r = evaluate(short_in, a);
  CHECK(r.fid.count(150) == 0);
  CHECK_FALSE(r.notes.empty());
}
