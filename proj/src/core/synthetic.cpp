#include "xsib/core/synthetic.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>

#include "xsib/core/errors.hpp"

namespace xsib {

void SyntheticConfig::validate() const {
  if (sequence_count < 1) throw ConfigError("sequence_count must be >= 1");
  if (length < 120) throw ConfigError("synthetic sequences need >= 120 frames");
  if (!(frame_rate > 0) || !(freq_min_hz > 0) || freq_max_hz < freq_min_hz) throw ConfigError("bad frequency band");
  if (freq_max_hz >= frame_rate / 2) throw ConfigError("interaction frequency must stay below Nyquist");
  if (noise < 0) throw ConfigError("noise must be >= 0");
  if (distance_min <= approach_max) throw ConfigError("characters would overlap");
}

void to_json(nlohmann::json& j, const SyntheticConfig& c) {
  j = {{"sequence_count", c.sequence_count}, {"length", c.length},           {"frame_rate", c.frame_rate},
       {"freq_min_hz", c.freq_min_hz},       {"freq_max_hz", c.freq_max_hz}, {"noise", c.noise},
       {"distance_min", c.distance_min},     {"distance_max", c.distance_max}, {"approach_min", c.approach_min},
       {"approach_max", c.approach_max},     {"drift_speed_max", c.drift_speed_max},
       {"turn_rate_max", c.turn_rate_max}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& c) {
  SyntheticConfig d;
  c.sequence_count = j.value("sequence_count", d.sequence_count);
  c.length = j.value("length", d.length);
  c.frame_rate = j.value("frame_rate", d.frame_rate);
  c.freq_min_hz = j.value("freq_min_hz", d.freq_min_hz);
  c.freq_max_hz = j.value("freq_max_hz", d.freq_max_hz);
  c.noise = j.value("noise", d.noise);
  c.distance_min = j.value("distance_min", d.distance_min);
  c.distance_max = j.value("distance_max", d.distance_max);
  c.approach_min = j.value("approach_min", d.approach_min);
  c.approach_max = j.value("approach_max", d.approach_max);
  c.drift_speed_max = j.value("drift_speed_max", d.drift_speed_max);
  c.turn_rate_max = j.value("turn_rate_max", d.turn_rate_max);
}

namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
// Rotation about the lateral axis; positive swings -y towards +x.
Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }
// Smoothed noise: unit-variance AR(1) process scaled by `sigma`.
class SmoothNoise {
 public:
  SmoothNoise(double sigma, std::mt19937_64& rng) : sigma_(sigma), rng_(rng) {}
  double next() {
    if (sigma_ == 0.0) return 0.0;
    std::normal_distribution<double> n(0.0, 1.0);
    state_ = 0.9 * state_ + std::sqrt(1 - 0.81) * n(rng_);
    return sigma_ * state_;
  }

 private:
  double sigma_;
  std::mt19937_64& rng_;
  double state_ = 0.0;
};

struct CharacterDrive {
  Vec3 root;
  double yaw;
  double lean;        // spine pitch, positive leans forward
  double r_shoulder;  // arm swing angles
  double r_elbow;
  double l_shoulder;
  double l_elbow;
  double knee;        // thigh angle; the shin counter-rotates by twice this
  double head_turn;
};

void pose_character(const SkeletonSpec& s, const CharacterDrive& d, MotionWindow& w, int frame, int c) {
  const int J = s.joint_count();
  std::vector<Mat3> local(J, Mat3::Identity());
  local[0] = rot_y(d.yaw);
  local[1] = rot_z(-d.lean);  // lean forward tips +y towards +x
  local[4] = rot_y(d.head_turn);
  local[5] = rot_z(d.l_shoulder);
  local[6] = rot_z(d.l_elbow);
  local[8] = rot_z(d.r_shoulder);
  local[9] = rot_z(d.r_elbow);
  local[11] = rot_z(d.knee);
  local[12] = rot_z(-2.0 * d.knee);
  local[14] = rot_z(d.knee);
  local[15] = rot_z(-2.0 * d.knee);
  std::vector<Mat3> global(J);
  std::vector<Vec3> pos(J);
  for (int j = 0; j < J; ++j) {
    const int p = s.parent_index[j];
    if (p < 0) {
      global[j] = local[j];
      pos[j] = d.root;
    } else {
      // A joint's offset is expressed in its parent's frame.
      global[j] = global[p] * local[j];
      pos[j] = pos[p] + global[p] * s.rest_offsets[j];
    }
  }
  for (int j = 0; j < J; ++j) {
    double* b = w.joint(frame, c, j);
    const Vec3 f = global[j] * Vec3::UnitX();
    const Vec3 u = global[j] * Vec3::UnitY();
    for (int k = 0; k < 3; ++k) {
      b[kPosOffset + k] = pos[j][k];
      b[kFwdOffset + k] = f[k];
      b[kUpOffset + k] = u[k];
    }
  }
}

}  // namespace

Dataset generate_synthetic_duet(const SyntheticConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  Dataset d;
  d.skeleton = SkeletonSpec::duet17();
  d.frame_rate = cfg.frame_rate;
  const double two_pi = 2.0 * std::numbers::pi;
  const SkeletonSpec& s = d.skeleton;
  // Thigh plus shin length, and the fixed drop from the root to the leg joint.
  const double leg = -(s.rest_offsets[12].y() + s.rest_offsets[13].y());
  const double pelvis_drop = -s.rest_offsets[11].y();
  const double foot_clearance = s.rest_offsets[0].y() - leg - pelvis_drop;

  for (int i = 0; i < cfg.sequence_count; ++i) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
    const double freq = uni(cfg.freq_min_hz, cfg.freq_max_hz);
    const double d0 = uni(cfg.distance_min, cfg.distance_max);
    const double amp = uni(cfg.approach_min, cfg.approach_max);
    const double phase0 = uni(0.0, two_pi);
    const double theta0 = uni(-std::numbers::pi, std::numbers::pi);
    const double turn = uni(-cfg.turn_rate_max, cfg.turn_rate_max);
    const double drift_dir = uni(-std::numbers::pi, std::numbers::pi);
    const double drift_speed = uni(0.0, cfg.drift_speed_max);
    const Vec3 center0(uni(-1.0, 1.0), 0.0, uni(-1.0, 1.0));
    const Vec3 drift(std::cos(drift_dir) * drift_speed, 0.0, std::sin(drift_dir) * drift_speed);

    SmoothNoise n_dist(cfg.noise * 0.05, rng);
    std::array<std::array<SmoothNoise, 6>, 2> n_ang = {
        std::array<SmoothNoise, 6>{SmoothNoise(cfg.noise, rng), SmoothNoise(cfg.noise, rng),
                                   SmoothNoise(cfg.noise, rng), SmoothNoise(cfg.noise, rng),
                                   SmoothNoise(cfg.noise, rng), SmoothNoise(cfg.noise, rng)},
        std::array<SmoothNoise, 6>{SmoothNoise(cfg.noise, rng), SmoothNoise(cfg.noise, rng),
                                   SmoothNoise(cfg.noise, rng), SmoothNoise(cfg.noise, rng),
                                   SmoothNoise(cfg.noise, rng), SmoothNoise(cfg.noise, rng)}};

    MotionWindow w(cfg.length, s.joint_count(), 0, cfg.frame_rate);
    for (int f = 0; f < cfg.length; ++f) {
      const double t = f / cfg.frame_rate;
      const double cyc = two_pi * freq * t + phase0;
      const double dist = d0 + amp * std::sin(cyc) + n_dist.next();
      // 1 at closest approach, 0 when furthest apart.
      const double punch = 0.5 * (1.0 - std::sin(cyc));
      const double jab = 0.5 * (1.0 - std::cos(2.0 * cyc));
      const double theta = theta0 + turn * t;
      const Vec3 axis(std::cos(theta), 0.0, -std::sin(theta));
      const Vec3 center = center0 + drift * t;
      const double bob = 0.03 * jab;

      for (int c = 0; c < 2; ++c) {
        auto& nz = n_ang[c];
        CharacterDrive drv{};
        const double sign = c == 0 ? -1.0 : 1.0;
        drv.root = center + sign * 0.5 * dist * axis;
        drv.yaw = c == 0 ? theta : theta + std::numbers::pi;
        const double hip_height = leg - bob;
        drv.root.y() = hip_height + pelvis_drop + foot_clearance;
        drv.knee = std::acos(std::clamp(hip_height / leg, -1.0, 1.0));
        if (c == 0) {
          drv.lean = 0.05 + 0.15 * punch + nz[0].next();
          drv.r_shoulder = 0.6 + 0.9 * punch + nz[1].next();
          drv.r_elbow = 1.6 * (1.0 - punch) + nz[2].next();
          drv.l_shoulder = 0.7 + 0.3 * jab + nz[3].next();
          drv.l_elbow = 1.5 - 0.4 * jab + nz[4].next();
        } else {
          drv.lean = 0.05 - 0.2 * punch + nz[0].next();
          drv.r_shoulder = 0.5 + 0.5 * punch + nz[1].next();
          drv.r_elbow = 1.7 + 0.2 * punch + nz[2].next();
          drv.l_shoulder = 0.5 + 0.5 * punch + nz[3].next();
          drv.l_elbow = 1.7 + 0.2 * punch + nz[4].next();
        }
        drv.head_turn = 0.1 * std::sin(cyc + c) + nz[5].next();
        pose_character(s, drv, w, f, c);
      }
    }
    d.sequences.push_back(std::move(w));
    d.meta.push_back(nlohmann::json{{"name", "synth_" + std::to_string(i)},
                                    {"interaction_hz", freq},
                                    {"mean_distance", d0},
                                    {"approach_amplitude", amp}});
  }
  return d;
}

}  // namespace xsib
