#include "xsib/core/skeleton.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "xsib/core/errors.hpp"

namespace xsib {

int SkeletonSpec::root_joint() const {
  for (int j = 0; j < joint_count(); ++j) {
    if (parent_index[j] < 0) return j;
  }
  throw ConfigError("skeleton has no root joint");
}

void SkeletonSpec::validate() const {
  const int J = joint_count();
  if (J == 0) throw ConfigError("skeleton has no joints");
  if (static_cast<int>(parent_index.size()) != J || static_cast<int>(rest_offsets.size()) != J) {
    throw ConfigError("skeleton arrays disagree on joint count");
  }
  int roots = 0;
  for (int j = 0; j < J; ++j) {
    const int p = parent_index[j];
    if (p < 0) {
      ++roots;
    } else if (p >= J || p == j) {
      throw ConfigError("joint " + joint_names[j] + " has invalid parent " + std::to_string(p));
    }
  }
  if (roots != 1) throw ConfigError("skeleton must have exactly one root, found " + std::to_string(roots));
  // Every joint must reach the root without revisiting a joint.
  for (int j = 0; j < J; ++j) {
    int cur = j;
    for (int steps = 0; parent_index[cur] >= 0; ++steps) {
      if (steps > J) throw ConfigError("parent graph has a cycle through " + joint_names[j]);
      cur = parent_index[cur];
    }
  }
  if (foot_joint_ids.empty()) throw ConfigError("foot_joint_ids is empty");
  for (int f : foot_joint_ids) {
    if (f < 0 || f >= J) throw ConfigError("foot joint id out of range");
  }
  for (const auto& [a, b] : joint_pair_map) {
    if (a < 0 || a >= J || b < 0 || b >= J) throw ConfigError("joint pair index out of range");
  }
  if (!mirror_map.empty()) {
    if (static_cast<int>(mirror_map.size()) != J) throw ConfigError("mirror_map size differs from joint count");
    for (int j = 0; j < J; ++j) {
      const int m = mirror_map[j];
      if (m < 0 || m >= J || mirror_map[m] != j) throw ConfigError("mirror_map is not an involution");
    }
  }
}

std::vector<JointPair> SkeletonSpec::bones() const {
  std::vector<JointPair> out;
  for (int j = 0; j < joint_count(); ++j) {
    if (parent_index[j] >= 0) out.emplace_back(parent_index[j], j);
  }
  return out;
}

std::vector<double> SkeletonSpec::normalized_adjacency() const {
  const int J = joint_count();
  std::vector<double> a(static_cast<std::size_t>(J) * J, 0.0);
  for (int j = 0; j < J; ++j) a[j * J + j] = 1.0;
  for (const auto& [p, c] : bones()) {
    a[p * J + c] = 1.0;
    a[c * J + p] = 1.0;
  }
  std::vector<double> deg(J, 0.0);
  for (int i = 0; i < J; ++i) {
    for (int k = 0; k < J; ++k) deg[i] += a[i * J + k];
  }
  for (int i = 0; i < J; ++i) {
    for (int k = 0; k < J; ++k) a[i * J + k] /= std::sqrt(deg[i] * deg[k]);
  }
  return a;
}

std::vector<JointPair> SkeletonSpec::corresponding_pairs(int joints) {
  std::vector<JointPair> out;
  for (int j = 0; j < joints; ++j) out.emplace_back(j, j);
  return out;
}

std::vector<JointPair> SkeletonSpec::all_pairs(int joints) {
  std::vector<JointPair> out;
  for (int i = 0; i < joints; ++i) {
    for (int j = 0; j < joints; ++j) out.emplace_back(i, j);
  }
  return out;
}

SkeletonSpec SkeletonSpec::duet17() {
  SkeletonSpec s;
  s.joint_names = {"hips",       "spine",   "chest",  "neck",       "head",    "l_shoulder",
                   "l_elbow",    "l_hand",  "r_shoulder", "r_elbow", "r_hand",  "l_upleg",
                   "l_knee",     "l_foot",  "r_upleg",    "r_knee",  "r_foot"};
  s.parent_index = {-1, 0, 1, 2, 3, 2, 5, 6, 2, 8, 9, 0, 11, 12, 0, 14, 15};
  s.rest_offsets = {Vec3(0, 0.93, 0),   Vec3(0, 0.15, 0),      Vec3(0, 0.20, 0),  Vec3(0, 0.20, 0),
                    Vec3(0, 0.12, 0),   Vec3(0, 0.18, -0.18),  Vec3(0, -0.28, 0), Vec3(0, -0.26, 0),
                    Vec3(0, 0.18, 0.18), Vec3(0, -0.28, 0),    Vec3(0, -0.26, 0), Vec3(0, -0.05, -0.10),
                    Vec3(0, -0.43, 0),  Vec3(0, -0.43, 0),     Vec3(0, -0.05, 0.10), Vec3(0, -0.43, 0),
                    Vec3(0, -0.43, 0)};
  s.foot_joint_ids = {13, 16};
  s.joint_pair_map = corresponding_pairs(17);
  s.mirror_map = {0, 1, 2, 3, 4, 8, 9, 10, 5, 6, 7, 14, 15, 16, 11, 12, 13};
  return s;
}

void to_json(nlohmann::json& j, const SkeletonSpec& s) {
  nlohmann::json offsets = nlohmann::json::array();
  for (const auto& v : s.rest_offsets) offsets.push_back({v.x(), v.y(), v.z()});
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : s.joint_pair_map) pairs.push_back({a, b});
  j = nlohmann::json{{"joint_names", s.joint_names},
                     {"parent_index", s.parent_index},
                     {"rest_offsets", offsets},
                     {"foot_joint_ids", s.foot_joint_ids},
                     {"joint_pair_map", pairs},
                     {"mirror_map", s.mirror_map}};
}

void from_json(const nlohmann::json& j, SkeletonSpec& s) {
  s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
  s.parent_index = j.at("parent_index").get<std::vector<int>>();
  s.rest_offsets.clear();
  for (const auto& v : j.at("rest_offsets")) s.rest_offsets.emplace_back(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  s.foot_joint_ids = j.at("foot_joint_ids").get<std::vector<int>>();
  s.joint_pair_map.clear();
  for (const auto& p : j.at("joint_pair_map")) s.joint_pair_map.emplace_back(p[0].get<int>(), p[1].get<int>());
  s.mirror_map = j.value("mirror_map", std::vector<int>{});
}

void orthonormalize_joint(double* block) {
  Eigen::Map<Vec3> f(block + kFwdOffset);
  Eigen::Map<Vec3> u(block + kUpOffset);
  const double fn = f.norm();
  if (!(fn > 1e-12)) {
    f = Vec3::UnitX();
  } else {
    f /= fn;
  }
  u -= u.dot(f) * f;
  const double un = u.norm();
  if (!(un > 1e-12)) {
    // Any unit vector orthogonal to f.
    Vec3 axis = std::abs(f.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitZ();
    u = (axis - axis.dot(f) * f).normalized();
  } else {
    u /= un;
  }
}

void Pose::orthonormalize() {
  for (int j = 0; j < joint_count(); ++j) {
    double block[kChannels];
    for (int k = 0; k < 3; ++k) {
      block[k] = positions[j][k];
      block[3 + k] = forward[j][k];
      block[6 + k] = up[j][k];
    }
    orthonormalize_joint(block);
    forward[j] = Vec3(block[3], block[4], block[5]);
    up[j] = Vec3(block[6], block[7], block[8]);
  }
}

std::vector<double> Pose::to_channels() const {
  std::vector<double> out(static_cast<std::size_t>(joint_count()) * kChannels);
  for (int j = 0; j < joint_count(); ++j) {
    for (int k = 0; k < 3; ++k) {
      out[j * kChannels + kPosOffset + k] = positions[j][k];
      out[j * kChannels + kFwdOffset + k] = forward[j][k];
      out[j * kChannels + kUpOffset + k] = up[j][k];
    }
  }
  return out;
}

Pose Pose::from_channels(const double* c, int joints) {
  Pose p(joints);
  for (int j = 0; j < joints; ++j) {
    const double* b = c + j * kChannels;
    p.positions[j] = Vec3(b[0], b[1], b[2]);
    p.forward[j] = Vec3(b[3], b[4], b[5]);
    p.up[j] = Vec3(b[6], b[7], b[8]);
  }
  return p;
}

}  // namespace xsib
