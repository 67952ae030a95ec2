#include "xsib/core/motion.hpp"

#include <cmath>

#include "xsib/core/errors.hpp"

namespace xsib {

std::string to_string(const Space& s) {
  switch (s.kind) {
    case SpaceKind::World:
      return "world";
    case SpaceKind::Keypose:
      return "keypose[" + std::to_string(s.index) + "]";
    case SpaceKind::CounterpartRoot:
      return "counterpart-root[" + std::to_string(s.index) + "]";
  }
  return "unknown";
}

MotionWindow::MotionWindow(int frames, int joints, int start, double rate)
    : start_frame(start),
      frame_rate(rate),
      frames_(frames),
      joints_(joints),
      data_(static_cast<std::size_t>(frames) * 2 * joints * kChannels, 0.0) {
  if (frames < 0 || joints <= 0) throw ShapeError("motion window needs frames >= 0 and joints > 0");
}

Vec3 MotionWindow::position(int f, int c, int j) const {
  const double* b = joint(f, c, j);
  return Vec3(b[0], b[1], b[2]);
}

void MotionWindow::set_position(int f, int c, int j, const Vec3& p) {
  double* b = joint(f, c, j);
  b[0] = p.x();
  b[1] = p.y();
  b[2] = p.z();
}

Pose MotionWindow::pose(int frame, int character) const {
  return Pose::from_channels(joint(frame, character, 0), joints_);
}

void MotionWindow::set_pose(int frame, int character, const Pose& pose) {
  if (pose.joint_count() != joints_) throw ShapeError("pose joint count differs from window");
  const auto ch = pose.to_channels();
  std::copy(ch.begin(), ch.end(), joint(frame, character, 0));
}

MotionWindow MotionWindow::slice(int begin, int count) const {
  if (begin < 0 || count < 0 || begin + count > frames_) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside window of " + std::to_string(frames_) + " frames");
  }
  MotionWindow out(count, joints_, start_frame + begin, frame_rate);
  out.space = space;
  const std::size_t vpf = values_per_frame();
  std::copy(data_.begin() + begin * vpf, data_.begin() + (begin + count) * vpf, out.data_.begin());
  return out;
}

void MotionWindow::append(const MotionWindow& other) {
  if (other.joints_ != joints_) throw ShapeError("append: joint count mismatch");
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  frames_ += other.frames_;
}

bool MotionWindow::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void MotionWindow::require_finite(const char* what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      const std::size_t vpf = values_per_frame();
      throw DataIntegrityError(std::string(what) + ": non-finite value at frame " + std::to_string(i / vpf) +
                               ", value index " + std::to_string(i % vpf));
    }
  }
}

std::size_t Dataset::total_frames() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.frames();
  return n;
}

void Dataset::validate() const {
  skeleton.validate();
  if (!meta.empty() && meta.size() != sequences.size()) throw ConfigError("metadata count differs from sequence count");
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (sequences[i].joints() != skeleton.joint_count()) {
      throw ShapeError("sequence " + std::to_string(i) + " joint count differs from skeleton");
    }
    sequences[i].require_finite(("sequence " + std::to_string(i)).c_str());
  }
}

double bone_length_variance(const MotionWindow& m, const SkeletonSpec& skeleton) {
  const auto bones = skeleton.bones();
  if (bones.empty() || m.frames() == 0) return 0.0;
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (const auto& [p, j] : bones) {
      double mean = 0.0, sq = 0.0;
      for (int f = 0; f < m.frames(); ++f) {
        const double len = (m.position(f, c, j) - m.position(f, c, p)).norm();
        mean += len;
        sq += len * len;
      }
      mean /= m.frames();
      total += std::max(0.0, sq / m.frames() - mean * mean);
    }
  }
  return total / (2.0 * bones.size());
}

}  // namespace xsib
