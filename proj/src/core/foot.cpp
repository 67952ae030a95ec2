#include "xsib/core/foot.hpp"

#include <algorithm>
#include <cmath>

namespace xsib {

double foot_contact_weight(double height, double threshold) {
  return std::clamp(2.0 - std::pow(2.0, height / threshold), 0.0, 1.0);
}

namespace {

double horizontal_step(const MotionWindow& m, int f, int c, int j) {
  const double* a = m.joint(f, c, j);
  const double* b = m.joint(f - 1, c, j);
  return std::hypot(a[0] - b[0], a[2] - b[2]);
}

// Weighted slide of one foot over frames [from, to], unnormalized.
double foot_cost(const MotionWindow& m, int c, int j, int from, int to, double H) {
  double s = 0.0;
  for (int f = std::max(from, 1); f <= to && f < m.frames(); ++f) {
    s += horizontal_step(m, f, c, j) * m.frame_rate * foot_contact_weight(m.joint(f, c, j)[1], H);
  }
  return s;
}

}  // namespace

double foot_slide(const MotionWindow& m, const SkeletonSpec& skeleton, int horizon, double H) {
  const int frames = horizon > 0 ? std::min(horizon, m.frames()) : m.frames();
  if (frames < 2) return 0.0;
  double total = 0.0;
  int count = 0;
  for (int c = 0; c < 2; ++c) {
    for (int j : skeleton.foot_joint_ids) {
      total += foot_cost(m, c, j, 1, frames - 1, H);
      count += frames - 1;
    }
  }
  return total / count;
}

MotionWindow foot_pin_postprocess(const MotionWindow& in, const SkeletonSpec& skeleton, const FootContact& contact) {
  MotionWindow out = in;
  const double H = contact.height_threshold;
  const double max_step = contact.lock_speed / in.frame_rate;
  for (int c = 0; c < 2; ++c) {
    for (int j : skeleton.foot_joint_ids) {
      int f = 1;
      while (f < in.frames()) {
        // A lock starts at f - 1 when the foot is grounded there and at f and
        // moves slowly into f.
        const bool starts = in.joint(f - 1, c, j)[1] < H && in.joint(f, c, j)[1] < H &&
                            horizontal_step(in, f, c, j) < max_step;
        if (!starts) {
          ++f;
          continue;
        }
        const int lock = f - 1;
        int end = f;  // last locked frame
        while (end + 1 < in.frames() && in.joint(end + 1, c, j)[1] < H &&
               horizontal_step(in, end + 1, c, j) < max_step) {
          ++end;
        }
        const int touched_last = std::min(end + 1, in.frames() - 1);
        MotionWindow trial = out;
        const double* anchor = in.joint(lock, c, j);
        for (int k = lock + 1; k <= end; ++k) {
          double* b = trial.joint(k, c, j);
          b[0] = anchor[0];
          b[2] = anchor[2];
        }
        if (foot_cost(trial, c, j, lock + 1, touched_last, H) <= foot_cost(out, c, j, lock + 1, touched_last, H)) {
          out = std::move(trial);
        }
        f = end + 1;
      }
    }
  }
  return out;
}

}  // namespace xsib
