#pragma once

#include "xsib/core/motion.hpp"

namespace xsib {

struct FootContact {
  double height_threshold = 0.025;  // H, meters
  double lock_speed = 0.5;          // horizontal speed below which a grounded foot locks, m/s
};

/// Weight clamp(2 - 2^(h/H), 0, 1) applied to a foot's horizontal speed.
double foot_contact_weight(double height, double threshold);

/// Mean over frames 1..horizon-1, both characters and all foot joints of
/// horizontal speed (m/s) times the contact weight at the current frame.
/// `horizon` <= 0 uses the whole window.
double foot_slide(const MotionWindow& motion, const SkeletonSpec& skeleton, int horizon = 50,
                  double height_threshold = 0.025);

/// Holds a grounded, slowly moving foot at its lock-in horizontal position
/// until it lifts or speeds up. A lock segment is kept only if it does not
/// raise the weighted slide over the frames it touches, so the window's
/// foot_slide never increases. Non-foot joints are untouched.
MotionWindow foot_pin_postprocess(const MotionWindow& window, const SkeletonSpec& skeleton,
                                  const FootContact& contact = {});

}  // namespace xsib
