#pragma once

#include "xsib/core/motion.hpp"

namespace xsib {

inline constexpr int kMinIngestFrames = 120;

/// Reflects a sequence across the x = 0 plane: x negated on positions and on
/// the forward/up vectors, left/right joints swapped through mirror_map.
/// Throws ConfigError when the skeleton has no mirror map.
MotionWindow mirror_augment(const MotionWindow& sequence, const SkeletonSpec& skeleton);

/// Returns the dataset followed by the mirrored copy of each sequence.
Dataset with_mirrored(const Dataset& dataset);

/// Validation applied when data enters the pipeline: skeleton invariants,
/// finite values, and at least kMinIngestFrames frames per sequence.
void validate_ingest(const Dataset& dataset);

}  // namespace xsib
