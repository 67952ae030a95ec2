#pragma once

#include <random>

#include "xsib/core/transform.hpp"

namespace xsib {

struct ClipSampling {
  int clip_frames = 50;     // total frames per training sample
  int reference_frames = 20;  // leading frames used as input
  int key_offset_min = 50;  // keyframe offset from the clip's first frame
  int key_offset_max = 70;  // inclusive
  double arrival_threshold = 0.1;
};

/// A training sample: `clip` holds clip_frames frames with each character in
/// the coordinate space of its own keyframe root.
struct TrainingClip {
  MotionWindow clip;
  KeyposeTarget target;  // world-space keyframe and its root transforms
  int sequence = -1;
  int start = 0;
  int key_offset = 0;
};

/// Builds the sample for a fixed start frame and keyframe offset.
TrainingClip make_training_clip(const MotionWindow& sequence, int start, int key_offset, int root_joint,
                                const ClipSampling& cfg = {});

/// Draws a start frame and a keyframe offset uniformly. Throws SamplingError
/// when the sequence cannot hold start + key_offset_max.
TrainingClip sample_training_clip(const MotionWindow& sequence, std::mt19937_64& rng, int root_joint,
                                  const ClipSampling& cfg = {});

/// Picks a random sequence from `indices` (all sequences when empty), skipping
/// sequences that are too short.
TrainingClip sample_training_clip(const Dataset& dataset, std::mt19937_64& rng, const std::vector<int>& indices = {},
                                  const ClipSampling& cfg = {});

/// Deterministic split of sequence indices into train / validation / test
/// with 90/5/5 proportions (at least one sequence in each non-empty split).
struct DatasetSplit {
  std::vector<int> train, validation, test;
};
DatasetSplit split_dataset(const Dataset& dataset);

}  // namespace xsib
