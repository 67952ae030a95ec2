#include "xsib/core/sampling.hpp"

#include <cmath>

#include "xsib/core/errors.hpp"

namespace xsib {

TrainingClip make_training_clip(const MotionWindow& seq, int start, int key_offset, int root_joint,
                                const ClipSampling& cfg) {
  if (start < 0 || start + key_offset >= seq.frames() || start + cfg.clip_frames > seq.frames()) {
    throw SamplingError("clip at " + std::to_string(start) + " with keyframe offset " + std::to_string(key_offset) +
                        " exceeds sequence of " + std::to_string(seq.frames()) + " frames");
  }
  TrainingClip out;
  out.start = start;
  out.key_offset = key_offset;
  const int key = start + key_offset;
  out.target = KeyposeTarget::from_poses({seq.pose(key, 0), seq.pose(key, 1)}, root_joint, cfg.arrival_threshold);
  MotionWindow clip = seq.slice(start, cfg.clip_frames);
  clip.space = {Space{}, Space{}};
  out.clip = to_keypose_spaces(clip, out.target);
  return out;
}

TrainingClip sample_training_clip(const MotionWindow& seq, std::mt19937_64& rng, int root_joint,
                                  const ClipSampling& cfg) {
  const int last_start = seq.frames() - 1 - cfg.key_offset_max;
  if (last_start < 0) {
    throw SamplingError("sequence of " + std::to_string(seq.frames()) + " frames is shorter than " +
                        std::to_string(cfg.key_offset_max + 1));
  }
  std::uniform_int_distribution<int> start_dist(0, last_start);
  std::uniform_int_distribution<int> key_dist(cfg.key_offset_min, cfg.key_offset_max);
  const int start = start_dist(rng);
  const int key = key_dist(rng);
  return make_training_clip(seq, start, key, root_joint, cfg);
}

TrainingClip sample_training_clip(const Dataset& d, std::mt19937_64& rng, const std::vector<int>& indices,
                                  const ClipSampling& cfg) {
  std::vector<int> pool;
  const int n = static_cast<int>(d.sequences.size());
  if (indices.empty()) {
    for (int i = 0; i < n; ++i) pool.push_back(i);
  } else {
    pool = indices;
  }
  std::vector<int> eligible;
  for (int i : pool) {
    if (d.sequences.at(i).frames() > cfg.key_offset_max) eligible.push_back(i);
  }
  if (eligible.empty()) throw SamplingError("no sequence long enough for a training clip");
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  const int idx = eligible[pick(rng)];
  auto clip = sample_training_clip(d.sequences[idx], rng, d.skeleton.root_joint(), cfg);
  clip.sequence = idx;
  return clip;
}

DatasetSplit split_dataset(const Dataset& d) {
  DatasetSplit s;
  const int n = static_cast<int>(d.sequences.size());
  int held = static_cast<int>(std::round(0.05 * n));
  if (n >= 3) held = std::max(held, 1);
  const int train = n - 2 * held;
  for (int i = 0; i < n; ++i) {
    if (i < train) {
      s.train.push_back(i);
    } else if (i < train + held) {
      s.validation.push_back(i);
    } else {
      s.test.push_back(i);
    }
  }
  return s;
}

}  // namespace xsib
