#include "xsib/core/augment.hpp"

#include "xsib/core/errors.hpp"

namespace xsib {

MotionWindow mirror_augment(const MotionWindow& seq, const SkeletonSpec& skeleton) {
  if (skeleton.mirror_map.empty()) throw ConfigError("skeleton has no left/right mirror map");
  if (static_cast<int>(skeleton.mirror_map.size()) != seq.joints()) {
    throw ConfigError("mirror map size differs from sequence joint count");
  }
  MotionWindow out = seq;
  for (int f = 0; f < seq.frames(); ++f) {
    for (int c = 0; c < 2; ++c) {
      for (int j = 0; j < seq.joints(); ++j) {
        const double* src = seq.joint(f, c, skeleton.mirror_map[j]);
        double* dst = out.joint(f, c, j);
        for (int k = 0; k < kChannels; ++k) dst[k] = src[k];
        dst[kPosOffset] = -dst[kPosOffset];
        dst[kFwdOffset] = -dst[kFwdOffset];
        dst[kUpOffset] = -dst[kUpOffset];
      }
    }
  }
  return out;
}

Dataset with_mirrored(const Dataset& d) {
  Dataset out = d;
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    out.sequences.push_back(mirror_augment(d.sequences[i], d.skeleton));
    if (!d.meta.empty()) {
      auto m = d.meta[i];
      m["mirrored"] = true;
      out.meta.push_back(std::move(m));
    }
  }
  return out;
}

void validate_ingest(const Dataset& d) {
  d.validate();
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    if (d.sequences[i].frames() < kMinIngestFrames) {
      throw DataIntegrityError("sequence " + std::to_string(i) + " has " + std::to_string(d.sequences[i].frames()) +
                               " frames; at least " + std::to_string(kMinIngestFrames) + " required");
    }
  }
}

}  // namespace xsib
