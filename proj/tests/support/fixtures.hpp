#pragma once

// Small models and data shared by the module tests.

#include <random>
#include <vector>

#include "xsib/core/sampling.hpp"
#include "xsib/core/synthetic.hpp"
#include "xsib/model/generator.hpp"
#include "xsib/refiner/refiner.hpp"

namespace xsib::testing {

inline model::GeneratorConfig tiny_generator() {
  model::GeneratorConfig g;
  g.conv_channels = {4, 4};
  g.gcn_layers = 1;
  g.gcn_hidden = 6;
  g.latent_dim = 3;
  g.film_hidden = 4;
  g.dct_k = 6;
  return g;
}

inline refiner::RefinerConfig tiny_refiner() {
  refiner::RefinerConfig r;
  r.conv_channels = {4};
  r.gcn_layers = 1;
  r.gcn_hidden = 8;
  return r;
}

inline Dataset small_duets(std::uint64_t seed, int sequences = 4, int length = 180, double noise = 0.0) {
  SyntheticConfig cfg;
  cfg.sequence_count = sequences;
  cfg.length = length;
  cfg.noise = noise;
  std::mt19937_64 rng(seed);
  return generate_synthetic_duet(cfg, rng);
}

inline std::vector<TrainingClip> clips(const Dataset& data, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TrainingClip> out;
  for (int i = 0; i < count; ++i) out.push_back(sample_training_clip(data, rng));
  return out;
}

}  // namespace xsib::testing
