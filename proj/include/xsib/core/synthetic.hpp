#pragma once

#include <random>

#include <nlohmann/json_fwd.hpp>

#include "xsib/core/motion.hpp"

namespace xsib {

/// Parameters of the synthetic two-character sparring generator.
struct SyntheticConfig {
  int sequence_count = 16;
  int length = 240;             // frames, >= 120
  double frame_rate = 30.0;
  double freq_min_hz = 1.0;     // interaction frequency band
  double freq_max_hz = 2.0;
  double noise = 0.0;           // std of the smoothed joint-angle perturbation (radians)
  double distance_min = 1.0;    // mean inter-root distance band (meters)
  double distance_max = 1.3;
  double approach_min = 0.15;   // approach/retreat amplitude band (meters)
  double approach_max = 0.25;
  double drift_speed_max = 0.15;  // m/s
  double turn_rate_max = 0.15;    // rad/s

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticConfig& c);
void from_json(const nlohmann::json& j, SyntheticConfig& c);

/// Generates sparring duets on the duet17 skeleton. Inter-root distance follows
/// d0 + A sin(2π f t + φ0); the leading character punches on approach and the
/// other leans back and raises its guard, so limb motion is phase-locked to
/// the distance cycle. Meta records "interaction_hz" per sequence.
Dataset generate_synthetic_duet(const SyntheticConfig& config, std::mt19937_64& rng);

}  // namespace xsib
