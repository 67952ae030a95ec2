#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsib/eval/assets.hpp"

namespace xsib::eval {

/// Mean realism probability over (N + 1)-frame windows starting every
/// window_stride frames inside [0, horizon). Throws RangeError when the
/// horizon holds no window.
double metric_interaction(const MotionWindow& world, const EvalDiscriminator& disc, int horizon);

/// Values keyed by horizon in frames. npss100 is 100 × NPSS.
struct MetricReport {
  std::map<int, double> l2p, l2q, foot_slide, interaction, diversity, fid, npss100;
  std::vector<std::string> notes;  // skipped horizons, FID ridges, silent NPSS channels
};
void to_json(nlohmann::json& j, const MetricReport& r);

/// Table layout: one header row of metric@horizon columns, one value row.
std::string report_text(const MetricReport& r, const std::string& label);
/// One {"label", "metric", "horizon", "value"} record per entry.
std::vector<nlohmann::json> report_records(const MetricReport& r, const std::string& label);

struct EvalHorizons {
  std::vector<int> l2{30, 50};
  std::vector<int> foot{50};
  std::vector<int> interaction{40, 60, 80};
  std::vector<int> diversity{30, 50};
  std::vector<int> fid{100, 150, 200};
  std::vector<int> npss{100, 150, 200};
};

struct EvalInputs {
  // pred[i] and gt[i] are aligned world-space sequences; frame 0 is the first
  // synthesized frame.
  std::vector<MotionWindow> pred, gt;
  // Stochastic rollouts sharing one condition, for diversity.
  std::vector<std::vector<MotionWindow>> samples;
};

/// Averages every per-sequence metric over the sequences. Horizons longer
/// than the shortest sequence are skipped with a note. `workers` > 1 spreads
/// sequences over threads; the result is identical to the sequential one.
MetricReport evaluate(const EvalInputs& inputs, const EvalAssets& assets, const EvalHorizons& horizons = {},
                      int workers = 1);

}  // namespace xsib::eval
