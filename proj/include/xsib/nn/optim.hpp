#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsib/nn/params.hpp"

namespace xsib::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const ParamStore& params, AdamConfig config);

  /// One update from the current gradients. Parameters without a gradient
  /// buffer are treated as having zero gradient.
  void step();
  long long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

  // Moment buffers, in the store's registration order (for checkpoints).
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void set_steps(long long t) { t_ = t; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long long t_ = 0;
};

/// Scales all gradients so their joint L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_grad_norm(const ParamStore& params, double max_norm);

}  // namespace xsib::nn
