#pragma once

#include <vector>

#include "xsib/nn/tensor.hpp"

namespace xsib::model {

using nn::Tensor;

/// Mean over rollout steps of the element-wise mean squared error.
Tensor loss_mse(const std::vector<Tensor>& pred, const std::vector<Tensor>& gt);

/// Mean over elements of -0.5 (1 + logvar - mu² - e^logvar).
Tensor loss_kl(const Tensor& mu, const Tensor& logvar);

struct InbetweenWeights {
  double mse = 1.0;
  double kl = 0.01;
};

Tensor loss_inbetween(const Tensor& mse, const Tensor& kl, const InbetweenWeights& w);

}  // namespace xsib::model
