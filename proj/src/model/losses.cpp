#include "xsib/model/losses.hpp"

#include "xsib/core/errors.hpp"
#include "xsib/nn/ops.hpp"

namespace xsib::model {

using namespace nn;

Tensor loss_mse(const std::vector<Tensor>& pred, const std::vector<Tensor>& gt) {
  if (pred.empty() || pred.size() != gt.size()) throw ShapeError("loss_mse needs matching, non-empty step lists");
  Tensor total = mse(pred[0], gt[0]);
  for (std::size_t p = 1; p < pred.size(); ++p) total = total + mse(pred[p], gt[p]);
  return total * (1.0 / static_cast<double>(pred.size()));
}

Tensor loss_kl(const Tensor& mu, const Tensor& logvar) {
  if (mu.shape() != logvar.shape()) throw ShapeError("mu and logvar shapes differ");
  return mean((logvar + 1.0 - square(mu) - exp(logvar))) * -0.5;
}

Tensor loss_inbetween(const Tensor& mse, const Tensor& kl, const InbetweenWeights& w) {
  return mse * w.mse + kl * w.kl;
}

}  // namespace xsib::model
