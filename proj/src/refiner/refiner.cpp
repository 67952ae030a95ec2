#include "xsib/refiner/refiner.hpp"

#include <nlohmann/json.hpp>

#include "xsib/core/dct.hpp"
#include "xsib/core/errors.hpp"
#include "xsib/model/generator.hpp"
#include "xsib/model/losses.hpp"
#include "xsib/nn/ops.hpp"

namespace xsib::refiner {

using namespace nn;

void RefinerConfig::validate(int stride) const {
  if (segment_length < 1 || stride % segment_length != 0) {
    throw ConfigError("refiner segment_length must divide the rollout stride");
  }
  if (conv_channels.empty() || gcn_layers < 1 || gcn_hidden < 1) throw ConfigError("bad refiner widths");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) throw ConfigError("refiner kernel must be odd");
}

void to_json(nlohmann::json& j, const RefinerConfig& c) {
  j = {{"segment_length", c.segment_length}, {"conv_channels", c.conv_channels}, {"conv_kernel", c.conv_kernel},
       {"gcn_layers", c.gcn_layers},         {"gcn_hidden", c.gcn_hidden}};
}

void from_json(const nlohmann::json& j, RefinerConfig& c) {
  const RefinerConfig d;
  c.segment_length = j.value("segment_length", d.segment_length);
  c.conv_channels = j.value("conv_channels", d.conv_channels);
  c.conv_kernel = j.value("conv_kernel", d.conv_kernel);
  c.gcn_layers = j.value("gcn_layers", d.gcn_layers);
  c.gcn_hidden = j.value("gcn_hidden", d.gcn_hidden);
}

MotionRefiner::MotionRefiner(const SkeletonSpec& skeleton, RefinerConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate(config_.segment_length);
  skeleton.validate();
  joints_ = skeleton.joint_count();
  const int J = joints_, S = config_.segment_length;
  adjacency_ = Tensor({J, J}, skeleton.normalized_adjacency());
  const auto basis = dct_basis(S, S);
  dct_ = Tensor({S, S}, basis);
  std::vector<double> inv(basis.size());
  for (int k = 0; k < S; ++k)
    for (int t = 0; t < S; ++t) inv[t * S + k] = basis[k * S + t];
  idct_ = Tensor({S, S}, inv);

  std::mt19937_64 rng(seed);
  const auto& ch = config_.conv_channels;
  int in = kChannels;
  for (std::size_t i = 0; i < ch.size(); ++i) {
    enc_conv_.emplace_back(params_, "ref.enc" + std::to_string(i), in, ch[i], config_.conv_kernel, rng);
    in = ch[i];
  }
  const int flat = ch.back() * S;
  for (int i = 0; i < 2 * config_.gcn_layers; ++i) {
    const int gin = i == 0 ? flat : config_.gcn_hidden;
    const int gout = i + 1 == 2 * config_.gcn_layers ? flat : config_.gcn_hidden;
    gcn_.emplace_back(params_, "ref.gcn" + std::to_string(i), gin, gout, rng);
  }
  for (int i = static_cast<int>(ch.size()) - 1; i >= 0; --i) {
    const int out = i == 0 ? kChannels : ch[i - 1];
    dec_conv_.emplace_back(params_, "ref.dec" + std::to_string(i), ch[i], out, config_.conv_kernel, rng,
                           i == 0 ? 0.1 : 1.0);
  }
}

Tensor MotionRefiner::forward(const Tensor& x) const {
  const int N = x.dim(0), S = config_.segment_length, J = joints_;
  if (x.shape() != Shape{N, S, J, kChannels}) throw ShapeError("refiner input " + shape_str(x.shape()));
  const Tensor coeff = left_matmul(dct_, reshape(x, {N, S, J * kChannels}));  // [N, S, J·9]
  Tensor h = reshape(permute(reshape(coeff, {N, S, J, kChannels}), {0, 2, 3, 1}), {N * J, kChannels, S});
  for (const auto& c : enc_conv_) h = elu(c(h));
  h = reshape(h, {N, J, -1});
  for (std::size_t i = 0; i < gcn_.size(); ++i) {
    h = gcn_[i](h, adjacency_);
    h = elu(h);
  }
  h = reshape(h, {N * J, config_.conv_channels.back(), S});
  for (std::size_t i = 0; i < dec_conv_.size(); ++i) {
    h = dec_conv_[i](h);
    if (i + 1 < dec_conv_.size()) h = elu(h);
  }
  const Tensor delta = reshape(permute(reshape(h, {N, J, kChannels, S}), {0, 3, 1, 2}), {N, S, J * kChannels});
  return reshape(left_matmul(idct_, coeff + delta), {N, S, J, kChannels});
}

MotionWindow MotionRefiner::refine(const MotionWindow& window) const {
  const int S = config_.segment_length;
  if (window.frames() % S != 0 || window.joints() != joints_) {
    throw ShapeError("refine needs a multiple of " + std::to_string(S) + " frames on the refiner's skeleton");
  }
  NoGradGuard guard;
  const int segments = window.frames() / S;
  // Rows: (segment, character).
  std::vector<double> v(static_cast<std::size_t>(segments) * 2 * S * joints_ * kChannels);
  const std::size_t per_char = static_cast<std::size_t>(joints_) * kChannels;
  for (int s = 0; s < segments; ++s)
    for (int c = 0; c < 2; ++c)
      for (int t = 0; t < S; ++t)
        std::copy_n(window.joint(s * S + t, c, 0), per_char, v.data() + ((static_cast<std::size_t>(s) * 2 + c) * S + t) * per_char);
  const Tensor out = forward(Tensor({segments * 2, S, joints_, kChannels}, std::move(v)));
  MotionWindow result = window;
  const auto ov = model::orthonormalized(out.values());
  for (int s = 0; s < segments; ++s)
    for (int c = 0; c < 2; ++c)
      for (int t = 0; t < S; ++t)
        std::copy_n(ov.data() + ((static_cast<std::size_t>(s) * 2 + c) * S + t) * per_char, per_char,
                    result.joint(s * S + t, c, 0));
  return result;
}

Tensor loss_refine(const std::vector<Tensor>& refined, const std::vector<Tensor>& gt) {
  return model::loss_mse(refined, gt);
}

}  // namespace xsib::refiner
