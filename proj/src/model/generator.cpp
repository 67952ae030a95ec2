#include "xsib/model/generator.hpp"

#include <nlohmann/json.hpp>

#include "xsib/core/dct.hpp"
#include "xsib/core/errors.hpp"
#include "xsib/model/space_ops.hpp"
#include "xsib/nn/ops.hpp"

namespace xsib::model {

using namespace nn;

void GeneratorConfig::validate() const {
  if (window < 2 || stride < 1 || stride > window) throw ConfigError("need 1 <= stride <= window");
  if (dct_k < 1 || dct_k > window) throw ConfigError("dct_k must lie in [1, window]");
  if (conv_channels.empty()) throw ConfigError("at least one conv layer");
  for (int c : conv_channels)
    if (c < 1) throw ConfigError("conv widths must be positive");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be odd");
  if (gcn_layers < 1 || gcn_hidden < 1 || latent_dim < 1 || film_hidden < 1) throw ConfigError("bad widths");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"window", c.window},         {"stride", c.stride},         {"dct_k", c.dct_k},
       {"conv_channels", c.conv_channels}, {"conv_kernel", c.conv_kernel}, {"gcn_layers", c.gcn_layers},
       {"gcn_hidden", c.gcn_hidden}, {"latent_dim", c.latent_dim}, {"film_hidden", c.film_hidden}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  const GeneratorConfig d;
  c.window = j.value("window", d.window);
  c.stride = j.value("stride", d.stride);
  c.dct_k = j.value("dct_k", c.window);
  c.conv_channels = j.value("conv_channels", d.conv_channels);
  c.conv_kernel = j.value("conv_kernel", d.conv_kernel);
  c.gcn_layers = j.value("gcn_layers", d.gcn_layers);
  c.gcn_hidden = j.value("gcn_hidden", d.gcn_hidden);
  c.latent_dim = j.value("latent_dim", d.latent_dim);
  c.film_hidden = j.value("film_hidden", d.film_hidden);
}

Generator::Generator(const SkeletonSpec& skeleton, GeneratorConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  skeleton.validate();
  joints_ = skeleton.joint_count();
  root_joint_ = skeleton.root_joint();
  const int J = joints_, K = config_.dct_k, T = config_.window;
  adjacency_ = Tensor({J, J}, skeleton.normalized_adjacency());
  auto basis = dct_basis(K, T);
  dct_ = Tensor({K, T}, basis);
  std::vector<double> inv(static_cast<std::size_t>(T) * K);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) inv[t * K + k] = basis[k * T + t];
  idct_ = Tensor({T, K}, inv);

  std::mt19937_64 rng(seed);
  const auto& ch = config_.conv_channels;
  const int ks = config_.conv_kernel, h = config_.gcn_hidden;
  int in = kChannels;
  for (std::size_t i = 0; i < ch.size(); ++i) {
    enc_conv_.emplace_back(params_, "enc.conv" + std::to_string(i), in, ch[i], ks, rng);
    in = ch[i];
  }
  int gin = ch.back() * K + kChannels;
  for (int i = 0; i < config_.gcn_layers; ++i) {
    enc_gcn_.emplace_back(params_, "enc.gcn" + std::to_string(i), gin, h, rng);
    gin = h;
  }

  rel_conv_ = Conv1d(params_, "rel.conv", kChannels, ch.front(), ks, rng);
  rel_gcn_ = GraphConv(params_, "rel.gcn", ch.front() * K, h, rng);
  rel_head_ = Linear(params_, "rel.head", h, 2 * config_.latent_dim, rng, 0.1);

  film1_ = Linear(params_, "film.fc0", config_.latent_dim, config_.film_hidden, rng);
  film2_ = Linear(params_, "film.fc1", config_.film_hidden, 2 * h, rng, 0.1);

  // Decoder mirrors the encoder: graph convs back to the flattened conv map,
  // then temporal convs down to 9 channels.
  for (int i = 0; i < config_.gcn_layers; ++i) {
    const int out = i + 1 == config_.gcn_layers ? ch.back() * K : h;
    dec_gcn_.emplace_back(params_, "dec.gcn" + std::to_string(i), h, out, rng);
  }
  for (int i = static_cast<int>(ch.size()) - 1; i >= 0; --i) {
    const int out = i == 0 ? kChannels : ch[i - 1];
    // The last layer starts small so the untrained decoder stays near the skip path.
    const double gain = i == 0 ? 0.1 : 1.0;
    dec_conv_.emplace_back(params_, "dec.conv" + std::to_string(i), ch[i], out, ks, rng, gain);
  }
}

Tensor Generator::per_joint_coefficients(const Tensor& x) const {
  // [N, T, J, 9] -> DCT over T -> [N·J, 9, K]
  const int N = x.dim(0), T = x.dim(1), J = x.dim(2), K = config_.dct_k;
  const Tensor coeff = left_matmul(dct_, reshape(x, {N, T, J * kChannels}));
  return reshape(permute(reshape(coeff, {N, K, J, kChannels}), {0, 2, 3, 1}), {N * J, kChannels, K});
}

Encoded Generator::encode_individual(const Tensor& obs, const Tensor& keypose) const {
  if (obs.rank() != 4 || obs.dim(1) != config_.window || obs.dim(2) != joints_ || obs.dim(3) != kChannels) {
    throw ConfigError("observation " + shape_str(obs.shape()) + " does not match the skeleton/window");
  }
  if (keypose.shape() != Shape{obs.dim(0), joints_, kChannels}) {
    throw ConfigError("keypose " + shape_str(keypose.shape()) + " does not match the observation");
  }
  const int N = obs.dim(0), J = joints_, K = config_.dct_k, T = config_.window, l = config_.stride;

  Tensor h = per_joint_coefficients(obs);
  for (const auto& conv : enc_conv_) h = elu(conv(h));
  h = concat({reshape(h, {N, J, -1}), keypose}, 2);
  for (const auto& g : enc_gcn_) h = elu(g(h, adjacency_));

  // Skip path: the input advanced by l frames, holding the last frame.
  std::vector<Tensor> parts{slice(obs, 1, l, T)};
  const Tensor last = slice(obs, 1, T - 1, T);
  for (int i = 0; i < l; ++i) parts.push_back(last);
  const Tensor shifted = l < T ? concat(parts, 1) : concat(std::vector<Tensor>(parts.begin() + 1, parts.end()), 1);
  const Tensor base = reshape(left_matmul(dct_, reshape(shifted, {N, T, J * kChannels})), {N, K, J, kChannels});

  Encoded e{h, base, Tensor()};
  e.initial = decode(h, base);
  return e;
}

Tensor Generator::decode(const Tensor& features, const Tensor& base) const {
  const int N = features.dim(0), J = joints_, K = config_.dct_k, T = config_.window;
  Tensor h = features;
  for (std::size_t i = 0; i < dec_gcn_.size(); ++i) {
    h = dec_gcn_[i](h, adjacency_);
    h = elu(h);
  }
  h = reshape(h, {N * J, config_.conv_channels.back(), K});
  for (std::size_t i = 0; i < dec_conv_.size(); ++i) {
    h = dec_conv_[i](h);
    if (i + 1 < dec_conv_.size()) h = elu(h);
  }
  // [N·J, 9, K] -> [N, K, J, 9]
  const Tensor coeff = permute(reshape(h, {N, J, kChannels, K}), {0, 3, 1, 2}) + base;
  return reshape(left_matmul(idct_, reshape(coeff, {N, K, J * kChannels})), {N, T, J, kChannels});
}

Tensor Generator::counterpart_features(const Tensor& initial, const std::vector<RigidTransform2D>& roots) const {
  const Tensor world = yaw_transform(initial, yaw_frames(roots), false);
  const Tensor other = swap_characters(world);
  return yaw_transform(world, root_frames(other, root_joint_), true);
}

LatentSample Generator::condition_cross_space(const Tensor& relative, const Tensor& epsilon) const {
  const int N = relative.dim(0), J = joints_, L = config_.latent_dim;
  if (epsilon.shape() != Shape{N, L}) throw ShapeError("epsilon must be " + shape_str({N, L}));
  Tensor h = elu(rel_conv_(per_joint_coefficients(relative)));
  h = elu(rel_gcn_(reshape(h, {N, J, -1}), adjacency_));
  const Tensor stats = rel_head_(mean_axis(h, 1));
  LatentSample s;
  s.mu = slice(stats, 1, 0, L);
  s.logvar = slice(stats, 1, L, 2 * L);
  s.epsilon = epsilon;
  s.z = s.mu + epsilon * exp(s.logvar * 0.5);
  return s;
}

FilmParams Generator::film(const Tensor& z) const {
  const int N = z.dim(0), h = config_.gcn_hidden;
  const Tensor out = film2_(elu(film1_(z)));
  return {reshape(slice(out, 1, 0, h), {N, 1, h}) + 1.0, reshape(slice(out, 1, h, 2 * h), {N, 1, h})};
}

Tensor Generator::modulate_and_decode(const Encoded& e, const FilmParams& f, Tensor* modulated) const {
  const Tensor m = e.features * f.gamma + f.beta;
  if (modulated) *modulated = m;
  return decode(m, e.base);
}

GeneratorOutput Generator::forward(const Tensor& obs, const Tensor& keypose, const std::vector<RigidTransform2D>& roots,
                                   const Tensor& epsilon) const {
  if (static_cast<int>(roots.size()) != obs.dim(0) || obs.dim(0) % 2 != 0) {
    throw ShapeError("forward needs one root per packed row and an even row count");
  }
  GeneratorOutput out;
  out.encoded = encode_individual(obs, keypose);
  out.relative = counterpart_features(out.encoded.initial, roots);
  out.latent = condition_cross_space(out.relative, epsilon);
  out.film = film(out.latent.z);
  out.raw = modulate_and_decode(out.encoded, out.film, &out.modulated);
  return out;
}

void Generator::film_identity_init() {
  for (auto* t : {&film2_.w, &film2_.b}) {
    auto v = t->mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
  }
}

std::vector<double> orthonormalized(std::span<const double> window) {
  std::vector<double> out(window.begin(), window.end());
  for (std::size_t i = 0; i + kChannels <= out.size(); i += kChannels) orthonormalize_joint(out.data() + i);
  return out;
}

}  // namespace xsib::model
