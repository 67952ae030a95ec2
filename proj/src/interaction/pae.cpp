#include "xsib/interaction/pae.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>

#include "xsib/core/errors.hpp"
#include "xsib/nn/ops.hpp"

namespace xsib::interaction {

using namespace nn;

void PaeConfig::validate() const {
  if (input_channels < 1 || horizon < 4 || phase_channels < 1 || hidden < 1) throw ConfigError("bad PAE sizes");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("PAE kernel must be odd");
  if (!(input_scale > 0)) throw ConfigError("PAE input_scale must be > 0");
}

void to_json(nlohmann::json& j, const PaeConfig& c) {
  j = {{"input_channels", c.input_channels}, {"horizon", c.horizon}, {"phase_channels", c.phase_channels},
       {"hidden", c.hidden},                 {"kernel", c.kernel},   {"input_scale", c.input_scale}};
}

void from_json(const nlohmann::json& j, PaeConfig& c) {
  const PaeConfig d;
  c.input_channels = j.value("input_channels", d.input_channels);
  c.horizon = j.value("horizon", d.horizon);
  c.phase_channels = j.value("phase_channels", d.phase_channels);
  c.hidden = j.value("hidden", d.hidden);
  c.kernel = j.value("kernel", d.kernel);
  c.input_scale = j.value("input_scale", d.input_scale);
}

int PhaseParams::dominant_channel() const {
  return static_cast<int>(std::max_element(amplitude.begin(), amplitude.end()) - amplitude.begin());
}

PeriodicAutoencoder::PeriodicAutoencoder(PaeConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int P = config_.input_channels, H = config_.hidden, C = config_.phase_channels, N = config_.horizon,
            k = config_.kernel;
  // Bias-free encoder: a silent input maps to silent latent curves.
  enc0_ = Conv1d(params_, "pae.enc0", P, H, k, rng, 1.0, false);
  enc1_ = Conv1d(params_, "pae.enc1", H, C, k, rng, 1.0, false);
  phase_w_ = params_.add("pae.phase.w", {C, N, 2}, 1.0 / std::sqrt(static_cast<double>(N)), rng);
  phase_b_ = params_.add("pae.phase.b", {C, 2}, 0.0, rng);
  dec0_ = Conv1d(params_, "pae.dec0", C, H, k, rng);
  dec1_ = Conv1d(params_, "pae.dec1", H, P, k, rng);

  const int M = N / 2 + 1;
  std::vector<double> c(N * M), s(N * M), bins(M), t(N);
  for (int n = 0; n < N; ++n) {
    for (int m = 0; m < M; ++m) {
      const double a = 2.0 * std::numbers::pi * m * n / N;
      c[n * M + m] = std::cos(a);
      s[n * M + m] = -std::sin(a);
    }
    t[n] = (n - (N - 1) / 2.0) / N;
  }
  for (int m = 0; m < M; ++m) bins[m] = m;
  cos_ = Tensor({N, M}, c);
  sin_ = Tensor({N, M}, s);
  bins_ = Tensor({M}, bins);
  time_ = Tensor({N}, t);
}

PhaseTensors PeriodicAutoencoder::spectral(const Tensor& latent) const {
  const int B = latent.dim(0), C = latent.dim(1), N = latent.dim(2), M = N / 2 + 1;
  if (N != config_.horizon) throw ShapeError("latent horizon differs from the PAE horizon");
  const Tensor re = matmul(latent, cos_), im = matmul(latent, sin_);
  const Tensor power = square(re) + square(im);  // [B, C, M]

  // Peak bin (DC excluded) and its neighbours; the mask is data-dependent but
  // carries no gradient, the weights do.
  std::vector<double> mask(static_cast<std::size_t>(B) * C * M, 0.0);
  const auto pv = power.values();
  for (std::size_t r = 0; r < static_cast<std::size_t>(B) * C; ++r) {
    int peak = 1;
    for (int m = 2; m < M; ++m)
      if (pv[r * M + m] > pv[r * M + peak]) peak = m;
    for (int m = std::max(1, peak - 1); m <= std::min(M - 1, peak + 1); ++m) mask[r * M + m] = 1.0;
  }
  const Tensor window({B, C, M}, std::move(mask));
  const Tensor weighted = power * window;

  PhaseTensors out;
  out.latent = latent;
  out.frequency = sum_axis(weighted * bins_, 2) / (sum_axis(weighted, 2) + 1e-12);
  out.amplitude = sqrt(sum_axis(slice(power, 2, 1, M), 2) + 1e-12) * (2.0 / N);
  out.bias = reshape(slice(re, 2, 0, 1), {B, C}) * (1.0 / N);
  return out;
}

PhaseTensors PeriodicAutoencoder::encode(const Tensor& dynamics) const {
  if (dynamics.rank() != 3 || dynamics.dim(1) != config_.input_channels || dynamics.dim(2) != config_.horizon) {
    throw ShapeError("PAE input " + shape_str(dynamics.shape()) + " does not match its configuration");
  }
  const int B = dynamics.dim(0), C = config_.phase_channels, N = config_.horizon;
  const Tensor latent = enc1_(elu(enc0_(dynamics * config_.input_scale)));
  PhaseTensors out = spectral(latent);
  const Tensor xy = sum_axis(reshape(latent, {B, C, N, 1}) * phase_w_, 2) + phase_b_;  // [B, C, 2]
  out.phase = atan2(reshape(slice(xy, 2, 1, 2), {B, C}), reshape(slice(xy, 2, 0, 1), {B, C})) *
              (0.5 / std::numbers::pi);
  auto col = [B, C](const Tensor& t) { return reshape(t, {B, C, 1}); };
  const Tensor arg = (col(out.frequency) * time_ + col(out.phase)) * (2.0 * std::numbers::pi);
  out.h = col(out.amplitude) * sin(arg) + col(out.bias);
  return out;
}

Tensor PeriodicAutoencoder::decode(const Tensor& h) const {
  return dec1_(elu(dec0_(h))) * (1.0 / config_.input_scale);
}

Tensor PeriodicAutoencoder::reconstruction_loss(const Tensor& dynamics) const {
  return mse(decode(encode(dynamics).h), dynamics);
}

PhaseParams PeriodicAutoencoder::encode_params(const PjdDynamics& d) const {
  NoGradGuard guard;
  const auto t = encode(stack_pjd({d}));
  auto vec = [](const Tensor& x) { return std::vector<double>(x.values().begin(), x.values().end()); };
  PhaseParams p{vec(t.amplitude), vec(t.frequency), vec(t.bias), vec(t.phase)};
  // Report phase in [0, 1).
  for (auto& v : p.phase) v = v - std::floor(v);
  return p;
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) { j = {{"widths", c.widths}, {"kernel", c.kernel}}; }

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  const DiscriminatorConfig d;
  c.widths = j.value("widths", d.widths);
  c.kernel = j.value("kernel", d.kernel);
}

Discriminator::Discriminator(int in_channels, DiscriminatorConfig config, std::uint64_t seed, const std::string& prefix)
    : config_(std::move(config)) {
  if (config_.widths.empty()) throw ConfigError("discriminator needs at least one conv layer");
  std::mt19937_64 rng(seed);
  int in = in_channels;
  for (std::size_t i = 0; i < config_.widths.size(); ++i) {
    convs_.emplace_back(params_, prefix + ".conv" + std::to_string(i), in, config_.widths[i], config_.kernel, rng);
    in = config_.widths[i];
  }
  head_ = Linear(params_, prefix + ".head", in, 1, rng);
}

Tensor Discriminator::logits(const Tensor& h) const {
  Tensor x = h;
  for (const auto& c : convs_) x = elu(c(x));
  return reshape(head_(mean_axis(x, 2)), {h.dim(0)});
}

Tensor Discriminator::score(const Tensor& h) const { return sigmoid(logits(h)); }

AdversarialLoss loss_adversarial(const Tensor& real_logits, const Tensor& fake_logits) {
  // log D = -softplus(-logit), log(1 - D) = -softplus(logit).
  const Tensor log_real = mean(softplus(-real_logits)) * -1.0;
  const Tensor log_fake = mean(softplus(fake_logits)) * -1.0;
  AdversarialLoss out;
  out.value = log_real + log_fake;
  out.discriminator = out.value * -1.0;
  out.generator = mean(softplus(-fake_logits));
  return out;
}

double roc_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty() || neg.empty()) throw ShapeError("AUC needs both classes");
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * neg.size());
}

}  // namespace xsib::interaction
