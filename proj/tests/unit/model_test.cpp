#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "generators.hpp"
#include "gradcheck.hpp"
#include "xsib/core/errors.hpp"
#include "xsib/model/losses.hpp"
#include "xsib/model/space_ops.hpp"
#include "xsib/nn/ops.hpp"

using namespace xsib;
using namespace xsib::model;
using namespace xsib::testing;
using nn::Shape;

namespace {

struct Batch {
  Tensor obs, keypose;
  std::vector<RigidTransform2D> roots;
  std::vector<TrainingClip> clips;
};

Batch make_batch(int count, std::uint64_t seed) {
  static const Dataset data = small_duets(11);
  Batch b;
  b.clips = clips(data, count, seed);
  std::vector<MotionWindow> windows;
  std::vector<KeyposeTarget> targets;
  for (const auto& c : b.clips) {
    windows.push_back(c.clip.slice(0, 20));
    targets.push_back(c.target);
  }
  b.obs = pack_characters(windows);
  b.keypose = packed_keypose_poses(targets);
  b.roots = packed_roots(targets);
  return b;
}

Tensor normal(std::mt19937_64& rng, Shape s, double std = 1.0) {
  std::normal_distribution<double> n(0, std);
  std::vector<double> v(nn::numel(s));
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(s), std::move(v));
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

}  // namespace

TEST_CASE("forward pass is bitwise repeatable for a fixed seed and epsilon") {
  const auto sk = SkeletonSpec::duet17();
  const Generator g1(sk, tiny_generator(), 5), g2(sk, tiny_generator(), 5);
  const auto b = make_batch(2, 1);
  std::mt19937_64 rng(3);
  const Tensor eps = normal(rng, {4, 3});
  const auto o1 = g1.forward(b.obs, b.keypose, b.roots, eps);
  const auto o2 = g2.forward(b.obs, b.keypose, b.roots, eps);
  CHECK(bitwise_equal(o1.raw, o2.raw));
  CHECK(bitwise_equal(o1.encoded.initial, o2.encoded.initial));
  CHECK(o1.raw.shape() == Shape{4, 20, 17, 9});
  for (double v : o1.raw.values()) REQUIRE(std::isfinite(v));
}

TEST_CASE("observation that does not match the skeleton is a configuration error") {
  const Generator g(SkeletonSpec::duet17(), tiny_generator(), 1);
  const Tensor obs = Tensor::zeros({2, 20, 16, 9});
  const Tensor kp = Tensor::zeros({2, 16, 9});
  CHECK_THROWS_AS(g.encode_individual(obs, kp), ConfigError);
  CHECK_THROWS_AS(g.encode_individual(Tensor::zeros({2, 19, 17, 9}), Tensor::zeros({2, 17, 9})), ConfigError);
}

TEST_CASE("reparameterization identities") {
  const Generator g(SkeletonSpec::duet17(), tiny_generator(), 2);
  const auto b = make_batch(2, 4);
  const auto enc = g.encode_individual(b.obs, b.keypose);
  const Tensor rel = g.counterpart_features(enc.initial, b.roots);
  std::mt19937_64 rng(9);

  const auto zero = g.condition_cross_space(rel, Tensor::zeros({4, 3}));
  CHECK(bitwise_equal(zero.z, zero.mu));

  const auto s1 = g.condition_cross_space(rel, normal(rng, {4, 3}));
  const auto s2 = g.condition_cross_space(rel, normal(rng, {4, 3}));
  CHECK(bitwise_equal(s1.mu, s2.mu));
  CHECK(bitwise_equal(s1.logvar, s2.logvar));
  CHECK_FALSE(bitwise_equal(s1.z, s2.z));

  for (std::size_t i = 0; i < s1.z.size(); ++i) {
    const double direct = s1.mu.values()[i] + s1.epsilon.values()[i] * std::exp(s1.logvar.values()[i] / 2);
    CHECK(s1.z.values()[i] == doctest::Approx(direct).epsilon(1e-15));
  }
  CHECK_THROWS_AS(g.condition_cross_space(rel, Tensor::zeros({4, 2})), ShapeError);
}

TEST_CASE("FiLM modulation arithmetic") {
  const Generator g(SkeletonSpec::duet17(), tiny_generator(), 3);
  const auto b = make_batch(1, 5);
  const auto enc = g.encode_individual(b.obs, b.keypose);
  const int N = 2, h = 6;
  Tensor modulated;

  g.modulate_and_decode(enc, {Tensor::full({N, 1, h}, 1.0), Tensor::zeros({N, 1, h})}, &modulated);
  CHECK(bitwise_equal(modulated, enc.features));

  g.modulate_and_decode(enc, {Tensor::zeros({N, 1, h}), Tensor::full({N, 1, h}, 0.7)}, &modulated);
  for (double v : modulated.values()) CHECK(v == 0.7);

  Encoded threes = enc;
  threes.features = Tensor::full(enc.features.shape(), 3.0);
  g.modulate_and_decode(threes, {Tensor::full({N, 1, h}, 2.0), Tensor::full({N, 1, h}, 1.0)}, &modulated);
  for (double v : modulated.values()) CHECK(v == 7.0);
}

TEST_CASE("identity FiLM makes the final window equal the stage-1 prediction") {
  Generator g(SkeletonSpec::duet17(), tiny_generator(), 4);
  g.film_identity_init();
  const auto b = make_batch(2, 6);
  std::mt19937_64 rng(1);
  const auto o = g.forward(b.obs, b.keypose, b.roots, normal(rng, {4, 3}));
  for (double v : o.film.gamma.values()) CHECK(v == 1.0);
  for (double v : o.film.beta.values()) CHECK(v == 0.0);
  CHECK(bitwise_equal(o.raw, o.encoded.initial));
}

TEST_CASE("with a silent decoder the output is the input advanced by the stride") {
  auto cfg = tiny_generator();
  cfg.dct_k = 20;  // full basis, so the skip path reconstructs exactly
  Generator g(SkeletonSpec::duet17(), cfg, 8);
  for (const char* name : {"dec.conv0.w", "dec.conv0.b"}) {
    Tensor t = g.params().get(name);
    for (double& v : t.mutable_values()) v = 0.0;
  }
  const auto b = make_batch(1, 7);
  const auto o = g.forward(b.obs, b.keypose, b.roots, Tensor::zeros({2, 3}));
  const int T = 20, l = 10, row = 17 * 9;
  const auto in = b.obs.values();
  const auto out = o.raw.values();
  double worst = 0;
  for (int n = 0; n < 2; ++n) {
    for (int t = 0; t < T; ++t) {
      const int src = std::min(t + l, T - 1);
      for (int k = 0; k < row; ++k) {
        worst = std::max(worst, std::abs(out[(n * T + t) * row + k] - in[(n * T + src) * row + k]));
      }
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("counterpart features agree with the pose-level transform") {
  const Generator g(SkeletonSpec::duet17(), tiny_generator(), 6);
  const auto b = make_batch(3, 8);
  const auto enc = g.encode_individual(b.obs, b.keypose);
  const Tensor rel = g.counterpart_features(enc.initial, b.roots);
  const auto windows = unpack_characters(enc.initial, 3);
  const auto rows = unpack_characters(rel, 3);
  const int root = SkeletonSpec::duet17().root_joint();
  for (int s = 0; s < 3; ++s) {
    MotionWindow keypose_window = windows[s];
    keypose_window.space = {Space{SpaceKind::Keypose, 0}, Space{SpaceKind::Keypose, 0}};
    for (int c = 0; c < 2; ++c) {
      const auto oracle = to_counterpart_space(keypose_window, b.clips[s].target, c, root);
      double worst = 0;
      for (int f = 0; f < 20; ++f)
        for (int j = 0; j < 17; ++j)
          for (int k = 0; k < 9; ++k)
            worst = std::max(worst, std::abs(oracle.joint(f, c, j)[k] - rows[s].joint(f, c, j)[k]));
      CHECK(worst < 1e-9);
    }
  }
}

TEST_CASE("yaw_transform matches rigid transforms and inverts") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_window(rng, 5, 4);
    const std::vector<RigidTransform2D> ts{random_transform(rng), random_transform(rng)};
    const Tensor packed = pack_characters({w});
    const Tensor moved = yaw_transform(packed, yaw_frames(ts), false);
    MotionWindow oracle = w;
    transform_character(oracle, 0, ts[0], false);
    transform_character(oracle, 1, ts[1], false);
    CHECK(max_abs_diff(pack_characters({oracle}).values(), moved.values()) < 1e-12);
    const Tensor back = yaw_transform(moved, yaw_frames(ts), true);
    CHECK(max_abs_diff(back.values(), packed.values()) < 1e-12);
  }
}

TEST_CASE("packing round trips and swap exchanges characters") {
  std::mt19937_64 rng(2);
  std::vector<MotionWindow> ws{random_window(rng, 3, 4), random_window(rng, 3, 4)};
  const Tensor p = pack_characters(ws);
  const auto back = unpack_characters(p, 2);
  for (int b = 0; b < 2; ++b) CHECK(max_abs_diff(back[b].data(), ws[b].data()) == 0.0);
  const auto swapped = unpack_characters(swap_characters(p), 2);
  CHECK(swapped[1].pose(2, 0).positions[3] == ws[1].pose(2, 1).positions[3]);
  CHECK_THROWS_AS(unpack_characters(p, 3), ShapeError);
}

TEST_CASE("skeleton adjacency is symmetric with self loops") {
  const auto sk = SkeletonSpec::duet17();
  const auto a = sk.normalized_adjacency();
  const int J = sk.joint_count();
  for (int i = 0; i < J; ++i) {
    CHECK(a[i * J + i] > 0);
    for (int j = 0; j < J; ++j) CHECK(a[i * J + j] == doctest::Approx(a[j * J + i]).epsilon(1e-15));
  }
}

TEST_CASE("graph convolution is equivariant to joint relabeling") {
  std::mt19937_64 rng(4);
  nn::ParamStore store;
  const nn::GraphConv gc(store, "g", 5, 3, rng);
  const int J = 6;
  const auto sk = SkeletonSpec::duet17();
  std::vector<double> adj(J * J);
  for (int i = 0; i < J; ++i)
    for (int j = 0; j <= i; ++j) adj[i * J + j] = adj[j * J + i] = uniform(rng, 0, 1);
  std::vector<int> perm(J);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Tensor x = normal(rng, {2, J, 5});
  std::vector<double> px(x.size()), padj(adj.size());
  for (int n = 0; n < 2; ++n)
    for (int j = 0; j < J; ++j)
      for (int c = 0; c < 5; ++c) px[(n * J + j) * 5 + c] = x.values()[(n * J + perm[j]) * 5 + c];
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j) padj[i * J + j] = adj[perm[i] * J + perm[j]];
  const Tensor y = gc(x, Tensor({J, J}, adj));
  const Tensor py = gc(Tensor({2, J, 5}, px), Tensor({J, J}, padj));
  for (int n = 0; n < 2; ++n)
    for (int j = 0; j < J; ++j)
      for (int c = 0; c < 3; ++c)
        CHECK(py.values()[(n * J + j) * 3 + c] == doctest::Approx(y.values()[(n * J + perm[j]) * 3 + c]).epsilon(1e-14));
}

TEST_CASE("loss_mse examples and loop oracle") {
  std::mt19937_64 rng(7);
  std::vector<Tensor> gt, pred, plus1;
  for (int p = 0; p < 3; ++p) {
    gt.push_back(normal(rng, {2, 4, 3, 9}));
    pred.push_back(normal(rng, {2, 4, 3, 9}));
    plus1.push_back(gt.back() + 1.0);
  }
  CHECK(loss_mse(gt, gt).item() == 0.0);
  CHECK(loss_mse(plus1, gt).item() == doctest::Approx(1.0).epsilon(1e-12));
  double total = 0;
  for (int p = 0; p < 3; ++p) {
    double s = 0;
    for (std::size_t i = 0; i < gt[p].size(); ++i) {
      const double d = pred[p].values()[i] - gt[p].values()[i];
      s += d * d;
    }
    total += s / gt[p].size();
  }
  CHECK(std::abs(loss_mse(pred, gt).item() - total / 3) < 1e-9);
  CHECK_THROWS_AS(loss_mse({gt[0]}, gt), ShapeError);
}

TEST_CASE("loss_kl examples") {
  CHECK(loss_kl(Tensor({1}, {0.0}), Tensor({1}, {0.0})).item() == 0.0);
  CHECK(loss_kl(Tensor({1}, {1.0}), Tensor({1}, {0.0})).item() == 0.5);
  CHECK(loss_kl(Tensor({1}, {0.0}), Tensor({1}, {std::log(2.0)})).item() ==
        doctest::Approx(0.5 * (1.0 - std::log(2.0))).epsilon(1e-12));
  CHECK(loss_kl(Tensor({1}, {0.0}), Tensor({1}, {std::log(2.0)})).item() == doctest::Approx(0.1534).epsilon(1e-3));
}

TEST_CASE("loss_kl is non-negative over random pairs") {
  std::mt19937_64 rng(10);
  std::vector<double> mu(100000), lv(100000);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    mu[i] = uniform(rng, -10, 10);
    lv[i] = uniform(rng, -10, 10);
  }
  const Tensor m({100000}, mu), l({100000}, lv);
  double worst = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double v = loss_kl(Tensor({1}, {mu[i]}), Tensor({1}, {lv[i]})).item();
    worst = std::min(worst, v);
  }
  CHECK(worst >= 0.0);
  CHECK(loss_kl(m, l).item() >= 0.0);
}

TEST_CASE("loss_inbetween weights") {
  const Tensor mse = Tensor::scalar(1.0), kl = Tensor::scalar(2.0);
  CHECK(loss_inbetween(mse, kl, {1, 0}).item() == 1.0);
  CHECK(loss_inbetween(mse, kl, {0, 1}).item() == 2.0);
  CHECK(loss_inbetween(mse, kl, {2, 0.5}).item() == 3.0);
}

TEST_CASE("gradient check of the in-betweening loss on a tiny model") {
  Generator g(SkeletonSpec::duet17(), tiny_generator(), 12);
  CHECK(g.params().parameter_count() < 5000);
  const auto b = make_batch(1, 13);
  std::mt19937_64 rng(14);
  const Tensor eps = normal(rng, {2, 3});
  const auto b2 = make_batch(1, 15);
  const Tensor gt = b2.obs;
  auto loss = [&] {
    const auto o = g.forward(b.obs, b.keypose, b.roots, eps);
    return loss_inbetween(loss_mse({o.raw}, {gt}), loss_kl(o.latent.mu, o.latent.logvar), {1.0, 0.5});
  };
  const auto tensors = g.params().tensors();
  std::vector<std::pair<int, std::size_t>> coords;
  // Every tensor once, then random picks up to 40.
  for (std::size_t i = 0; i < tensors.size(); ++i)
    coords.emplace_back(static_cast<int>(i), std::uniform_int_distribution<std::size_t>(0, tensors[i].size() - 1)(rng));
  while (coords.size() < 40) {
    const int t = std::uniform_int_distribution<int>(0, static_cast<int>(tensors.size()) - 1)(rng);
    coords.emplace_back(t, std::uniform_int_distribution<std::size_t>(0, tensors[t].size() - 1)(rng));
  }
  const auto r = grad_check(loss, tensors, coords, 1e-4, 1e-7);
  CHECK(r.checked >= 32);
  CHECK(r.worst_relative < 1e-3);
}

TEST_CASE("orthonormalized re-normalizes every joint block") {
  std::mt19937_64 rng(3);
  std::vector<double> v(2 * 9);
  for (auto& x : v) x = uniform(rng, -1, 1);
  const auto o = orthonormalized(v);
  for (int j = 0; j < 2; ++j) {
    const Vec3 f(o[j * 9 + 3], o[j * 9 + 4], o[j * 9 + 5]), u(o[j * 9 + 6], o[j * 9 + 7], o[j * 9 + 8]);
    CHECK(f.norm() == doctest::Approx(1.0));
    CHECK(u.norm() == doctest::Approx(1.0));
    CHECK(std::abs(f.dot(u)) < 1e-12);
    CHECK(o[j * 9] == v[j * 9]);
  }
}
