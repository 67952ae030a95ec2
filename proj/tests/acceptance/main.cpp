// Acceptance run: one PASS/FAIL line per criterion, each measured against a
// pinned tolerance and a wall-clock budget.

#include <CLI11.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "desk.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "gradcheck.hpp"
#include "harness.hpp"
#include "xsib/core/dct.hpp"
#include "xsib/core/foot.hpp"
#include "xsib/core/transform.hpp"
#include "xsib/eval/metrics.hpp"
#include "xsib/eval/report.hpp"
#include "xsib/interaction/pjd.hpp"
#include "xsib/model/losses.hpp"
#include "xsib/model/space_ops.hpp"
#include "xsib/nn/ops.hpp"
#include "xsib/service/server.hpp"

// After the Eigen headers: resolv.h defines _res.
#include <httplib.h>
#include <sodium.h>

using namespace xsib;
using namespace xsib::acceptance;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

DeskOptions g_desk;

train::TrainConfig tiny_train_config() {
  train::TrainConfig c;
  c.model.generator = testing::tiny_generator();
  c.model.refiner = testing::tiny_refiner();
  c.model.pae.hidden = 8;
  c.model.pae.phase_channels = 4;
  c.model.discriminator.widths = {6, 6, 6};
  c.batch_size = 2;
  c.steps_per_epoch = 2;
  c.epochs = 4;
  c.pae_steps = 5;
  c.pae_batch = 4;
  c.learning_rate = 1e-3;
  return c;
}

std::vector<double> pairwise(const MotionWindow& w, int frame, int character) {
  std::vector<double> d;
  for (int i = 0; i < w.joints(); ++i)
    for (int j = i + 1; j < w.joints(); ++j)
      d.push_back((w.position(frame, character, i) - w.position(frame, character, j)).norm());
  return d;
}

double worst_pairwise_change(const MotionWindow& a, const MotionWindow& b, int character) {
  double worst = 0.0;
  for (int f = 0; f < a.frames(); ++f)
    worst = std::max(worst, testing::max_abs_diff(pairwise(a, f, character), pairwise(b, f, character)));
  return worst;
}

// ---------------------------------------------------------------------------

void dct_roundtrip(Outcome& o) {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> x(20);
    for (auto& v : x) v = testing::uniform(rng, -3, 3);
    const auto back = idct_1d(dct_1d(x, 20), 20);
    worst = std::max(worst, testing::max_abs_diff(x, back));
  }
  o.below("max abs error over 1000 channels", worst, 1e-6);
}

void transform_suite(Outcome& o) {
  std::mt19937_64 rng(2);
  const int J = 17, root = SkeletonSpec::duet17().root_joint();
  double rigid_kp = 0, rigid_cp = 0, trip_kp = 0, trip_cp = 0;
  int poses = 0;
  while (poses < 10000) {
    const auto w = testing::random_window(rng, 10, J, 2.0);
    auto target = KeyposeTarget::from_poses({testing::random_pose(rng, J), testing::random_pose(rng, J)}, root);
    target.set_root(0, testing::random_transform(rng));
    target.set_root(1, testing::random_transform(rng));
    const auto kp = to_keypose_spaces(w, target);
    for (int c = 0; c < 2; ++c) rigid_kp = std::max(rigid_kp, worst_pairwise_change(w, kp, c));
    trip_kp = std::max(trip_kp, testing::max_abs_diff(w.data(), keypose_spaces_to_world(kp, target).data()));
    for (int c = 0; c < 2; ++c) {
      const auto cp = to_counterpart_space(w, c, root);
      rigid_cp = std::max(rigid_cp, worst_pairwise_change(w, cp, c));
      // Independent inverse: place the character back at the reference root, frame by frame.
      MotionWindow back = cp;
      for (int f = 0; f < w.frames(); ++f) {
        const auto ref = root_transform_of(w.joint(f, 1 - c, root));
        for (int j = 0; j < J; ++j) {
          double* b = back.joint(f, c, j);
          const Vec3 p = ref.apply_point(Vec3(b[0], b[1], b[2]));
          const Vec3 fw = ref.apply_vector(Vec3(b[3], b[4], b[5]));
          const Vec3 up = ref.apply_vector(Vec3(b[6], b[7], b[8]));
          for (int k = 0; k < 3; ++k) {
            b[k] = p[k];
            b[3 + k] = fw[k];
            b[6 + k] = up[k];
          }
        }
      }
      trip_cp = std::max(trip_cp, testing::max_abs_diff(w.data(), back.data()));
    }
    poses += 2 * w.frames();
  }
  o.note(std::to_string(poses) + " random poses");
  o.below("keypose-space pairwise distance change", rigid_kp, 1e-6);
  o.below("counterpart-space pairwise distance change", rigid_cp, 1e-6);
  o.below("keypose-space round trip", trip_kp, 1e-6);
  o.below("counterpart-space round trip", trip_cp, 1e-6);
}

void kl_formula(Outcome& o) {
  using nn::Tensor;
  o.equal("kl(0, 0)", model::loss_kl(Tensor({1}, {0.0}), Tensor({1}, {0.0})).item(), 0.0);
  o.equal("kl(1, 0)", model::loss_kl(Tensor({1}, {1.0}), Tensor({1}, {0.0})).item(), 0.5);
  std::mt19937_64 rng(3);
  double lowest = 1e300;
  for (int i = 0; i < 100000; ++i) {
    const double mu = testing::uniform(rng, -10, 10), lv = testing::uniform(rng, -10, 10);
    lowest = std::min(lowest, model::loss_kl(Tensor({1}, {mu}), Tensor({1}, {lv})).item());
  }
  o.check("min over 1e5 random (mu, logvar)", lowest >= 0.0, Outcome::fmt(lowest) + " >= 0");
}

void foot_formula(Outcome& o) {
  const auto skel = SkeletonSpec::duet17();
  const double H = 0.025, step = 0.01, fps = 30.0;
  const struct {
    const char* name;
    double height, weight;
  } cases[] = {{"h = 0", 0.0, 1.0}, {"h = H", H, 0.0}, {"h = H/2", H / 2, 2.0 - std::sqrt(2.0)}};
  for (const auto& c : cases) {
    MotionWindow w(3, skel.joint_count(), 0, fps);
    for (int f = 0; f < 3; ++f)
      for (int ch = 0; ch < 2; ++ch)
        for (int j : skel.foot_joint_ids) w.set_position(f, ch, j, Vec3(step * f, c.height, 0.5 * ch));
    const double expected = step * fps * c.weight;
    const double got = foot_slide(w, skel, 3, H);
    o.check(std::string("slide at ") + c.name, std::abs(got - expected) <= 1e-9,
            "|" + Outcome::fmt(got) + " - " + Outcome::fmt(expected) + "| <= 1e-9");
    o.check(std::string("weight at ") + c.name, std::abs(foot_contact_weight(c.height, H) - c.weight) <= 1e-9,
            Outcome::fmt(foot_contact_weight(c.height, H)) + " vs " + Outcome::fmt(c.weight));
  }
}

std::vector<std::pair<int, std::size_t>> sample_coords(const std::vector<nn::Tensor>& tensors, std::size_t count,
                                                       std::mt19937_64& rng) {
  std::vector<std::pair<int, std::size_t>> coords;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    coords.emplace_back(static_cast<int>(i), std::uniform_int_distribution<std::size_t>(0, tensors[i].size() - 1)(rng));
  while (coords.size() < count) {
    const int t = std::uniform_int_distribution<int>(0, static_cast<int>(tensors.size()) - 1)(rng);
    coords.emplace_back(t, std::uniform_int_distribution<std::size_t>(0, tensors[t].size() - 1)(rng));
  }
  return coords;
}

void gradient_check(Outcome& o) {
  using nn::Tensor;
  const auto skel = SkeletonSpec::duet17();
  model::Generator g(skel, testing::tiny_generator(), 12);
  const auto params = g.params().parameter_count();
  o.below("generator parameters", static_cast<double>(params), 5000);

  const auto data = testing::small_duets(11);
  const auto cl = testing::clips(data, 2, 13);
  const auto obs = model::pack_characters({cl[0].clip.slice(0, 20)});
  const auto key = model::packed_keypose_poses({cl[0].target});
  const auto roots = model::packed_roots({cl[0].target});
  const Tensor gt = model::pack_characters({cl[0].clip.slice(10, 20)});
  std::mt19937_64 rng(14);
  std::vector<double> e(6);
  for (auto& v : e) v = std::normal_distribution<double>(0, 1)(rng);
  const Tensor eps({2, 3}, e);
  const auto tensors = g.params().tensors();

  auto inbetween = [&] {
    const auto out = g.forward(obs, key, roots, eps);
    return model::loss_inbetween(model::loss_mse({out.raw}, {gt}), model::loss_kl(out.latent.mu, out.latent.logvar),
                                 {1.0, 0.5});
  };
  const auto r1 = testing::grad_check(inbetween, tensors, sample_coords(tensors, 40, rng), 1e-4, 1e-7);
  o.at_least("L_inbetween sampled parameters", r1.checked, 32);
  o.below("L_inbetween worst relative error", r1.worst_relative, 1e-3);

  interaction::PaeConfig pc;
  pc.horizon = 19;
  pc.phase_channels = 3;
  pc.hidden = 5;
  const interaction::PeriodicAutoencoder pae(pc, 5);
  const interaction::Discriminator disc(3, {{6, 6}, 3}, 6);
  const auto pairs = SkeletonSpec::corresponding_pairs(skel.joint_count());
  const auto frames = model::yaw_frames(roots);
  const Tensor gt_world = model::yaw_transform(gt, frames, false);
  const Tensor real = disc.logits(pae.encode(interaction::pjd_tensor(nn::slice(gt_world, 0, 0, 1),
                                                                      nn::slice(gt_world, 0, 1, 2), pairs))
                                      .h)
                          .detach();
  auto adversarial = [&] {
    const auto out = g.forward(obs, key, roots, eps);
    const Tensor world = model::yaw_transform(out.raw, frames, false);
    const Tensor d = interaction::pjd_tensor(nn::slice(world, 0, 0, 1), nn::slice(world, 0, 1, 2), pairs);
    return interaction::loss_adversarial(real, disc.logits(pae.encode(d).h)).generator;
  };
  const auto r2 = testing::grad_check(adversarial, tensors, sample_coords(tensors, 40, rng), 1e-4, 1e-7);
  o.at_least("adversarial sampled parameters", r2.checked, 32);
  o.below("adversarial worst relative error", r2.worst_relative, 1e-3);
}

void pjd_properties(Outcome& o) {
  std::mt19937_64 rng(6);
  const auto pairs = SkeletonSpec::corresponding_pairs(17);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = testing::random_window(rng, 31, 17, 2.0);
    MotionWindow moved = w;
    const auto t = testing::random_transform(rng, 10.0);
    transform_character(moved, 0, t, false);
    transform_character(moved, 1, t, false);
    worst = std::max(worst, testing::max_abs_diff(interaction::compute_pjd(w, pairs, 30).offsets,
                                                  interaction::compute_pjd(moved, pairs, 30).offsets));
  }
  o.below("translation/rotation invariance", worst, 1e-9);
  MotionWindow w(2, 1);
  w.set_position(0, 1, 0, Vec3(1, 0, 0));
  w.set_position(1, 1, 0, Vec3(2, 0, 0));
  o.equal("1 m to 2 m offset", interaction::compute_pjd(w, {{0, 0}}, 1).offsets[0], 3.0);
}

void pae_recovery(Outcome& o) {
  SyntheticConfig sc;
  sc.sequence_count = 40;
  std::mt19937_64 rng(7);
  const Dataset data = generate_synthetic_duet(sc, rng);
  const auto split = split_dataset(data);
  Dataset train;
  train.skeleton = data.skeleton;
  for (int i : split.train) {
    train.sequences.push_back(data.sequences[i]);
    train.meta.push_back(data.meta[i]);
  }
  auto cfg = tiny_train_config();
  cfg.pae_steps = 1500;
  cfg.seed = 7;
  train::Trainer t(cfg, train);
  t.pretrain_pae();
  const auto& pae = t.model().pae;
  const auto& pairs = t.model().pairs();
  const int N = pae.config().horizon;

  std::vector<int> held = split.validation;
  held.insert(held.end(), split.test.begin(), split.test.end());
  std::vector<interaction::PjdDynamics> windows;
  double worst_bins = 0;
  for (int s : held) {
    const auto& seq = data.sequences[s];
    std::vector<double> freqs;
    for (int start = 0; start + N < seq.frames(); start += 10) {
      windows.push_back(interaction::compute_pjd(seq, pairs, N, start));
      const auto p = pae.encode_params(windows.back());
      freqs.push_back(p.frequency[p.dominant_channel()]);
    }
    std::nth_element(freqs.begin(), freqs.begin() + freqs.size() / 2, freqs.end());
    const double truth = data.meta[s]["interaction_hz"].get<double>() * N / data.frame_rate;
    const double bins = std::abs(freqs[freqs.size() / 2] - truth);  // one bin = one cycle per window
    o.note("sequence " + std::to_string(s) + ": recovered " + Outcome::fmt(freqs[freqs.size() / 2]) +
           " vs " + Outcome::fmt(truth) + " cycles per window");
    worst_bins = std::max(worst_bins, bins);
  }
  o.at_most("worst held-out frequency error (bins)", worst_bins, 1.0);

  const auto x = interaction::stack_pjd(windows);
  double mean = 0, var = 0;
  for (double v : x.values()) mean += v;
  mean /= static_cast<double>(x.size());
  for (double v : x.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double rec = pae.reconstruction_loss(x).item();
  o.below("held-out reconstruction / signal variance", rec / var, 0.2);
}

void overfit(Outcome& o) {
  const auto data = testing::small_duets(21, 4, 180);
  auto cfg = tiny_train_config();
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 4;
  cfg.pae_steps = 200;
  auto& g = cfg.model.generator;
  g.conv_channels = {32, 32};
  g.gcn_hidden = 32;
  g.dct_k = 20;
  cfg.seed = 4;
  cfg.lambda_adv = 0.0;  // a discriminator over four windows fights the fit
  train::Trainer t(cfg, data);
  t.pretrain_pae();
  const auto batch = testing::clips(data, cfg.batch_size, 22);
  double mse = 1e9;
  int steps = 0;
  for (; steps < 2000 && mse >= 1e-3; ++steps) {
    const auto L = t.rollout_train_step(batch);
    mse = L.mse;
    if (steps % 200 == 0 && g_desk.log) g_desk.log("overfit step " + std::to_string(steps) + " mse " + Outcome::fmt(mse));
  }
  o.note("converged after " + std::to_string(steps) + " steps");
  o.below("prediction MSE within 2000 steps", mse, 1e-3);
}

std::vector<Condition> arrival_conditions(const Desk& d, std::mt19937_64& rng) {
  std::vector<Condition> out;
  for (int s : d.heldout) {
    for (int start = 0; start + 20 + 50 < d.data.sequences[s].frames(); start += 20) {
      const int offset = std::uniform_int_distribution<int>(30, 50)(rng);
      out.push_back({s, start, {start + 20 + offset - 1}});
    }
  }
  return out;
}

std::vector<Condition> long_conditions(const Desk& d) {
  std::vector<Condition> out;
  for (int s : d.heldout) {
    for (int start = 0; start + 20 + 200 <= d.data.sequences[s].frames(); start += 40) {
      out.push_back({s, start, {start + 69, start + 119, start + 169, start + 219}});
    }
  }
  return out;
}

void desk_training(Outcome& o) {
  const Desk& d = desk(g_desk);
  o.note("desk models ready after " + Outcome::fmt(d.seconds) + " s");
  const auto& disc = *d.assets.discriminator;
  const int F = disc.config().horizon + 1;

  // (a) real held-out windows against their temporally shuffled copies
  std::mt19937_64 rng(g_desk.seed + 11);
  std::vector<MotionWindow> held;
  for (int s : d.heldout) held.push_back(d.data.sequences[s]);
  std::vector<MotionWindow> real, shuffled;
  for (int i = 0; i < 400; ++i) {
    real.push_back(eval::random_window(held, F, rng));
    shuffled.push_back(eval::temporally_shuffled(real.back(), rng));
  }
  o.above("(a) eval-discriminator AUC real vs shuffled", interaction::roc_auc(disc.score(real), disc.score(shuffled)),
          0.9);

  // 200-frame rollouts on held-out conditions
  const auto conds = long_conditions(d);
  service::RolloutConfig with_ref, without_ref;
  without_ref.use_refiner = false;
  std::vector<MotionWindow> full, full_raw, ablation, gt;
  for (std::size_t i = 0; i < conds.size(); ++i) {
    const auto& c = conds[i];
    const std::uint64_t seed = 500 + i;
    full.push_back(fixed_rollout(d.full, d.data, c, 20, seed, with_ref));
    full_raw.push_back(fixed_rollout(d.full, d.data, c, 20, seed, without_ref));
    ablation.push_back(fixed_rollout(d.no_gan, d.data, c, 20, seed, with_ref));
    gt.push_back(d.data.sequences[c.sequence].slice(c.start + 20, 200));
  }
  o.note(std::to_string(conds.size()) + " held-out 200-frame conditions");

  // (b) interaction score at 40 frames, adversarial model vs its no-GAN ablation
  auto interaction_at = [&](const std::vector<MotionWindow>& seqs) {
    double s = 0;
    for (const auto& m : seqs) s += eval::metric_interaction(m, disc, 40);
    return s / static_cast<double>(seqs.size());
  };
  const double inter_full = interaction_at(full), inter_ablation = interaction_at(ablation);
  o.note("interaction@40 gt " + Outcome::fmt(interaction_at(gt)));
  o.check("(b) interaction@40 full > no-GAN", inter_full > inter_ablation,
          Outcome::fmt(inter_full) + " > " + Outcome::fmt(inter_ablation));

  // (c) refiner on vs off
  auto bone_var = [&](const std::vector<MotionWindow>& seqs) {
    double s = 0;
    for (const auto& m : seqs) s += bone_length_variance(m, d.data.skeleton);
    return s / static_cast<double>(seqs.size());
  };
  const double bv_ref = bone_var(full), bv_raw = bone_var(full_raw);
  o.check("(c) bone-length variance refiner < no-refiner", bv_ref < bv_raw,
          Outcome::fmt(bv_ref) + " < " + Outcome::fmt(bv_raw));
  const auto& fx = *d.assets.features;
  const auto fgt = fx.features(gt, 200);
  const auto fid_ref = eval::metric_fid(fx.features(full, 200), fgt).value;
  const auto fid_raw = eval::metric_fid(fx.features(full_raw, 200), fgt).value;
  o.check("(c) FID refiner < no-refiner", fid_ref < fid_raw, Outcome::fmt(fid_ref) + " < " + Outcome::fmt(fid_raw));
  o.note("FID no-GAN " + Outcome::fmt(eval::metric_fid(fx.features(ablation, 200), fgt).value));

  // (d) arrival within max_segments
  std::mt19937_64 crng(g_desk.seed + 12);
  const auto arr = arrival_conditions(d, crng);
  int arrived = 0;
  double segs = 0;
  std::vector<double> misses;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto r = arrival_rollout(d.full, d.data, arr[i], 900 + i);
    if (r.arrived) {
      ++arrived;
      segs += r.segments;
    } else {
      misses.push_back(r.distance);
    }
  }
  if (arrived > 0) o.note("mean segments to arrival " + Outcome::fmt(segs / arrived));
  if (!misses.empty()) {
    std::sort(misses.begin(), misses.end());
    o.note("median final distance of misses " + Outcome::fmt(misses[misses.size() / 2]) + " m");
  }
  o.at_least("(d) arrival rate", static_cast<double>(arrived) / static_cast<double>(arr.size()), 0.9);
  o.note(std::to_string(arrived) + " of " + std::to_string(arr.size()) + " held-out conditions arrived");
}

void diversity(Outcome& o) {
  const Desk& d = desk(g_desk);
  Stopwatch sw;
  const auto conds = long_conditions(d);
  service::RolloutConfig stochastic, deterministic;
  deterministic.deterministic = true;
  double lowest = 1e300, highest_det = 0;
  const std::size_t n = std::min<std::size_t>(5, conds.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<MotionWindow> st, det;
    for (int k = 0; k < 10; ++k) {
      st.push_back(fixed_rollout(d.full, d.data, conds[i], 5, 7000 + 10 * i + k, stochastic));
      det.push_back(fixed_rollout(d.full, d.data, conds[i], 5, 7000 + 10 * i + k, deterministic));
    }
    lowest = std::min(lowest, eval::metric_diversity(st, 50));
    highest_det = std::max(highest_det, eval::metric_diversity(det, 50));
  }
  o.above("lowest stochastic diversity@50 over conditions", lowest, 0.0);
  o.equal("highest deterministic diversity@50", highest_det, 0.0);
  o.below("criterion runtime excluding shared training (s)", sw.seconds(), 300);
}

void metric_consistency(Outcome& o) {
  const auto data = testing::small_duets(31, 3, 240);
  const auto& skel = data.skeleton;
  double l2p = 0, l2q = 0, npss = 0;
  for (const auto& s : data.sequences) {
    l2p = std::max(l2p, eval::metric_l2p(s, s, 50));
    l2q = std::max(l2q, eval::metric_l2q(s, s, 50));
    npss = std::max(npss, eval::metric_npss(s, s, skel, 200).value);
  }
  o.at_most("L2P self", l2p, 1e-6);
  o.at_most("L2Q self", l2q, 1e-6);
  o.at_most("NPSS self", npss, 1e-6);
  eval::FeatureConfig fc;
  fc.steps = 50;
  eval::FeatureExtractor fx(skel, fc, 3);
  std::mt19937_64 rng(32);
  fx.fit(data.sequences, rng);
  const auto f = fx.features(data.sequences, 200);
  o.at_most("FID self", eval::metric_fid(f, f).value, 1e-6);

  // Closed form for commuting (diagonal) covariances:
  // |mu1 - mu2|^2 + sum (s1 + s2 - 2 sqrt(s1 s2)).
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 8;
    eval::GaussianFit a{Eigen::VectorXd(n), Eigen::MatrixXd::Zero(n, n)};
    eval::GaussianFit b{Eigen::VectorXd(n), Eigen::MatrixXd::Zero(n, n)};
    double expected = 0;
    for (int i = 0; i < n; ++i) {
      a.mean[i] = testing::uniform(rng, -2, 2);
      b.mean[i] = testing::uniform(rng, -2, 2);
      const double s1 = testing::uniform(rng, 0.1, 3), s2 = testing::uniform(rng, 0.1, 3);
      a.cov(i, i) = s1;
      b.cov(i, i) = s2;
      expected += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]) + s1 + s2 - 2 * std::sqrt(s1 * s2);
    }
    worst = std::max(worst, std::abs(eval::frechet_distance(a, b).value - expected));
  }
  o.at_most("FID vs two-Gaussian closed form", worst, 1e-6);
}

double loss_gap(const train::StepLosses& a, const train::StepLosses& b) {
  const double x[] = {a.total, a.mse, a.kl, a.initial, a.adv_generator, a.discriminator, a.refine};
  const double y[] = {b.total, b.mse, b.kl, b.initial, b.adv_generator, b.discriminator, b.refine};
  double m = 0;
  for (int i = 0; i < 7; ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

void determinism_resume(Outcome& o) {
  const auto data = testing::small_duets(41, 4, 180);
  auto cfg = tiny_train_config();
  cfg.pae_steps = 20;
  cfg.seed = 42;
  auto curve = [&](int steps) {
    train::Trainer t(cfg, data);
    t.pretrain_pae();
    std::vector<train::StepLosses> out;
    for (int i = 0; i < steps; ++i) out.push_back(t.train_step());
    return out;
  };
  const auto a = curve(8), b = curve(8);
  double gap = 0;
  for (int i = 0; i < 8; ++i) gap = std::max(gap, loss_gap(a[i], b[i]));
  o.equal("seeded loss curves, max difference", gap, 0.0);

  const auto path = (fs::temp_directory_path() / "xsib_acceptance_resume.xsib").string();
  {
    train::Trainer t(cfg, data);
    t.pretrain_pae();
    for (int i = 0; i < 4; ++i) t.train_step();
    t.save(path);
  }
  auto resumed = train::Trainer::resume(path, data);
  const auto next = resumed->train_step();
  fs::remove(path);
  o.at_most("resume vs uninterrupted at the next step", loss_gap(next, a[4]), 1e-6);
}

std::vector<double> decode_frames(const std::string& text) {
  std::vector<unsigned char> bytes(text.size());
  std::size_t len = 0;
  if (sodium_base642bin(bytes.data(), bytes.size(), text.c_str(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw Error("bad base64 frame payload");
  }
  std::vector<double> out(len / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 4 * i, 4);
    out[i] = f;
  }
  return out;
}

void service_contract(Outcome& o) {
  if (sodium_init() < 0) throw Error("libsodium init failed");
  auto cfg = desk_train_config(g_desk);
  auto model = std::make_shared<train::ModelBundle>(SkeletonSpec::duet17(), cfg.model, 5);
  const auto data = std::make_shared<Dataset>(testing::small_duets(51, 3, 240));
  const auto& seq = data->sequences[0];
  const json keys = {{"keyposes", {{{"pose", "0:80"}}, {{"pose", "0:140"}}}}, {"threshold", 0.05}, {"max_segments", 5}};

  // Offline batch
  const service::PoseLibrary lib(data);
  const auto ks = service::parse_keyposes(keys, lib, {seq.pose(19, 0), seq.pose(19, 1)}, 0);
  const auto off = service::run_offline(model, seq.slice(0, 20), ks, 77);
  const auto off_frames = off.motion.slice(20, off.motion.frames() - 20);

  // The same rollout streamed over HTTP
  service::SessionManager manager{service::PoseLibrary(data)};
  manager.add_model("m", model);
  service::HttpServer server(manager, 4);
  const int port = server.bind("127.0.0.1", 0);
  std::thread loop([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);
  const auto created = cli.Post("/sessions", R"({"seed":77,"initial":{"sequence":0,"start":0}})", "application/json");
  const auto id = json::parse(created->body)["session_id"].get<std::string>();
  cli.Post("/sessions/" + id + "/keyposes", keys.dump(), "application/json");
  const auto stream = cli.Get("/sessions/" + id + "/stream");
  server.stop();
  loop.join();
  std::vector<double> streamed;
  std::istringstream lines(stream ? stream->body : "");
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("data: ", 0) != 0) continue;
    const auto j = json::parse(line.substr(6));
    if (!j.contains("frames")) continue;
    const auto v = decode_frames(j["frames"].get<std::string>());
    streamed.insert(streamed.end(), v.begin(), v.end());
  }
  std::vector<double> expect;
  for (double v : off_frames.data()) expect.push_back(static_cast<float>(v));
  o.check("offline frames == streamed frames", streamed == expect,
          std::to_string(streamed.size()) + " vs " + std::to_string(expect.size()) + " values");
  o.above("emitted frames", static_cast<double>(off_frames.frames()), 0);

  // Isolation: 8 concurrent sessions against the same runs one at a time
  service::RolloutConfig rc;
  auto run = [&](int i) {
    service::Session s("s" + std::to_string(i), model, data->sequences[i % 3].slice(5 * i, 20), 900 + i, rc);
    s.set_keyposes({KeyposeTarget::from_poses({seq.pose(150, 0), seq.pose(150, 1)}, 0, 1e-9, 100)});
    std::vector<double> out;
    for (int k = 0; k < 6; ++k) {
      const auto st = s.step();
      out.insert(out.end(), st.frames.data().begin(), st.frames.data().end());
    }
    return out;
  };
  std::vector<std::vector<double>> sequential(8), parallel(8);
  for (int i = 0; i < 8; ++i) sequential[i] = run(i);
  std::vector<std::thread> threads;
  for (int i = 7; i >= 0; --i) threads.emplace_back([&, i] { parallel[i] = run(i); });
  for (auto& t : threads) t.join();
  int same = 0;
  for (int i = 0; i < 8; ++i) same += sequential[i] == parallel[i];
  o.equal("sessions identical under 8-way concurrency", same, 8);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string only, records_path;
  bool quiet = false;
  app.add_option("--only", only, "Comma-separated criterion ids, e.g. C01,C09");
  app.add_option("--cache", g_desk.cache, "Directory for reusable desk-scale models");
  app.add_option("--desk-steps", g_desk.steps, "Generator updates per desk-scale model");
  app.add_option("--heldout-steps", g_desk.heldout_steps);
  app.add_option("--eval-steps", g_desk.eval_steps);
  app.add_option("--desk-adv", g_desk.lambda_adv, "Adversarial weight of the full desk model");
  app.add_option("--records", records_path, "Write one JSON record per criterion");
  app.add_flag("--quiet", quiet, "No progress lines");
  CLI11_PARSE(app, argc, argv);
  if (!quiet) g_desk.log = [](const std::string& s) { std::cerr << "  .. " << s << std::endl; };

  const std::vector<Criterion> criteria = {
      {"C01", "DCT/IDCT round trip", 10, dct_roundtrip},
      {"C02", "transform suite", 30, transform_suite},
      {"C03", "KL formula", 10, kl_formula},
      {"C04", "foot-slide formula", 1, foot_formula},
      {"C05", "gradient check", 120, gradient_check},
      {"C06", "PJD properties", 10, pjd_properties},
      {"C07", "PAE recovery", 600, pae_recovery},
      {"C08", "overfit smoke test", 900, overfit},
      {"C09", "desk-scale training", 7200, desk_training},
      {"C10", "diversity mechanism", 0, diversity},
      {"C11", "metric self-consistency", 0, metric_consistency},
      {"C12", "determinism and resume", 0, determinism_resume},
      {"C13", "service contract", 0, service_contract},
  };
  std::set<std::string> wanted;
  for (std::size_t p = 0; p < only.size();) {
    const auto q = only.find(',', p);
    wanted.insert(only.substr(p, q == std::string::npos ? std::string::npos : q - p));
    p = q == std::string::npos ? only.size() : q + 1;
  }

  std::ofstream records;
  if (!records_path.empty()) records.open(records_path);
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    ++ran;
    Outcome o;
    Stopwatch sw;
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check("completed", false, std::string("threw: ") + e.what());
    }
    const double secs = sw.seconds();
    if (c.budget_s > 0) o.at_most("runtime (s)", secs, c.budget_s);
    const bool pass = o.pass();
    failed += !pass;
    std::string detail;
    for (const auto& ch : o.checks()) {
      if (!detail.empty()) detail += "; ";
      detail += (ch.pass ? "" : "!") + ch.what + ": " + ch.detail;
    }
    std::cout << (pass ? "PASS " : "FAIL ") << c.id << " " << c.title << " [" << Outcome::fmt(secs) << " s] "
              << detail << std::endl;
    for (const auto& n : o.notes()) std::cout << "     " << n << std::endl;
    if (records) {
      json checks = json::array();
      for (const auto& ch : o.checks()) checks.push_back({{"what", ch.what}, {"pass", ch.pass}, {"detail", ch.detail}});
      records << json{{"id", c.id}, {"title", c.title}, {"pass", pass}, {"seconds", secs}, {"checks", checks},
                      {"notes", o.notes()}}
                     .dump()
              << "\n";
    }
  }
  std::cout << (ran - failed) << " of " << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
