// Command-line front end: data preparation, training, evaluation, offline
// synthesis and the streaming server.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "xsib/core/augment.hpp"
#include "xsib/core/container.hpp"
#include "xsib/core/errors.hpp"
#include "xsib/core/synthetic.hpp"
#include "xsib/eval/assets.hpp"
#include "xsib/eval/report.hpp"
#include "xsib/interaction/pjd.hpp"
#include "xsib/service/server.hpp"
#include "xsib/service/session.hpp"
#include "xsib/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xsib;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

bool is_json_path(const std::string& path) { return fs::path(path).extension() == ".json"; }

// Plain-JSON motion: {skeleton, frame_rate, sequences: [{meta, frames: [[2·J·9 values], ...]}]}.
Dataset dataset_from_json(const json& j) {
  Dataset d;
  d.skeleton = j.at("skeleton").get<SkeletonSpec>();
  d.frame_rate = j.value("frame_rate", 30.0);
  const int joints = d.skeleton.joint_count();
  for (const auto& s : j.at("sequences")) {
    const auto& frames = s.at("frames");
    MotionWindow w(static_cast<int>(frames.size()), joints, 0, d.frame_rate);
    std::size_t at = 0;
    for (const auto& f : frames) {
      const auto values = f.get<std::vector<double>>();
      if (values.size() != w.values_per_frame()) {
        throw ShapeError("frame " + std::to_string(at / w.values_per_frame()) + " holds " +
                         std::to_string(values.size()) + " values, expected " + std::to_string(w.values_per_frame()));
      }
      std::copy(values.begin(), values.end(), w.data().begin() + at);
      at += values.size();
    }
    d.sequences.push_back(std::move(w));
    d.meta.push_back(s.value("meta", json::object()));
  }
  return d;
}

json dataset_to_json(const Dataset& d) {
  json seqs = json::array();
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    const auto& w = d.sequences[i];
    json frames = json::array();
    const auto n = w.values_per_frame();
    for (int f = 0; f < w.frames(); ++f) {
      const auto begin = w.data().begin() + static_cast<std::ptrdiff_t>(f * n);
      frames.push_back(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(n)));
    }
    seqs.push_back({{"meta", i < d.meta.size() ? d.meta[i] : json::object()}, {"frames", frames}});
  }
  return {{"skeleton", d.skeleton}, {"frame_rate", d.frame_rate}, {"sequences", seqs}};
}

Dataset load_motion(const std::string& path) {
  return is_json_path(path) ? dataset_from_json(read_json(path)) : read_container(path);
}

void save_motion(const std::string& path, const Dataset& d) {
  if (is_json_path(path)) {
    write_text(path, dataset_to_json(d).dump());
  } else {
    write_container(path, d);
  }
}

void dump_pjd(const std::string& path, const Dataset& d, int horizon) {
  const auto& seq = d.sequences.at(0);
  const int n = std::min(horizon, seq.frames() - 1);
  write_text(path, interaction::pjd_csv(interaction::compute_pjd(seq, d.skeleton.joint_pair_map, n)));
}

std::shared_ptr<const train::ModelBundle> load_model(const std::string& path) {
  return train::ModelBundle::from_checkpoint(nn::read_checkpoint(path));
}

eval::EvalInputs aligned(const Dataset& pred, const Dataset& gt, int offset) {
  if (pred.sequences.size() != gt.sequences.size()) {
    throw ConfigError("pred holds " + std::to_string(pred.sequences.size()) + " sequences, gt " +
                      std::to_string(gt.sequences.size()));
  }
  eval::EvalInputs in;
  for (std::size_t i = 0; i < gt.sequences.size(); ++i) {
    const auto& p = pred.sequences[i];
    const auto& g = gt.sequences[i];
    const int n = std::min(p.frames(), g.frames()) - offset;
    if (n < 1) throw ConfigError("sequence " + std::to_string(i) + " has no frames past the offset");
    in.pred.push_back(p.slice(offset, n));
    in.gt.push_back(g.slice(offset, n));
  }
  return in;
}

void emit_report(const eval::MetricReport& r, const std::string& label, const std::string& path) {
  std::string text = eval::report_text(r, label);
  if (!path.empty()) {
    write_text(path, text);
    std::ofstream records(path + ".jsonl");
    for (const auto& rec : eval::report_records(r, label)) records << rec.dump() << "\n";
  }
  std::cout << text;
}

std::function<void()> stop_server;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-character motion in-betweening toolkit"};
  app.require_subcommand(1);

  // data
  auto* data = app.add_subcommand("data", "Motion container utilities");
  data->require_subcommand(1);
  std::string in_path, out_path, config_path, pjd_path;
  std::uint64_t seed = 0;
  int pjd_horizon = 30;

  auto* convert = data->add_subcommand("convert", "Convert between JSON motion and the binary container");
  convert->add_option("--in", in_path, "Input (.json or container)")->required();
  convert->add_option("--out", out_path, "Output (.json or container)")->required();

  auto* validate = data->add_subcommand("validate", "Check a motion file for ingestion");
  validate->add_option("--in", in_path)->required();
  validate->add_option("--dump-pjd", pjd_path, "Write the PJD window of sequence 0 as CSV");
  validate->add_option("--pjd-horizon", pjd_horizon);

  auto* mirror = data->add_subcommand("mirror", "Append mirrored copies of every sequence");
  mirror->add_option("--in", in_path)->required();
  mirror->add_option("--out", out_path)->required();

  auto* synth_data = data->add_subcommand("synth", "Generate synthetic sparring duets");
  synth_data->add_option("--config", config_path, "Synthetic generator JSON");
  synth_data->add_option("--seed", seed);
  synth_data->add_option("--out", out_path)->required();
  synth_data->add_option("--dump-pjd", pjd_path);
  synth_data->add_option("--pjd-horizon", pjd_horizon);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train generator, discriminator and refiner");
  std::string data_path, resume_path;
  std::optional<std::uint64_t> train_seed;
  train_cmd->add_option("--config", config_path, "Training config JSON");
  train_cmd->add_option("--data", data_path)->required();
  train_cmd->add_option("--out", out_path, "Output directory")->required();
  train_cmd->add_option("--resume", resume_path);
  train_cmd->add_option("--seed", train_seed);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string pred_path, gt_path, report_path, assets_path, label = "model";
  int offset = 20, workers = 1;
  eval_cmd->add_option("--pred", pred_path)->required();
  eval_cmd->add_option("--gt", gt_path)->required();
  eval_cmd->add_option("--assets", assets_path, "Evaluation assets from eval-prep")->required();
  eval_cmd->add_option("--report", report_path);
  eval_cmd->add_option("--offset", offset, "Leading conditioning frames to skip");
  eval_cmd->add_option("--label", label);
  eval_cmd->add_option("--workers", workers);

  auto* prep_cmd = app.add_subcommand("eval-prep", "Train the FID feature extractor and eval discriminator");
  std::string fakes_path;
  prep_cmd->add_option("--data", data_path)->required();
  prep_cmd->add_option("--fakes", fakes_path, "Motion from a held-out generator, used as negatives");
  prep_cmd->add_option("--config", config_path, "{features, discriminator} JSON");
  prep_cmd->add_option("--out", out_path)->required();
  prep_cmd->add_option("--seed", seed);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Offline rollout toward a keypose list");
  std::string ckpt_path, keyposes_path;
  int sequence = 0, start = 0;
  bool no_refiner = false, deterministic = false, emit_only = false, no_foot_pin = false, blend = false;
  synth_cmd->add_option("--checkpoint", ckpt_path)->required();
  synth_cmd->add_option("--in", in_path, "Motion holding the initial clip and library poses")->required();
  synth_cmd->add_option("--keyposes", keyposes_path, "Keypose list JSON")->required();
  synth_cmd->add_option("--out", out_path)->required();
  synth_cmd->add_option("--sequence", sequence);
  synth_cmd->add_option("--start", start);
  synth_cmd->add_option("--seed", seed);
  synth_cmd->add_flag("--no-refiner", no_refiner);
  synth_cmd->add_flag("--deterministic", deterministic);
  synth_cmd->add_flag("--refine-emit-only", emit_only);
  synth_cmd->add_flag("--no-foot-pin", no_foot_pin);
  synth_cmd->add_flag("--blend", blend);
  synth_cmd->add_option("--gt", gt_path, "Ground truth aligned with the input sequence");
  synth_cmd->add_option("--assets", assets_path);
  synth_cmd->add_option("--report", report_path);
  synth_cmd->add_option("--dump-pjd", pjd_path);
  synth_cmd->add_option("--pjd-horizon", pjd_horizon);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP session server");
  std::string host = "127.0.0.1";
  int port = 8080, threads = 16;
  std::vector<std::string> checkpoints;
  serve_cmd->add_option("--checkpoint", checkpoints, "Checkpoint path, repeatable; id is the file stem")->required();
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--poses", data_path, "Pose library motion file (synthetic duets if absent)");
  serve_cmd->add_option("--threads", threads);

  auto* config_cmd = app.add_subcommand("config", "Print a default config as JSON");
  std::string config_kind;
  config_cmd->add_option("kind", config_kind, "train | synthetic | eval-prep | rollout")
      ->required()
      ->check(CLI::IsMember({"train", "synthetic", "eval-prep", "rollout"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (config_cmd->parsed()) {
      json j;
      if (config_kind == "train") j = train::TrainConfig{};
      if (config_kind == "synthetic") j = SyntheticConfig{};
      if (config_kind == "eval-prep") j = {{"features", eval::FeatureConfig{}}, {"discriminator", eval::EvalDiscriminatorConfig{}}};
      if (config_kind == "rollout") j = service::RolloutConfig{};
      std::cout << j.dump(2) << "\n";
    } else if (convert->parsed()) {
      const auto d = load_motion(in_path);
      validate_ingest(d);
      save_motion(out_path, d);
    } else if (validate->parsed()) {
      const auto d = load_motion(in_path);
      validate_ingest(d);
      std::cout << json{{"sequences", d.sequences.size()},
                        {"frames", d.total_frames()},
                        {"joints", d.skeleton.joint_count()},
                        {"frame_rate", d.frame_rate}}
                       .dump()
                << "\n";
      if (!pjd_path.empty()) dump_pjd(pjd_path, d, pjd_horizon);
    } else if (mirror->parsed()) {
      const auto d = load_motion(in_path);
      validate_ingest(d);
      save_motion(out_path, with_mirrored(d));
    } else if (synth_data->parsed()) {
      SyntheticConfig cfg;
      if (!config_path.empty()) cfg = read_json(config_path).get<SyntheticConfig>();
      cfg.validate();
      std::mt19937_64 rng(seed);
      const auto d = generate_synthetic_duet(cfg, rng);
      save_motion(out_path, d);
      if (!pjd_path.empty()) dump_pjd(pjd_path, d, pjd_horizon);
    } else if (train_cmd->parsed()) {
      const auto d = load_motion(data_path);
      validate_ingest(d);
      fs::create_directories(out_path);
      std::unique_ptr<train::Trainer> trainer;
      if (!resume_path.empty()) {
        trainer = train::Trainer::resume(resume_path, d);
      } else {
        train::TrainConfig cfg;
        if (!config_path.empty()) cfg = read_json(config_path).get<train::TrainConfig>();
        if (train_seed) cfg.seed = *train_seed;
        cfg.validate();
        trainer = std::make_unique<train::Trainer>(cfg, d);
      }
      const auto ckpt = (fs::path(out_path) / "checkpoint.xsib").string();
      std::ofstream metrics(fs::path(out_path) / "metrics.jsonl", std::ios::app);
      trainer->run([&](const json& record) {
        std::cout << record.dump() << std::endl;
        metrics << record.dump() << std::endl;
        trainer->save(ckpt);
      });
      trainer->save(ckpt);
    } else if (eval_cmd->parsed()) {
      const auto assets = eval::EvalAssets::load(assets_path);
      const auto inputs = aligned(load_motion(pred_path), load_motion(gt_path), offset);
      emit_report(eval::evaluate(inputs, assets, {}, workers), label, report_path);
    } else if (prep_cmd->parsed()) {
      const auto d = load_motion(data_path);
      validate_ingest(d);
      eval::FeatureConfig fc;
      eval::EvalDiscriminatorConfig dc;
      if (!config_path.empty()) {
        const auto j = read_json(config_path);
        if (j.contains("features")) fc = j["features"].get<eval::FeatureConfig>();
        if (j.contains("discriminator")) dc = j["discriminator"].get<eval::EvalDiscriminatorConfig>();
      }
      std::mt19937_64 rng(seed);
      eval::EvalAssets assets;
      assets.skeleton = d.skeleton;
      assets.features = std::make_unique<eval::FeatureExtractor>(d.skeleton, fc, seed);
      assets.discriminator = std::make_unique<eval::EvalDiscriminator>(d.skeleton, dc, seed + 1);
      const double rec = assets.features->fit(d.sequences, rng);
      std::vector<MotionWindow> fakes;
      if (!fakes_path.empty()) {
        const auto f = load_motion(fakes_path);
        for (int i = 0; i < 256; ++i) fakes.push_back(eval::random_window(f.sequences, dc.horizon + 1, rng));
      }
      const double loss = assets.discriminator->fit(d.sequences, fakes, rng);
      assets.save(out_path);
      std::cout << json{{"feature_reconstruction", rec}, {"discriminator_loss", loss}}.dump() << "\n";
    } else if (synth_cmd->parsed()) {
      auto model = load_model(ckpt_path);
      const auto source = load_motion(in_path);
      const service::PoseLibrary library(std::make_shared<Dataset>(source));
      const int T = model->config().generator.window;
      const auto initial = library.clip(sequence, start, T);
      const auto keyposes = service::parse_keyposes(read_json(keyposes_path), library,
                                                    {initial.pose(T - 1, 0), initial.pose(T - 1, 1)},
                                                    model->skeleton().root_joint());
      service::RolloutConfig rc;
      rc.use_refiner = !no_refiner;
      rc.deterministic = deterministic;
      rc.refine_emit_only = emit_only;
      rc.foot_pin = !no_foot_pin;
      rc.blend = blend;
      const auto result = service::run_offline(model, initial, keyposes, seed, rc);
      Dataset out;
      out.skeleton = model->skeleton();
      out.frame_rate = source.frame_rate;
      out.sequences.push_back(result.motion);
      json steps = json::array();
      for (const auto& st : result.steps) {
        steps.push_back({{"status", service::to_string(st.status)},
                         {"keypose_index", st.keypose_index},
                         {"arrival", st.arrival},
                         {"blended", st.blended}});
      }
      out.meta.push_back({{"seed", seed}, {"rollout", rc}, {"steps", steps}});
      save_motion(out_path, out);
      std::cout << json{{"frames", result.motion.frames()},
                        {"steps", result.steps.size()},
                        {"final_status", result.steps.empty() ? "echo" : service::to_string(result.steps.back().status)}}
                       .dump()
                << "\n";
      if (!pjd_path.empty()) dump_pjd(pjd_path, out, pjd_horizon);
      if (!gt_path.empty()) {
        if (assets_path.empty()) throw ConfigError("--gt needs --assets");
        const auto gt = load_motion(gt_path);
        const int skip = T;
        const auto& g = gt.sequences.at(sequence);
        const int n = std::min(result.motion.frames(), g.frames() - start) - skip;
        if (n < 1) throw ConfigError("ground truth does not extend past the initial clip");
        eval::EvalInputs inputs;
        inputs.pred.push_back(result.motion.slice(skip, n));
        inputs.gt.push_back(g.slice(start + skip, n));
        emit_report(eval::evaluate(inputs, eval::EvalAssets::load(assets_path)), "synth", report_path);
      }
    } else if (serve_cmd->parsed()) {
      std::shared_ptr<const Dataset> poses;
      std::vector<std::pair<std::string, std::shared_ptr<const train::ModelBundle>>> models;
      for (const auto& c : checkpoints) models.emplace_back(fs::path(c).stem().string(), load_model(c));
      if (!data_path.empty()) {
        poses = std::make_shared<Dataset>(load_motion(data_path));
      } else {
        std::mt19937_64 rng(0);
        poses = std::make_shared<Dataset>(generate_synthetic_duet(SyntheticConfig{}, rng));
      }
      service::SessionManager manager{service::PoseLibrary(poses)};
      for (const auto& [id, m] : models) manager.add_model(id, m);
      service::HttpServer server(manager, threads);
      const int bound = server.bind(host, port);
      stop_server = [&server] { server.stop(); };
      std::signal(SIGINT, [](int) { stop_server(); });
      std::signal(SIGTERM, [](int) { stop_server(); });
      std::cerr << "listening on " << host << ":" << bound << "\n";
      server.listen();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
