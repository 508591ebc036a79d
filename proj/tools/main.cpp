/* Copyright 2026 The SemiSeg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
// Command-line driver: train, evaluate, or run an ablation preset.

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "semiseg/ablation.hpp"
#include "semiseg/format.hpp"
#include "semiseg/hyperparams.hpp"
#include "semiseg/trainer.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string mode = "train";

  // Hyperparameter overrides (applied on top of the config file).
  double labeled_ratio = 0.05;
  double lambda_fm = 0.0;
  double lambda_st = 0.0;
  double lambda_cons = 0.0;
  double gamma = 0.0;
  double tau = 0.0;
  double ema_decay = 0.0;
  long long seed = 0;
  long long max_iter = 0;
  long long batch_size = 0;
  double lr_seg = 0.0;
  double lr_disc = 0.0;

  // Data source.
  std::string manifest;
  std::string data_root;
  long long n_train = 1000;
  long long n_val = 200;
  double weak_fraction = 0.0;
  int height = 64;
  int width = 64;
  int num_classes = 5;
  long long data_seed = 0;
  double texture_noise = 0.06;
  double color_jitter = 0.15;

  // Architecture.
  int gen_width = 16;
  int gen_depth = 2;
  std::vector<int> disc_widths = {64, 128, 256, 512};
  int clf_width = 16;
  int clf_depth = 3;
  std::string fm_norm = "l1";
  bool sgan = false;

  // Branch and run control.
  bool no_mlmt = false;
  double clf_lr = 0.05;
  bool fuse_with_student = false;
  std::string out = "run_out";
  long long val_interval = 500;
  long long checkpoint_interval = 0;
  long long stop_after = -1;
  std::string resume;
  bool parallel = false;

  // Mode-specific.
  std::string checkpoint;
  std::string clf_checkpoint;
  std::string fusion = "none";
  std::string preset;
};

int run(const CliOptions& o, const CLI::App& app) {
  semiseg::HyperParams hp;
  if (!o.config_path.empty()) {
    semiseg::apply_config_file(hp, o.config_path);
  }
  auto overridden = [&](const std::string& flag) { return app.count(flag) > 0; };
  if (overridden("--lambda-fm")) hp.lambda_fm = o.lambda_fm;
  if (overridden("--lambda-st")) hp.lambda_st = o.lambda_st;
  if (overridden("--lambda-cons")) hp.lambda_cons = o.lambda_cons;
  if (overridden("--gamma")) hp.gamma = o.gamma;
  if (overridden("--tau")) hp.tau = o.tau;
  if (overridden("--ema-decay")) hp.ema_decay = o.ema_decay;
  if (overridden("--seed")) hp.seed = o.seed;
  if (overridden("--max-iter")) hp.max_iter = o.max_iter;
  if (overridden("--batch-size")) hp.batch_size = o.batch_size;
  if (overridden("--lr-seg")) hp.lr_seg = o.lr_seg;
  if (overridden("--lr-disc")) hp.lr_disc = o.lr_disc;

  for (const std::string& w : semiseg::validate_hyperparams(hp)) {
    std::cerr << "warning: " << w << "\n";
  }

  semiseg::RunConfig rc;
  rc.hp = hp;
  rc.manifest_path = o.manifest;
  rc.data_root = o.data_root;
  rc.n_train = o.n_train;
  rc.n_val = o.n_val;
  rc.labeled_ratio = o.labeled_ratio;
  rc.weak_fraction = o.weak_fraction;
  rc.scene.height = o.height;
  rc.scene.width = o.width;
  rc.scene.num_classes = o.num_classes;
  rc.scene.seed = static_cast<std::uint64_t>(o.data_seed);
  rc.scene.texture_noise = o.texture_noise;
  rc.scene.color_jitter = o.color_jitter;
  rc.gen.num_classes = o.num_classes;
  rc.gen.width = o.gen_width;
  rc.gen.depth = o.gen_depth;
  if (o.disc_widths.size() != 4) {
    throw std::runtime_error("--disc-widths needs exactly 4 values");
  }
  for (int i = 0; i < 4; ++i) rc.disc.widths[i] = o.disc_widths[i];
  rc.clf.num_classes = o.num_classes;
  rc.clf.width = o.clf_width;
  rc.clf.depth = o.clf_depth;
  if (o.fm_norm == "l1") {
    rc.fm_norm = semiseg::FmNorm::kL1;
  } else if (o.fm_norm == "l2") {
    rc.fm_norm = semiseg::FmNorm::kL2;
  } else {
    throw std::runtime_error("--fm-norm must be l1 or l2");
  }
  rc.sgan_generator_loss = o.sgan;
  rc.mlmt_enabled = !o.no_mlmt;
  rc.clf_lr = o.clf_lr;
  rc.fuse_with_teacher = !o.fuse_with_student;
  rc.out_dir = o.out;
  rc.val_interval = o.val_interval;
  rc.checkpoint_interval = o.checkpoint_interval;
  rc.stop_after = o.stop_after;
  rc.resume = o.resume;
  rc.parallel_branches = o.parallel;

  if (o.mode == "train") {
    semiseg::TrainSummary s = semiseg::run_train(rc);
    std::cout << "trained " << s.s4_iters << " segmentation iterations, " << s.mlmt_iters
              << " classifier iterations\n";
    std::cout << "metrics: " << s.metrics_csv << "\n";
    std::cout << "checkpoint: " << s.checkpoint_dir << "\n";
    if (s.final_miou_unfused >= 0.0) {
      std::cout << "final mIoU (no fusion): " << semiseg::format_double(s.final_miou_unfused)
                << "\n";
    }
    if (s.final_miou >= 0.0 && rc.mlmt_enabled) {
      std::cout << "final mIoU (fused): " << semiseg::format_double(s.final_miou) << "\n";
    }
    return 0;
  }

  if (o.mode == "eval") {
    if (o.checkpoint.empty()) {
      throw std::runtime_error("--mode eval needs --checkpoint");
    }
    semiseg::FusionMode mode = semiseg::parse_fusion_mode(o.fusion);
    semiseg::EvalReport report =
        semiseg::run_eval(o.checkpoint, rc, mode, hp.tau, o.clf_checkpoint);
    for (const semiseg::EvalRow& row : report.rows) {
      std::cout << "  " << row.label << ": " << semiseg::format_double(row.miou) << "\n";
    }
    std::cout << "mIoU [" << semiseg::to_string(mode)
              << "]: " << semiseg::format_double(report.miou) << "\n";
    return 0;
  }

  if (o.mode == "ablation") {
    if (o.preset.empty()) {
      std::string known;
      for (const std::string& p : semiseg::ablation_presets()) {
        if (!known.empty()) known += ", ";
        known += p;
      }
      throw std::runtime_error("--mode ablation needs --preset (one of " + known + ")");
    }
    semiseg::AblationResult result = semiseg::run_ablation(o.preset, rc);
    for (const auto& [label, value] : result.rows) {
      std::cout << "  " << label << ": " << semiseg::format_double(value) << "\n";
    }
    std::cout << "table: " << result.csv_path << "\n";
    return 0;
  }

  throw std::runtime_error("unknown mode: " + o.mode);
}

}  // namespace

int main(int argc, char** argv) {
  CliOptions o;
  CLI::App app{"semi-supervised semantic segmentation: GAN segmentation branch + mean-teacher "
               "classification branch"};

  app.add_option("--config", o.config_path, "key=value hyperparameter file")
      ->check(CLI::ExistingFile);
  app.add_option("--mode", o.mode, "train, eval, or ablation")
      ->check(CLI::IsMember({"train", "eval", "ablation"}));

  app.add_option("--labeled-ratio", o.labeled_ratio, "fraction of training scenes with masks");
  app.add_option("--lambda-fm", o.lambda_fm, "feature-matching loss weight");
  app.add_option("--lambda-st", o.lambda_st, "self-training loss weight");
  app.add_option("--lambda-cons", o.lambda_cons, "consistency loss weight");
  app.add_option("--gamma", o.gamma, "self-training gate threshold");
  app.add_option("--tau", o.tau, "fusion class-probability threshold");
  app.add_option("--ema-decay", o.ema_decay, "teacher EMA decay");
  app.add_option("--seed", o.seed, "run seed");
  app.add_option("--max-iter", o.max_iter, "training iterations");
  app.add_option("--batch-size", o.batch_size, "samples per branch per iteration");
  app.add_option("--lr-seg", o.lr_seg, "segmentation base learning rate");
  app.add_option("--lr-disc", o.lr_disc, "discriminator base learning rate");

  app.add_option("--manifest", o.manifest, "JSONL dataset manifest (default: generated scenes)")
      ->check(CLI::ExistingFile);
  app.add_option("--data-root", o.data_root, "base directory for manifest paths");
  app.add_option("--n-train", o.n_train, "generated training scenes");
  app.add_option("--n-val", o.n_val, "validation scenes (tail of the dataset)");
  app.add_option("--weak-fraction", o.weak_fraction, "fraction with image-level labels only");
  app.add_option("--height", o.height, "scene height");
  app.add_option("--width", o.width, "scene width");
  app.add_option("--num-classes", o.num_classes, "class count including background");
  app.add_option("--data-seed", o.data_seed, "scene generator seed");
  app.add_option("--texture-noise", o.texture_noise, "scene pixel noise sigma");
  app.add_option("--color-jitter", o.color_jitter, "per-scene class color jitter");

  app.add_option("--gen-width", o.gen_width, "segmentation net base width");
  app.add_option("--gen-depth", o.gen_depth, "segmentation net down/up stages");
  app.add_option("--disc-widths", o.disc_widths, "4 discriminator stage widths")
      ->delimiter(',')
      ->expected(1, 4);
  app.add_option("--clf-width", o.clf_width, "classifier base width");
  app.add_option("--clf-depth", o.clf_depth, "classifier conv stages");
  app.add_option("--fm-norm", o.fm_norm, "feature-matching norm: l1 or l2")
      ->check(CLI::IsMember({"l1", "l2"}));
  app.add_flag("--sgan", o.sgan, "use the plain adversarial generator loss instead of fm");

  app.add_flag("--no-mlmt", o.no_mlmt, "disable the classifier branch");
  app.add_option("--clf-lr", o.clf_lr, "classifier base learning rate");
  app.add_flag("--fuse-with-student", o.fuse_with_student, "fuse with the student classifier");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--val-interval", o.val_interval, "iterations between validations (0: off)");
  app.add_option("--checkpoint-interval", o.checkpoint_interval,
                 "iterations between checkpoints (0: final only)");
  app.add_option("--stop-after", o.stop_after, "checkpoint and stop after this many iterations");
  app.add_option("--resume", o.resume, "checkpoint directory to continue from");
  app.add_flag("--parallel", o.parallel, "step the two branches in separate threads");

  app.add_option("--checkpoint", o.checkpoint, "checkpoint directory to evaluate");
  app.add_option("--clf-checkpoint", o.clf_checkpoint,
                 "plain-classifier checkpoint for cnn fusion");
  app.add_option("--fusion", o.fusion, "fusion mode for evaluation")
      ->check(CLI::IsMember(
          {"none", "mlmt", "cnn", "pixel_threshold", "classwise_pixel_threshold"}));
  app.add_option("--preset", o.preset, "ablation preset (loss_terms, fusion_modes, st_dynamics)");

  CLI11_PARSE(app, argc, argv);

  try {
    return run(o, app);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
