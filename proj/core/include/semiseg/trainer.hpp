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
#ifndef SEMISEG_TRAINER_HPP_
#define SEMISEG_TRAINER_HPP_

#include <memory>
#include <string>
#include <vector>

#include "semiseg/checkpoint.hpp"
#include "semiseg/data.hpp"
#include "semiseg/hyperparams.hpp"
#include "semiseg/metrics.hpp"
#include "semiseg/mlmt.hpp"
#include "semiseg/s4gan.hpp"
#include "semiseg/synth.hpp"

namespace semiseg {

// Full description of a run: data source, split, architectures, branch
// control, and output locations.
struct RunConfig {
  HyperParams hp;

  // Data: either a generated dataset (default) or a manifest on disk.
  SceneSpec scene;
  std::string manifest_path;  // when set, overrides the generated source
  std::string data_root;      // base dir for manifest-relative paths
  long long n_train = 1000;
  long long n_val = 200;  // manifest mode: taken from the tail of the file
  double labeled_ratio = 0.05;
  double weak_fraction = 0.0;

  // Architectures. Discriminator input channels are fixed up from the
  // generator config at run start.
  SegNetConfig gen;
  DiscNetConfig disc;
  ClfNetConfig clf;
  FmNorm fm_norm = FmNorm::kL1;
  bool sgan_generator_loss = false;

  // Classifier branch.
  bool mlmt_enabled = true;
  double clf_lr = 0.05;
  long long mlmt_max_iter = -1;  // -1: same budget as the segmentation branch
  bool fuse_with_teacher = true;
  AugmentConfig clf_augment;

  // Run control.
  std::string out_dir = "run_out";
  long long val_interval = 500;         // 0 disables periodic validation
  long long checkpoint_interval = 0;    // 0: only the final checkpoint
  long long stop_after = -1;            // checkpoint and stop early (resume tests)
  std::string resume;                   // checkpoint dir to continue from
  bool parallel_branches = false;       // step the two branches in threads
};

struct TrainSummary {
  long long s4_iters = 0;
  long long mlmt_iters = 0;
  double final_miou = -1.0;        // fused when the classifier branch is on
  double final_miou_unfused = -1.0;
  std::string checkpoint_dir;  // final checkpoint
  std::string metrics_csv;
  ScoreTrace trace;
  std::vector<S4GanLosses> losses;  // one record per segmentation iteration
};

// Trains both branches (segmentation GAN for hp.max_iter iterations, the
// mean-teacher classifier for its own budget), logging one CSV row per
// iteration and checkpointing per RunConfig.
TrainSummary run_train(const RunConfig& config);

enum class FusionMode { kNone, kMlmt, kCnn, kPixelThreshold, kClasswisePixelThreshold };

FusionMode parse_fusion_mode(const std::string& name);
std::string to_string(FusionMode mode);

struct EvalRow {
  std::string label;
  double miou = 0.0;
};

struct EvalReport {
  FusionMode mode = FusionMode::kNone;
  double miou = 0.0;          // headline number (best row for sweeps)
  std::vector<EvalRow> rows;  // sweep details where applicable
};

// Evaluates a checkpoint on the validation split of config's dataset.
// cnn mode fuses with the student of a separately trained plain classifier
// (clf_checkpoint); mlmt mode uses the classifier stored in the checkpoint.
EvalReport run_eval(const std::string& checkpoint_dir, const RunConfig& config, FusionMode mode,
                    double tau, const std::string& clf_checkpoint = "");

// ---------------------------------------------------------------------------
// Shared helpers (also used by evaluation and the ablation presets)
// ---------------------------------------------------------------------------

std::unique_ptr<Dataset> open_dataset(const RunConfig& config);

struct IdSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
};
IdSplit dataset_id_split(const RunConfig& config, const Dataset& dataset);

// Pixel-count sweep for the threshold baselines: the reference range
// 1000..12000 (step 1000) rescaled by image area relative to 321x321.
std::vector<long long> pixel_threshold_sweep(int height, int width);

// Networks reconstructed from a checkpoint for evaluation.
struct EvalNets {
  CheckpointHeader header;
  SegNetConfig gen_cfg;
  std::unique_ptr<SegNet> gen;
  ClfNetConfig clf_cfg;
  std::unique_ptr<ClfNet> clf_student;
  std::unique_ptr<ClfNet> clf_teacher;
};
EvalNets load_eval_nets(const std::string& checkpoint_dir);

}  // namespace semiseg

#endif  // SEMISEG_TRAINER_HPP_
