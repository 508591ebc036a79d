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
#include "semiseg/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "semiseg/format.hpp"

namespace fs = std::filesystem;

namespace semiseg {
namespace {

void write_table(const std::string& path, const std::string& header,
                 const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << header << "\n";
  for (const auto& [label, value] : rows) {
    out << label << ", " << format_double(value) << "\n";
  }
}

RunConfig variant(const RunConfig& base, const std::string& name) {
  RunConfig v = base;
  v.out_dir = base.out_dir + "/" + name;
  return v;
}

AblationResult run_loss_terms(const RunConfig& base) {
  // Segmentation-branch comparison; the classifier branch stays out of the
  // way so the ranking reflects the GAN losses alone.
  AblationResult result;
  result.preset = "loss_terms";

  auto run_variant = [&](const std::string& name, double lambda_fm, double lambda_st, bool sgan) {
    RunConfig v = variant(base, name);
    v.mlmt_enabled = false;
    v.hp.lambda_fm = lambda_fm;
    v.hp.lambda_st = lambda_st;
    v.sgan_generator_loss = sgan;
    TrainSummary s = run_train(v);
    result.rows.emplace_back(name, s.final_miou_unfused);
  };

  run_variant("ce", 0.0, 0.0, false);
  // The plain adversarial generator loss reuses the feature-matching weight.
  run_variant("ce_sgan", base.hp.lambda_fm, 0.0, true);
  run_variant("ce_fm", base.hp.lambda_fm, 0.0, false);
  run_variant("ce_fm_st", base.hp.lambda_fm, base.hp.lambda_st, false);

  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  result.csv_path = base.out_dir + "/ablation_loss_terms.csv";
  write_table(result.csv_path, "variant, miou_val", result.rows);
  return result;
}

AblationResult run_fusion_modes(const RunConfig& base) {
  AblationResult result;
  result.preset = "fusion_modes";

  RunConfig full = variant(base, "full");
  full.mlmt_enabled = true;
  TrainSummary trained = run_train(full);

  // The cnn baseline fuses with a classifier trained without the
  // consistency term (and so without any use for its teacher).
  RunConfig plain_clf = variant(base, "plain_clf");
  plain_clf.mlmt_enabled = true;
  plain_clf.hp.lambda_cons = 0.0;
  TrainSummary clf_trained = run_train(plain_clf);

  for (FusionMode mode :
       {FusionMode::kNone, FusionMode::kMlmt, FusionMode::kCnn, FusionMode::kPixelThreshold,
        FusionMode::kClasswisePixelThreshold}) {
    EvalReport report = run_eval(trained.checkpoint_dir, full, mode, base.hp.tau,
                                 mode == FusionMode::kCnn ? clf_trained.checkpoint_dir : "");
    result.rows.emplace_back(to_string(mode), report.miou);
  }

  result.csv_path = base.out_dir + "/ablation_fusion_modes.csv";
  write_table(result.csv_path, "mode, miou_val", result.rows);
  return result;
}

double final_window_gap(const TrainSummary& s, const std::string& name) {
  if (s.trace.rows().empty()) {
    throw std::runtime_error("st_dynamics: variant '" + name +
                             "' produced no full score window; the adversary must be active for "
                             "at least 100 iterations");
  }
  const ScoreTrace::Row& last = s.trace.rows().back();
  return std::abs(last.mean_real - last.mean_fake);
}

AblationResult run_st_dynamics(const RunConfig& base) {
  // Same training twice, with the self-training term switched off in the
  // second run; the summary compares how far apart the discriminator still
  // holds real and generated inputs at the end.
  AblationResult result;
  result.preset = "st_dynamics";

  RunConfig on = variant(base, "st_on");
  on.mlmt_enabled = false;
  TrainSummary with_st = run_train(on);

  RunConfig off = variant(base, "st_off");
  off.mlmt_enabled = false;
  off.hp.lambda_st = 0.0;
  TrainSummary without_st = run_train(off);

  result.rows.emplace_back("st_on", final_window_gap(with_st, "st_on"));
  result.rows.emplace_back("st_off", final_window_gap(without_st, "st_off"));

  // The per-window traces live in <out_dir>/st_on/scores.csv and
  // <out_dir>/st_off/scores.csv (written by run_train).
  result.csv_path = base.out_dir + "/ablation_st_dynamics.csv";
  write_table(result.csv_path, "variant, final_window_gap", result.rows);
  return result;
}

}  // namespace

std::vector<std::string> ablation_presets() { return {"loss_terms", "fusion_modes", "st_dynamics"}; }

AblationResult run_ablation(const std::string& preset, const RunConfig& base) {
  fs::create_directories(base.out_dir);
  if (preset == "loss_terms") return run_loss_terms(base);
  if (preset == "fusion_modes") return run_fusion_modes(base);
  if (preset == "st_dynamics") return run_st_dynamics(base);
  std::string known;
  for (const std::string& p : ablation_presets()) {
    if (!known.empty()) known += ", ";
    known += p;
  }
  throw std::runtime_error("unknown ablation preset: " + preset + " (expected one of " + known +
                           ")");
}

}  // namespace semiseg
