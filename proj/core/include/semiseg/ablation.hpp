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
#ifndef SEMISEG_ABLATION_HPP_
#define SEMISEG_ABLATION_HPP_

#include <string>
#include <utility>
#include <vector>

#include "semiseg/trainer.hpp"

namespace semiseg {

// Named comparison suites built on run_train/run_eval:
//   loss_terms   - CE / CE+SGAN / CE+FM / CE+FM+ST, ranked by validation mIoU
//   fusion_modes - one trained model scored under every fusion mode
//   st_dynamics  - discriminator score traces with and without self-training
std::vector<std::string> ablation_presets();

struct AblationResult {
  std::string preset;
  std::vector<std::pair<std::string, double>> rows;  // label -> headline value
  std::string csv_path;
};

// Runs the preset under base (out_dir gains one subdirectory per variant)
// and writes a summary CSV next to them.
AblationResult run_ablation(const std::string& preset, const RunConfig& base);

}  // namespace semiseg

#endif  // SEMISEG_ABLATION_HPP_
