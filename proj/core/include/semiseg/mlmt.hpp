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
#ifndef SEMISEG_MLMT_HPP_
#define SEMISEG_MLMT_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "semiseg/data.hpp"
#include "semiseg/hyperparams.hpp"
#include "semiseg/nn.hpp"
#include "semiseg/optim.hpp"
#include "semiseg/tensor.hpp"

namespace semiseg {

// teacher <- decay*teacher + (1-decay)*student, elementwise over parameters.
void ema_update_params(const std::vector<Param*>& teacher, const std::vector<Param*>& student,
                       double decay);
void ema_update(ClfNet& teacher, ClfNet& student, double decay);

struct MlmtLoss {
  double total = 0.0;
  double cce = 0.0;   // categorical term over present classes (labeled only)
  double cons = 0.0;  // mean squared student/teacher disagreement
};

// Per-sample loss: cce = -sum_c z_c log(max(s_c, 1e-8)) when labels are
// present (else 0); cons = mean_c (s_c - t_c)^2; total = cce +
// lambda_cons*cons. The teacher output is a constant target.
MlmtLoss loss_mlmt(const std::vector<double>& student_out, const std::vector<double>& teacher_out,
                   const std::optional<std::vector<std::uint8_t>>& labels, double lambda_cons);

// One batch element: two augmented views of an image, plus the multi-hot
// class labels for labeled/weak samples.
struct MlmtSample {
  Tensor view_a;  // student view, (1, 3, H, W)
  Tensor view_b;  // teacher view
  std::optional<std::vector<std::uint8_t>> labels;
};

struct MlmtConfig {
  ClfNetConfig clf;

  bool operator==(const MlmtConfig&) const = default;
};

// Mean-teacher training for the multi-label classifier. The teacher starts
// as a copy of the student and follows it by EMA; only the student takes
// gradient steps.
class MlmtTrainer {
 public:
  MlmtTrainer(const MlmtConfig& cfg, const HyperParams& hp, double base_lr, std::uint64_t seed);

  MlmtLoss step(const std::vector<MlmtSample>& batch, long long iter);

  // (n, C) probabilities for a batch of images, from the chosen network.
  Tensor classify_student(const Tensor& images) { return student_.forward(images, false, nullptr); }
  Tensor classify_teacher(const Tensor& images) { return teacher_.forward(images, false, nullptr); }

  ClfNet& student() { return student_; }
  ClfNet& teacher() { return teacher_; }
  SgdMomentum& student_opt() { return opt_; }
  const MlmtConfig& config() const { return cfg_; }

 private:
  MlmtConfig cfg_;
  HyperParams hp_;
  double base_lr_;
  Rng init_rng_;
  ClfNet student_;
  ClfNet teacher_;
  SgdMomentum opt_;
};

}  // namespace semiseg

#endif  // SEMISEG_MLMT_HPP_
