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
#include "semiseg/mlmt.hpp"

#include <cmath>
#include <stdexcept>

namespace semiseg {

namespace {
constexpr double kEps = 1e-8;
}

void ema_update_params(const std::vector<Param*>& teacher, const std::vector<Param*>& student,
                       double decay) {
  if (teacher.size() != student.size())
    throw std::invalid_argument("ema_update: parameter count mismatch");
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    if (!teacher[i]->value.same_shape(student[i]->value))
      throw std::invalid_argument("ema_update: shape mismatch at " + teacher[i]->name);
    auto& t = teacher[i]->value.v;
    const auto& s = student[i]->value.v;
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = decay * t[j] + (1.0 - decay) * s[j];
  }
}

void ema_update(ClfNet& teacher, ClfNet& student, double decay) {
  if (!(teacher.config() == student.config()))
    throw std::invalid_argument("ema_update: architecture mismatch");
  ema_update_params(teacher.params(), student.params(), decay);
}

MlmtLoss loss_mlmt(const std::vector<double>& student_out, const std::vector<double>& teacher_out,
                   const std::optional<std::vector<std::uint8_t>>& labels, double lambda_cons) {
  if (student_out.size() != teacher_out.size())
    throw std::invalid_argument("loss_mlmt: output length mismatch");
  if (labels && labels->size() != student_out.size())
    throw std::invalid_argument("loss_mlmt: label length mismatch");
  const std::size_t c = student_out.size();
  MlmtLoss out;
  if (labels) {
    for (std::size_t i = 0; i < c; ++i)
      if ((*labels)[i]) out.cce -= std::log(std::max(student_out[i], kEps));
  }
  for (std::size_t i = 0; i < c; ++i) {
    const double d = student_out[i] - teacher_out[i];
    out.cons += d * d;
  }
  out.cons /= static_cast<double>(c);
  out.total = out.cce + lambda_cons * out.cons;
  return out;
}

MlmtTrainer::MlmtTrainer(const MlmtConfig& cfg, const HyperParams& hp, double base_lr,
                         std::uint64_t seed)
    : cfg_(cfg),
      hp_(hp),
      base_lr_(base_lr),
      init_rng_(mix_seed(seed, 0x3C)),
      student_(cfg_.clf, init_rng_),
      teacher_(cfg_.clf, init_rng_),
      opt_(student_.params(), 0.9, 5e-4) {
  // The teacher starts identical to the student; EMA keeps it a convex
  // combination of the student's history from here on.
  copy_params(student_.params(), teacher_.params());
}

MlmtLoss MlmtTrainer::step(const std::vector<MlmtSample>& batch, long long iter) {
  if (batch.empty()) throw std::invalid_argument("MlmtTrainer::step: empty batch");
  if (iter < 0 || iter >= hp_.max_iter)
    throw std::invalid_argument("MlmtTrainer::step: iter outside [0, max_iter)");

  const int b = static_cast<int>(batch.size());
  const int c = cfg_.clf.num_classes;

  Tensor xa = batch[0].view_a;
  Tensor xb = batch[0].view_b;
  for (int i = 1; i < b; ++i) {
    xa = concat_samples(xa, batch[i].view_a);
    xb = concat_samples(xb, batch[i].view_b);
  }

  const Tensor sp = student_.forward(xa, true, nullptr);   // (b, C, 1, 1)
  const Tensor tp = teacher_.forward(xb, false, nullptr);

  MlmtLoss out;
  Tensor dsp(b, c, 1, 1);
  for (int i = 0; i < b; ++i) {
    std::vector<double> s(c), t(c);
    for (int j = 0; j < c; ++j) {
      s[j] = sp.at(i, j, 0, 0);
      t[j] = tp.at(i, j, 0, 0);
    }
    const MlmtLoss li = loss_mlmt(s, t, batch[i].labels, hp_.lambda_cons);
    out.cce += li.cce / b;
    out.cons += li.cons / b;
    for (int j = 0; j < c; ++j) {
      double g = hp_.lambda_cons * 2.0 * (s[j] - t[j]) / c;
      if (batch[i].labels && (*batch[i].labels)[j] && s[j] >= kEps) g -= 1.0 / s[j];
      dsp.at(i, j, 0, 0) = g / b;
    }
  }
  out.total = out.cce + hp_.lambda_cons * out.cons;
  if (!std::isfinite(out.total))
    throw std::runtime_error("training aborted: classifier loss is not finite at iteration " +
                             std::to_string(iter));

  student_.backward(dsp);
  opt_.step(poly_lr(base_lr_, iter, hp_.max_iter, hp_.pow));
  opt_.zero_grad();
  ema_update(teacher_, student_, hp_.ema_decay);
  return out;
}

}  // namespace semiseg
