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
#ifndef SEMISEG_OPTIM_HPP_
#define SEMISEG_OPTIM_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "semiseg/nn.hpp"

namespace semiseg {

// Polynomial decay: base_lr * (1 - iter/max_iter)^pow.
double poly_lr(double base_lr, long long iter, long long max_iter, double pow_);

void zero_grads(const std::vector<Param*>& params);

// v = momentum*v + grad + wd*param; param -= lr*v.
class SgdMomentum {
 public:
  explicit SgdMomentum(std::vector<Param*> params, double momentum = 0.9,
                       double weight_decay = 5e-4);
  void step(double lr);
  void zero_grad() { zero_grads(params_); }

  // Named state buffers ("<param>.vel"), for checkpointing.
  std::vector<std::pair<std::string, Tensor*>> state();

 private:
  std::vector<Param*> params_;
  double momentum_, wd_;
  std::vector<Tensor> vel_;
};

// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, double beta1 = 0.9, double beta2 = 0.99,
                double eps = 1e-8, double weight_decay = 0.0);
  void step(double lr);
  void zero_grad() { zero_grads(params_); }

  // Named state buffers ("<param>.m", "<param>.v"), for checkpointing.
  std::vector<std::pair<std::string, Tensor*>> state();
  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  std::vector<Param*> params_;
  double beta1_, beta2_, eps_, wd_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace semiseg

#endif  // SEMISEG_OPTIM_HPP_
