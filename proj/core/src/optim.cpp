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
#include "semiseg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace semiseg {

double poly_lr(double base_lr, long long iter, long long max_iter, double pow_) {
  if (max_iter <= 0) throw std::invalid_argument("poly_lr: max_iter must be positive");
  if (iter < 0) throw std::invalid_argument("poly_lr: iter must be nonnegative");
  if (iter > max_iter) throw std::invalid_argument("poly_lr: iter exceeds max_iter");
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(max_iter);
  return base_lr * std::pow(frac, pow_);
}

void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->grad.zero();
}

SgdMomentum::SgdMomentum(std::vector<Param*> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), wd_(weight_decay) {
  vel_.reserve(params_.size());
  for (Param* p : params_) vel_.emplace_back(p->value.n, p->value.c, p->value.h, p->value.w);
}

void SgdMomentum::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    Tensor& v = vel_[i];
    for (std::size_t j = 0; j < v.v.size(); ++j) {
      v.v[j] = momentum_ * v.v[j] + p.grad.v[j] + wd_ * p.value.v[j];
      p.value.v[j] -= lr * v.v[j];
    }
  }
}

std::vector<std::pair<std::string, Tensor*>> SgdMomentum::state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < params_.size(); ++i)
    out.emplace_back(params_[i]->name + ".vel", &vel_[i]);
  return out;
}

Adam::Adam(std::vector<Param*> params, double beta1, double beta2, double eps,
           double weight_decay)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.emplace_back(p->value.n, p->value.c, p->value.h, p->value.w);
    v_.emplace_back(p->value.n, p->value.c, p->value.h, p->value.w);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < m.v.size(); ++j) {
      const double g = p.grad.v[j] + wd_ * p.value.v[j];
      m.v[j] = beta1_ * m.v[j] + (1.0 - beta1_) * g;
      v.v[j] = beta2_ * v.v[j] + (1.0 - beta2_) * g * g;
      const double mhat = m.v[j] / bc1;
      const double vhat = v.v[j] / bc2;
      p.value.v[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::vector<std::pair<std::string, Tensor*>> Adam::state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back(params_[i]->name + ".m", &m_[i]);
    out.emplace_back(params_[i]->name + ".v", &v_[i]);
  }
  return out;
}

}  // namespace semiseg
