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
#include "semiseg/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "semiseg/rng.hpp"

namespace semiseg {

void Tensor::add(const Tensor& o, double scale) {
  if (!same_shape(o)) throw std::invalid_argument("Tensor::add: shape mismatch");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += scale * o.v[i];
}

void Tensor::scale(double s) {
  for (double& x : v) x *= s;
}

void Tensor::fill_uniform(Rng& rng, double lo, double hi) {
  for (double& x : v) x = rng.uniform(lo, hi);
}

bool Tensor::all_finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw std::invalid_argument("concat_channels: incompatible shapes");
  Tensor out(a.n, a.c + b.c, a.h, a.w);
  const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
  for (int in = 0; in < a.n; ++in) {
    double* dst = out.sample(in);
    const double* pa = a.sample(in);
    const double* pb = b.sample(in);
    std::copy(pa, pa + a.c * plane, dst);
    std::copy(pb, pb + b.c * plane, dst + a.c * plane);
  }
  return out;
}

Tensor concat_samples(const Tensor& a, const Tensor& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.c != b.c || a.h != b.h || a.w != b.w)
    throw std::invalid_argument("concat_samples: incompatible shapes");
  Tensor out(a.n + b.n, a.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
  return out;
}

Tensor slice_samples(const Tensor& t, int begin, int end) {
  if (begin < 0 || end < begin || end > t.n)
    throw std::invalid_argument("slice_samples: bad range");
  Tensor out(end - begin, t.c, t.h, t.w);
  std::copy(t.sample(begin), t.sample(begin) + out.v.size(), out.v.begin());
  return out;
}

}  // namespace semiseg
