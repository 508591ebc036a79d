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
#ifndef SEMISEG_TENSOR_HPP_
#define SEMISEG_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace semiseg {

class Rng;

// Dense NCHW tensor of doubles. Vectors are stored as (n, f, 1, 1).
// Double precision throughout: the verification suite checks losses and
// gradients at tolerances float32 cannot hold.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

  static Tensor matrix(int rows, int cols) { return Tensor(rows, cols, 1, 1); }

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }

  std::size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
  }
  double& at(int in, int ic, int iy, int ix) { return v[index(in, ic, iy, ix)]; }
  double at(int in, int ic, int iy, int ix) const { return v[index(in, ic, iy, ix)]; }

  // Pointer to the start of sample `in` (c*h*w contiguous doubles).
  double* sample(int in) { return v.data() + static_cast<std::size_t>(in) * c * h * w; }
  const double* sample(int in) const { return v.data() + static_cast<std::size_t>(in) * c * h * w; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void fill(double x) { v.assign(v.size(), x); }
  void zero() { fill(0.0); }

  void add(const Tensor& o, double scale = 1.0);
  void scale(double s);

  // Uniform fill in [lo, hi); used for parameter init.
  void fill_uniform(Rng& rng, double lo, double hi);

  bool all_finite() const;
};

// Concatenate along the channel axis; all inputs share (n, h, w).
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Concatenate along the batch axis; all inputs share (c, h, w).
Tensor concat_samples(const Tensor& a, const Tensor& b);

// Samples [begin, end) as a new tensor.
Tensor slice_samples(const Tensor& t, int begin, int end);

}  // namespace semiseg

#endif  // SEMISEG_TENSOR_HPP_
