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
#include "semiseg/fusion.hpp"

#include <stdexcept>

namespace semiseg {

Mask argmax_mask(const Tensor& seg, int sample) {
  if (sample < 0 || sample >= seg.n) throw std::invalid_argument("argmax_mask: bad sample index");
  Mask out(seg.h, seg.w);
  for (int y = 0; y < seg.h; ++y)
    for (int x = 0; x < seg.w; ++x) {
      int best = 0;
      double bp = seg.at(sample, 0, y, x);
      for (int c = 1; c < seg.c; ++c) {
        const double p = seg.at(sample, c, y, x);
        if (p > bp) {
          bp = p;
          best = c;
        }
      }
      out.at(y, x) = static_cast<std::uint8_t>(best);
    }
  return out;
}

Tensor fuse(const Tensor& seg, const std::vector<double>& class_probs, double tau) {
  if (seg.n != 1) throw std::invalid_argument("fuse: expects a single sample");
  if (static_cast<int>(class_probs.size()) != seg.c)
    throw std::invalid_argument("fuse: class_probs length must match channel count");
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("fuse: tau must be in [0,1]");
  Tensor out = seg;
  const std::size_t plane = static_cast<std::size_t>(seg.h) * seg.w;
  for (int c = 1; c < seg.c; ++c) {
    if (class_probs[c] <= tau) {
      double* p = out.v.data() + out.index(0, c, 0, 0);
      std::fill(p, p + plane, 0.0);
    }
  }
  return out;
}

Tensor fuse_pixel_threshold(const Tensor& seg, const std::vector<long long>& thresholds) {
  if (seg.n != 1) throw std::invalid_argument("fuse_pixel_threshold: expects a single sample");
  if (static_cast<int>(thresholds.size()) != seg.c)
    throw std::invalid_argument("fuse_pixel_threshold: thresholds length must match channels");
  for (long long t : thresholds)
    if (t < 0) throw std::invalid_argument("fuse_pixel_threshold: negative threshold");

  const Mask labels = argmax_mask(seg);
  std::vector<long long> counts(static_cast<std::size_t>(seg.c), 0);
  for (std::uint8_t c : labels.v) ++counts[c];

  Tensor out = seg;
  const std::size_t plane = static_cast<std::size_t>(seg.h) * seg.w;
  for (int c = 1; c < seg.c; ++c) {
    if (counts[c] < thresholds[c]) {
      double* p = out.v.data() + out.index(0, c, 0, 0);
      std::fill(p, p + plane, 0.0);
    }
  }
  return out;
}

Tensor fuse_pixel_threshold(const Tensor& seg, long long threshold) {
  return fuse_pixel_threshold(seg,
                              std::vector<long long>(static_cast<std::size_t>(seg.c), threshold));
}

}  // namespace semiseg
