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
#ifndef SEMISEG_FUSION_HPP_
#define SEMISEG_FUSION_HPP_

#include <vector>

#include "semiseg/data.hpp"
#include "semiseg/tensor.hpp"

namespace semiseg {

// Per-pixel argmax labeling of one sample of a (n, C, h, w) map; ties broken
// by the lowest class index.
Mask argmax_mask(const Tensor& seg, int sample = 0);

// Classifier-gated fusion: channel c of a single-sample segmentation map is
// set to all-zeros iff class_probs[c] <= tau and c != 0 (background is never
// deactivated). No renormalization — argmax is the only downstream consumer.
Tensor fuse(const Tensor& seg, const std::vector<double>& class_probs, double tau);

// Pixel-count baseline: classes (background exempt) whose argmax pixel count
// is strictly below their threshold have their channel zeroed.
Tensor fuse_pixel_threshold(const Tensor& seg, const std::vector<long long>& thresholds);
Tensor fuse_pixel_threshold(const Tensor& seg, long long threshold);

}  // namespace semiseg

#endif  // SEMISEG_FUSION_HPP_
