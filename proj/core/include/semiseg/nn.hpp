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
#ifndef SEMISEG_NN_HPP_
#define SEMISEG_NN_HPP_

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "semiseg/tensor.hpp"

namespace semiseg {

class Rng;

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Minimal define-by-layer backprop: forward caches what backward needs.
// One forward/backward pair at a time per layer instance; the training loops
// are structured around that contract.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train, Rng* rng) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad, Rng& init);
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  Param w_, b_;  // w: (out_c, in_c*k*k)
  Tensor x_;
  std::vector<double> cols_;  // im2col cache, (n, K, P)
  int oh_ = 0, ow_ = 0;
};

class Linear : public Layer {
 public:
  Linear(std::string name, int in_f, int out_f, Rng& init);
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  int in_f_, out_f_;
  Param w_, b_;  // w: (out_f, in_f)
  Tensor x_;
};

class LeakyRelu : public Layer {
 public:
  explicit LeakyRelu(double slope) : slope_(slope) {}
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

 private:
  double slope_;
  Tensor x_;
};

// Inverted dropout; identity in eval mode.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

 private:
  double rate_;
  std::vector<double> mask_;  // empty when the last forward was eval-mode
};

class Upsample2x : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int in_h_ = 0, in_w_ = 0;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int in_h_ = 0, in_w_ = 0;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor y_;
};

// Softmax over the class (channel) axis, per pixel.
class ChannelSoftmax : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor y_;
};

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

// Encoder-decoder segmentation network; `depth` downsampling stages of
// doubling width, mirrored by nearest-upsampling stages, 1x1 class head,
// per-pixel softmax.
struct SegNetConfig {
  int in_ch = 3;
  int num_classes = 5;
  int width = 16;
  int depth = 2;
  double leaky_slope = 0.1;

  bool operator==(const SegNetConfig&) const = default;
};

class SegNet {
 public:
  SegNet(const SegNetConfig& cfg, Rng& init);

  // Returns per-pixel class probabilities (n, C, h, w).
  Tensor forward(const Tensor& images, bool train = false, Rng* rng = nullptr);
  Tensor backward(const Tensor& dprobs);
  std::vector<Param*> params();
  const SegNetConfig& config() const { return cfg_; }

 private:
  SegNetConfig cfg_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Image-wise binary discriminator: 4 strided 4x4 conv stages
// (LeakyReLU 0.2 + dropout 0.5 after each), global average pooling,
// scalar sigmoid head. The pooled vector is the feature tap.
struct DiscNetConfig {
  int in_ch = 8;  // C + 3
  std::array<int, 4> widths = {64, 128, 256, 512};
  int kernel = 4;
  double leaky_slope = 0.2;
  double dropout = 0.5;

  bool operator==(const DiscNetConfig&) const = default;
};

struct DiscOut {
  std::vector<double> scores;  // sigmoid outputs, one per sample
  Tensor features;             // (n, F, 1, 1), pooled, pre-head
};

class DiscNet {
 public:
  DiscNet(const DiscNetConfig& cfg, Rng& init);

  DiscOut forward(const Tensor& x, bool train = false, Rng* rng = nullptr);
  // Either gradient input may be empty (zero); both paths are summed.
  Tensor backward(const std::vector<double>& dscores, const Tensor& dfeatures);
  std::vector<Param*> params();
  const DiscNetConfig& config() const { return cfg_; }
  int feature_dim() const { return cfg_.widths[3]; }

 private:
  DiscNetConfig cfg_;
  std::vector<std::unique_ptr<Layer>> stages_;
  GlobalAvgPool gap_;
  std::unique_ptr<Linear> head_;
  std::vector<double> scores_;  // cached for sigmoid backward
};

// Multi-label classifier: strided conv stack, global pooling, sigmoid head;
// C independent probabilities (no softmax coupling).
struct ClfNetConfig {
  int in_ch = 3;
  int num_classes = 5;
  int width = 16;
  int depth = 3;
  double leaky_slope = 0.1;

  bool operator==(const ClfNetConfig&) const = default;
};

class ClfNet {
 public:
  ClfNet(const ClfNetConfig& cfg, Rng& init);

  // Returns (n, C, 1, 1) probabilities in (0,1).
  Tensor forward(const Tensor& images, bool train = false, Rng* rng = nullptr);
  Tensor backward(const Tensor& dprobs);
  std::vector<Param*> params();
  const ClfNetConfig& config() const { return cfg_; }

 private:
  ClfNetConfig cfg_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Copies parameter values; shapes must match exactly.
void copy_params(const std::vector<Param*>& src, const std::vector<Param*>& dst);

}  // namespace semiseg

#endif  // SEMISEG_NN_HPP_
