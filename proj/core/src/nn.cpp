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
#include "semiseg/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "semiseg/rng.hpp"

namespace semiseg {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;

// He-style uniform init.
void init_uniform_fan_in(Tensor& t, int fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  t.fill_uniform(rng, -limit, limit);
}

void im2col(const double* x, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, double* cols) {
  // cols is (c*k*k, oh*ow) row-major.
  const int p = oh * ow;
  for (int ic = 0; ic < c; ++ic) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(ic) * k * k + ky * k + kx) * p;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* dst = row + oy * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(ic) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix < 0 || ix >= w) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, double* dx) {
  const int p = oh * ow;
  for (int ic = 0; ic < c; ++ic) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(ic) * k * k + ky * k + kx) * p;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const double* src = row + oy * ow;
          double* dst = dx + (static_cast<std::size_t>(ic) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad, Rng& init)
    : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(pad) {
  w_.name = name + ".w";
  w_.value = Tensor::matrix(out_c, in_c * kernel * kernel);
  w_.grad = Tensor::matrix(out_c, in_c * kernel * kernel);
  b_.name = name + ".b";
  b_.value = Tensor::matrix(out_c, 1);
  b_.grad = Tensor::matrix(out_c, 1);
  init_uniform_fan_in(w_.value, in_c * kernel * kernel, init);
}

Tensor Conv2d::forward(const Tensor& x, bool, Rng*) {
  if (x.c != in_c_) throw std::invalid_argument("Conv2d: channel mismatch");
  oh_ = (x.h + 2 * pad_ - k_) / stride_ + 1;
  ow_ = (x.w + 2 * pad_ - k_) / stride_ + 1;
  if (oh_ <= 0 || ow_ <= 0) throw std::invalid_argument("Conv2d: input too small");
  x_ = x;
  const int kk = in_c_ * k_ * k_;
  const int p = oh_ * ow_;
  cols_.resize(static_cast<std::size_t>(x.n) * kk * p);
  Tensor y(x.n, out_c_, oh_, ow_);
  CMapM wm(w_.value.v.data(), out_c_, kk);
  for (int i = 0; i < x.n; ++i) {
    double* ci = cols_.data() + static_cast<std::size_t>(i) * kk * p;
    im2col(x.sample(i), in_c_, x.h, x.w, k_, stride_, pad_, oh_, ow_, ci);
    MapM ym(y.sample(i), out_c_, p);
    CMapM cm(ci, kk, p);
    ym.noalias() = wm * cm;
    for (int oc = 0; oc < out_c_; ++oc) ym.row(oc).array() += b_.value.v[oc];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const int kk = in_c_ * k_ * k_;
  const int p = oh_ * ow_;
  Tensor dx(x_.n, in_c_, x_.h, x_.w);
  MapM dwm(w_.grad.v.data(), out_c_, kk);
  CMapM wm(w_.value.v.data(), out_c_, kk);
  std::vector<double> dcols(static_cast<std::size_t>(kk) * p);
  MapM dcm(dcols.data(), kk, p);
  for (int i = 0; i < dy.n; ++i) {
    CMapM dym(dy.sample(i), out_c_, p);
    CMapM cm(cols_.data() + static_cast<std::size_t>(i) * kk * p, kk, p);
    dwm.noalias() += dym * cm.transpose();
    // Scalar accumulation: vectorized reductions reassociate by buffer
    // alignment, which would break bitwise reproducibility across runs.
    for (int oc = 0; oc < out_c_; ++oc) {
      const double* row = dy.sample(i) + static_cast<std::size_t>(oc) * p;
      double s = 0.0;
      for (int j = 0; j < p; ++j) s += row[j];
      b_.grad.v[oc] += s;
    }
    dcm.noalias() = wm.transpose() * dym;
    col2im(dcols.data(), in_c_, x_.h, x_.w, k_, stride_, pad_, oh_, ow_, dx.sample(i));
  }
  return dx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(std::string name, int in_f, int out_f, Rng& init) : in_f_(in_f), out_f_(out_f) {
  w_.name = name + ".w";
  w_.value = Tensor::matrix(out_f, in_f);
  w_.grad = Tensor::matrix(out_f, in_f);
  b_.name = name + ".b";
  b_.value = Tensor::matrix(out_f, 1);
  b_.grad = Tensor::matrix(out_f, 1);
  init_uniform_fan_in(w_.value, in_f, init);
}

Tensor Linear::forward(const Tensor& x, bool, Rng*) {
  if (static_cast<int>(x.sample_size()) != in_f_)
    throw std::invalid_argument("Linear: feature size mismatch");
  x_ = x;
  Tensor y(x.n, out_f_, 1, 1);
  CMapM xm(x.v.data(), x.n, in_f_);
  CMapM wm(w_.value.v.data(), out_f_, in_f_);
  MapM ym(y.v.data(), x.n, out_f_);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < x.n; ++i)
    for (int o = 0; o < out_f_; ++o) ym(i, o) += b_.value.v[o];
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  Tensor dx(x_.n, x_.c, x_.h, x_.w);
  CMapM dym(dy.v.data(), dy.n, out_f_);
  CMapM xm(x_.v.data(), x_.n, in_f_);
  CMapM wm(w_.value.v.data(), out_f_, in_f_);
  MapM dwm(w_.grad.v.data(), out_f_, in_f_);
  MapM dxm(dx.v.data(), dx.n, in_f_);
  dwm.noalias() += dym.transpose() * xm;
  // Scalar accumulation; see Conv2d::backward for why.
  for (int o = 0; o < out_f_; ++o) {
    double s = 0.0;
    for (int i = 0; i < dy.n; ++i) s += dy.v[static_cast<std::size_t>(i) * out_f_ + o];
    b_.grad.v[o] += s;
  }
  dxm.noalias() = dym * wm;
  return dx;
}

void Linear::collect_params(std::vector<Param*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

// ---------------------------------------------------------------------------
// Activations, dropout, pooling, upsampling
// ---------------------------------------------------------------------------

Tensor LeakyRelu::forward(const Tensor& x, bool, Rng*) {
  x_ = x;
  Tensor y = x;
  for (double& v : y.v)
    if (v < 0.0) v *= slope_;
  return y;
}

Tensor LeakyRelu::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i)
    if (x_.v[i] < 0.0) dx.v[i] *= slope_;
  return dx;
}

Tensor Dropout::forward(const Tensor& x, bool train, Rng* rng) {
  if (!train || rate_ <= 0.0) {
    mask_.clear();
    return x;
  }
  if (rng == nullptr) throw std::invalid_argument("Dropout: train mode needs an Rng");
  const double keep = 1.0 - rate_;
  mask_.resize(x.v.size());
  Tensor y = x;
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    mask_[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    y.v[i] *= mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (mask_.empty()) return dy;
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= mask_[i];
  return dx;
}

Tensor Upsample2x::forward(const Tensor& x, bool, Rng*) {
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor y(x.n, x.c, 2 * x.h, 2 * x.w);
  for (int i = 0; i < x.n; ++i)
    for (int ic = 0; ic < x.c; ++ic)
      for (int iy = 0; iy < x.h; ++iy)
        for (int ix = 0; ix < x.w; ++ix) {
          const double v = x.at(i, ic, iy, ix);
          y.at(i, ic, 2 * iy, 2 * ix) = v;
          y.at(i, ic, 2 * iy, 2 * ix + 1) = v;
          y.at(i, ic, 2 * iy + 1, 2 * ix) = v;
          y.at(i, ic, 2 * iy + 1, 2 * ix + 1) = v;
        }
  return y;
}

Tensor Upsample2x::backward(const Tensor& dy) {
  Tensor dx(dy.n, dy.c, in_h_, in_w_);
  for (int i = 0; i < dy.n; ++i)
    for (int ic = 0; ic < dy.c; ++ic)
      for (int iy = 0; iy < in_h_; ++iy)
        for (int ix = 0; ix < in_w_; ++ix)
          dx.at(i, ic, iy, ix) = dy.at(i, ic, 2 * iy, 2 * ix) + dy.at(i, ic, 2 * iy, 2 * ix + 1) +
                                 dy.at(i, ic, 2 * iy + 1, 2 * ix) +
                                 dy.at(i, ic, 2 * iy + 1, 2 * ix + 1);
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool, Rng*) {
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor y(x.n, x.c, 1, 1);
  const double inv = 1.0 / (static_cast<double>(x.h) * x.w);
  for (int i = 0; i < x.n; ++i)
    for (int ic = 0; ic < x.c; ++ic) {
      const double* p = x.v.data() + x.index(i, ic, 0, 0);
      double s = 0.0;
      for (int j = 0; j < x.h * x.w; ++j) s += p[j];
      y.at(i, ic, 0, 0) = s * inv;
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  Tensor dx(dy.n, dy.c, in_h_, in_w_);
  const double inv = 1.0 / (static_cast<double>(in_h_) * in_w_);
  for (int i = 0; i < dy.n; ++i)
    for (int ic = 0; ic < dy.c; ++ic) {
      const double g = dy.at(i, ic, 0, 0) * inv;
      double* p = dx.v.data() + dx.index(i, ic, 0, 0);
      for (int j = 0; j < in_h_ * in_w_; ++j) p[j] = g;
    }
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, bool, Rng*) {
  Tensor y = x;
  for (double& v : y.v) v = 1.0 / (1.0 + std::exp(-v));
  y_ = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y_.v[i] * (1.0 - y_.v[i]);
  return dx;
}

Tensor ChannelSoftmax::forward(const Tensor& x, bool, Rng*) {
  Tensor y = x;
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  for (int i = 0; i < x.n; ++i) {
    double* base = y.sample(i);
    for (std::size_t px = 0; px < plane; ++px) {
      double mx = base[px];
      for (int ic = 1; ic < x.c; ++ic) mx = std::max(mx, base[ic * plane + px]);
      double sum = 0.0;
      for (int ic = 0; ic < x.c; ++ic) {
        double e = std::exp(base[ic * plane + px] - mx);
        base[ic * plane + px] = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (int ic = 0; ic < x.c; ++ic) base[ic * plane + px] *= inv;
    }
  }
  y_ = y;
  return y;
}

Tensor ChannelSoftmax::backward(const Tensor& dy) {
  Tensor dx = dy;
  const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
  for (int i = 0; i < dy.n; ++i) {
    const double* yb = y_.sample(i);
    const double* gb = dy.sample(i);
    double* ob = dx.sample(i);
    for (std::size_t px = 0; px < plane; ++px) {
      double dot = 0.0;
      for (int ic = 0; ic < dy.c; ++ic) dot += gb[ic * plane + px] * yb[ic * plane + px];
      for (int ic = 0; ic < dy.c; ++ic)
        ob[ic * plane + px] = yb[ic * plane + px] * (gb[ic * plane + px] - dot);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// SegNet
// ---------------------------------------------------------------------------

SegNet::SegNet(const SegNetConfig& cfg, Rng& init) : cfg_(cfg) {
  if (cfg.depth < 1 || cfg.width < 1) throw std::invalid_argument("SegNet: bad config");
  int idx = 0;
  auto conv = [&](int ic, int oc, int k, int s, int p) {
    layers_.push_back(std::make_unique<Conv2d>("conv" + std::to_string(idx++), ic, oc, k, s, p, init));
  };
  auto act = [&] { layers_.push_back(std::make_unique<LeakyRelu>(cfg.leaky_slope)); };

  conv(cfg.in_ch, cfg.width, 3, 1, 1);
  act();
  int ch = cfg.width;
  for (int d = 0; d < cfg.depth; ++d) {
    conv(ch, ch * 2, 3, 2, 1);
    act();
    conv(ch * 2, ch * 2, 3, 1, 1);
    act();
    ch *= 2;
  }
  for (int d = 0; d < cfg.depth; ++d) {
    layers_.push_back(std::make_unique<Upsample2x>());
    conv(ch, ch / 2, 3, 1, 1);
    act();
    ch /= 2;
  }
  conv(ch, cfg.num_classes, 1, 1, 0);
  layers_.push_back(std::make_unique<ChannelSoftmax>());
}

Tensor SegNet::forward(const Tensor& images, bool train, Rng* rng) {
  if (images.c != cfg_.in_ch) throw std::invalid_argument("SegNet: channel mismatch");
  const int div = 1 << cfg_.depth;
  if (images.h % div != 0 || images.w % div != 0)
    throw std::invalid_argument("SegNet: spatial size not divisible by 2^depth");
  Tensor y = images;
  for (auto& l : layers_) y = l->forward(y, train, rng);
  return y;
}

Tensor SegNet::backward(const Tensor& dprobs) {
  Tensor g = dprobs;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Param*> SegNet::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) l->collect_params(out);
  return out;
}

// ---------------------------------------------------------------------------
// DiscNet
// ---------------------------------------------------------------------------

DiscNet::DiscNet(const DiscNetConfig& cfg, Rng& init) : cfg_(cfg) {
  int ch = cfg.in_ch;
  for (int s = 0; s < 4; ++s) {
    stages_.push_back(std::make_unique<Conv2d>("conv" + std::to_string(s), ch, cfg.widths[s],
                                               cfg.kernel, 2, 1, init));
    stages_.push_back(std::make_unique<LeakyRelu>(cfg.leaky_slope));
    stages_.push_back(std::make_unique<Dropout>(cfg.dropout));
    ch = cfg.widths[s];
  }
  head_ = std::make_unique<Linear>("head", ch, 1, init);
}

DiscOut DiscNet::forward(const Tensor& x, bool train, Rng* rng) {
  if (x.c != cfg_.in_ch)
    throw std::invalid_argument("DiscNet: channel count mismatch");
  Tensor y = x;
  for (auto& l : stages_) y = l->forward(y, train, rng);
  Tensor feat = gap_.forward(y, train, rng);
  Tensor logit = head_->forward(feat, train, rng);
  DiscOut out;
  out.features = feat;
  out.scores.resize(x.n);
  for (int i = 0; i < x.n; ++i) out.scores[i] = 1.0 / (1.0 + std::exp(-logit.v[i]));
  scores_ = out.scores;
  return out;
}

Tensor DiscNet::backward(const std::vector<double>& dscores, const Tensor& dfeatures) {
  const int n = static_cast<int>(scores_.size());
  Tensor dlogit(n, 1, 1, 1);
  for (int i = 0; i < n; ++i) {
    const double ds = dscores.empty() ? 0.0 : dscores[i];
    dlogit.v[i] = ds * scores_[i] * (1.0 - scores_[i]);
  }
  Tensor dfeat = head_->backward(dlogit);
  if (!dfeatures.empty()) dfeat.add(dfeatures);
  Tensor g = gap_.backward(dfeat);
  for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Param*> DiscNet::params() {
  std::vector<Param*> out;
  for (auto& l : stages_) l->collect_params(out);
  head_->collect_params(out);
  return out;
}

// ---------------------------------------------------------------------------
// ClfNet
// ---------------------------------------------------------------------------

ClfNet::ClfNet(const ClfNetConfig& cfg, Rng& init) : cfg_(cfg) {
  int ch = cfg.in_ch;
  int width = cfg.width;
  for (int d = 0; d < cfg.depth; ++d) {
    layers_.push_back(
        std::make_unique<Conv2d>("conv" + std::to_string(d), ch, width, 3, 2, 1, init));
    layers_.push_back(std::make_unique<LeakyRelu>(cfg.leaky_slope));
    ch = width;
    width *= 2;
  }
  layers_.push_back(std::make_unique<GlobalAvgPool>());
  layers_.push_back(std::make_unique<Linear>("head", ch, cfg.num_classes, init));
  layers_.push_back(std::make_unique<Sigmoid>());
}

Tensor ClfNet::forward(const Tensor& images, bool train, Rng* rng) {
  if (images.c != cfg_.in_ch) throw std::invalid_argument("ClfNet: channel mismatch");
  Tensor y = images;
  for (auto& l : layers_) y = l->forward(y, train, rng);
  return y;
}

Tensor ClfNet::backward(const Tensor& dprobs) {
  Tensor g = dprobs;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Param*> ClfNet::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) l->collect_params(out);
  return out;
}

void copy_params(const std::vector<Param*>& src, const std::vector<Param*>& dst) {
  if (src.size() != dst.size()) throw std::invalid_argument("copy_params: arity mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!src[i]->value.same_shape(dst[i]->value))
      throw std::invalid_argument("copy_params: shape mismatch at " + src[i]->name);
    dst[i]->value.v = src[i]->value.v;
  }
}

}  // namespace semiseg
