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
#include <cmath>
#include <vector>

#include "doctest.h"
#include "semiseg/nn.hpp"
#include "semiseg/rng.hpp"
#include "semiseg/tensor.hpp"

namespace {

using namespace semiseg;

Tensor random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor t(n, c, h, w);
  for (double& v : t.v) v = rng.uniform(-scale, scale);
  return t;
}

// Direct convolution, no im2col: the oracle.
Tensor conv_naive(const Tensor& x, const Tensor& w, const Tensor& b, int out_c, int k, int stride,
                  int pad) {
  const int oh = (x.h + 2 * pad - k) / stride + 1;
  const int ow = (x.w + 2 * pad - k) / stride + 1;
  Tensor y(x.n, out_c, oh, ow);
  for (int n = 0; n < x.n; ++n) {
    for (int oc = 0; oc < out_c; ++oc) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b.v[oc];
          for (int ic = 0; ic < x.c; ++ic) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                int iy = oy * stride + ky - pad;
                int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                double wv = w.v[(static_cast<std::size_t>(oc) * x.c + ic) * k * k + ky * k + kx];
                acc += wv * x.at(n, ic, iy, ix);
              }
            }
          }
          y.at(n, oc, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

// Sum-of-outputs loss gradient check through a single layer.
double layer_loss(Layer& layer, const Tensor& x, const Tensor& weights) {
  Tensor y = layer.forward(x, false, nullptr);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.v[i] * weights.v[i % weights.size()];
  return s;
}

TEST_SUITE_BEGIN("nn");

TEST_CASE("conv2d forward matches the direct-loop oracle") {
  Rng init(1);
  for (auto [k, stride, pad] : std::vector<std::array<int, 3>>{{3, 1, 1}, {4, 2, 1}, {1, 1, 0}}) {
    Conv2d conv("c", 3, 4, k, stride, pad, init);
    std::vector<Param*> ps;
    conv.collect_params(ps);
    REQUIRE(ps.size() == 2);
    Rng rng(2);
    Tensor x = random_tensor(2, 3, 8, 8, rng);
    Tensor y = conv.forward(x, false, nullptr);
    Tensor ref = conv_naive(x, ps[0]->value, ps[1]->value, 4, k, stride, pad);
    REQUIRE(y.same_shape(ref));
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(y.v[i] == doctest::Approx(ref.v[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d gradients match central differences") {
  Rng init(3);
  Conv2d conv("c", 2, 3, 3, 2, 1, init);
  std::vector<Param*> ps;
  conv.collect_params(ps);
  Rng rng(4);
  Tensor x = random_tensor(1, 2, 6, 6, rng);
  Tensor y = conv.forward(x, true, nullptr);
  Tensor wsum = random_tensor(y.n, y.c, y.h, y.w, rng);

  // Analytic: dL/dy = wsum.
  for (Param* p : ps) p->grad.v.assign(p->grad.size(), 0.0);
  Tensor dx = conv.backward(wsum);

  const double eps = 1e-6;
  for (Param* p : ps) {
    for (std::size_t i = 0; i < p->value.size(); i += std::max<std::size_t>(1, p->value.size() / 17)) {
      double orig = p->value.v[i];
      p->value.v[i] = orig + eps;
      double lp = layer_loss(conv, x, wsum);
      p->value.v[i] = orig - eps;
      double lm = layer_loss(conv, x, wsum);
      p->value.v[i] = orig;
      double num = (lp - lm) / (2 * eps);
      CHECK(p->grad.v[i] == doctest::Approx(num).epsilon(1e-5));
    }
  }
  // Input gradient spot checks.
  {
    // Re-establish the cache for x (finite differences clobbered it).
    conv.forward(x, true, nullptr);
    conv.backward(wsum);
    for (std::size_t i = 0; i < x.size(); i += 7) {
      Tensor xp = x, xm = x;
      xp.v[i] += eps;
      xm.v[i] -= eps;
      double lp = layer_loss(conv, xp, wsum);
      double lm = layer_loss(conv, xm, wsum);
      double num = (lp - lm) / (2 * eps);
      CHECK(dx.v[i] == doctest::Approx(num).epsilon(1e-5));
    }
  }
}

TEST_CASE("linear layer matches a hand matmul") {
  Rng init(5);
  Linear lin("l", 3, 2, init);
  std::vector<Param*> ps;
  lin.collect_params(ps);
  // Overwrite with hand values: w = [[1,2,3],[4,5,6]], b = [0.5, -0.5].
  ps[0]->value.v = {1, 2, 3, 4, 5, 6};
  ps[1]->value.v = {0.5, -0.5};
  Tensor x(1, 3, 1, 1);
  x.v = {1.0, 0.5, -1.0};
  Tensor y = lin.forward(x, false, nullptr);
  CHECK(y.v[0] == doctest::Approx(1 + 1 - 3 + 0.5));
  CHECK(y.v[1] == doctest::Approx(4 + 2.5 - 6 - 0.5));
}

TEST_CASE("channel softmax normalizes per pixel and backward matches oracle") {
  Rng rng(6);
  ChannelSoftmax sm;
  Tensor x = random_tensor(2, 5, 3, 3, rng, 3.0);
  Tensor y = sm.forward(x, false, nullptr);
  for (int n = 0; n < y.n; ++n) {
    for (int i = 0; i < y.h; ++i) {
      for (int j = 0; j < y.w; ++j) {
        double s = 0.0;
        for (int c = 0; c < y.c; ++c) {
          s += y.at(n, c, i, j);
          CHECK(y.at(n, c, i, j) > 0.0);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
      }
    }
  }

  // Jacobian-vector product vs finite differences at one pixel.
  Tensor dy = random_tensor(2, 5, 3, 3, rng);
  Tensor dx = sm.backward(dy);
  const double eps = 1e-7;
  for (int c = 0; c < 5; ++c) {
    Tensor xp = x, xm = x;
    xp.at(0, c, 1, 1) += eps;
    xm.at(0, c, 1, 1) -= eps;
    ChannelSoftmax s2;
    Tensor yp = s2.forward(xp, false, nullptr);
    Tensor ym = s2.forward(xm, false, nullptr);
    double num = 0.0;
    for (std::size_t i = 0; i < yp.size(); ++i) num += (yp.v[i] - ym.v[i]) / (2 * eps) * dy.v[i];
    CHECK(dx.at(0, c, 1, 1) == doctest::Approx(num).epsilon(1e-4));
  }
}

TEST_CASE("dropout: eval identity, train scaling preserves expectation") {
  Dropout drop(0.5);
  Rng rng(7);
  Tensor x(1, 4, 8, 8);
  for (double& v : x.v) v = rng.uniform(0.5, 1.5);  // positive: sums stay away from zero
  Tensor y_eval = drop.forward(x, false, nullptr);
  CHECK(y_eval.v == x.v);

  Rng drng(8);
  double sum = 0.0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    Tensor y = drop.forward(x, true, &drng);
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK((y.v[i] == 0.0 || y.v[i] == doctest::Approx(2.0 * x.v[i])));
      sum += y.v[i];
    }
  }
  double xsum = 0.0;
  for (double v : x.v) xsum += v;
  CHECK(sum / trials == doctest::Approx(xsum).epsilon(0.05));
}

TEST_CASE("upsample2x nearest and its adjoint") {
  Tensor x(1, 1, 2, 2);
  x.v = {1, 2, 3, 4};
  Upsample2x up;
  Tensor y = up.forward(x, false, nullptr);
  REQUIRE(y.h == 4);
  CHECK(y.at(0, 0, 0, 0) == 1);
  CHECK(y.at(0, 0, 0, 1) == 1);
  CHECK(y.at(0, 0, 1, 1) == 1);
  CHECK(y.at(0, 0, 3, 3) == 4);

  Tensor dy(1, 1, 4, 4);
  for (std::size_t i = 0; i < dy.size(); ++i) dy.v[i] = 1.0;
  Tensor dx = up.backward(dy);
  CHECK(dx.v == std::vector<double>{4, 4, 4, 4});  // each input feeds 4 outputs
}

TEST_CASE("segnet: valid distributions, finite on zero input, deterministic") {
  SegNetConfig cfg;
  cfg.num_classes = 4;
  cfg.width = 4;
  cfg.depth = 2;
  Rng init(9);
  SegNet net(cfg, init);

  Tensor zero(2, 3, 16, 16);
  Tensor y = net.forward(zero, false, nullptr);
  REQUIRE(y.c == 4);
  for (double v : y.v) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
  for (int n = 0; n < y.n; ++n) {
    for (int i = 0; i < y.h; ++i) {
      for (int j = 0; j < y.w; ++j) {
        double s = 0.0;
        for (int c = 0; c < y.c; ++c) s += y.at(n, c, i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
      }
    }
  }

  Rng rng(10);
  Tensor x = random_tensor(1, 3, 16, 16, rng, 0.5);
  Tensor a = net.forward(x, false, nullptr);
  Tensor b = net.forward(x, false, nullptr);
  CHECK(a.v == b.v);  // bitwise

  CHECK_THROWS(net.forward(Tensor(1, 3, 15, 16), false, nullptr));  // not divisible by 2^depth
  CHECK_THROWS(net.forward(Tensor(1, 2, 16, 16), false, nullptr));  // wrong channel count
}

TEST_CASE("discriminator: sigmoid range, per-sample independence, eval determinism") {
  DiscNetConfig cfg;
  cfg.in_ch = 7;  // 4 classes + 3 channels
  cfg.widths = {4, 4, 8, 8};
  Rng init(11);
  DiscNet disc(cfg, init);

  Rng rng(12);
  Tensor x = random_tensor(4, 7, 16, 16, rng, 0.8);
  DiscOut out = disc.forward(x, false, nullptr);
  REQUIRE(out.scores.size() == 4);
  for (double s : out.scores) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
  CHECK(out.features.n == 4);
  CHECK(out.features.c == 8);

  // Swapping batch order permutes outputs identically.
  Tensor swapped = x;
  std::vector<int> perm = {2, 0, 3, 1};
  for (int i = 0; i < 4; ++i) {
    const double* src = x.sample(perm[i]);
    std::copy(src, src + x.sample_size(), swapped.sample(i));
  }
  DiscOut out2 = disc.forward(swapped, false, nullptr);
  for (int i = 0; i < 4; ++i) {
    CHECK(out2.scores[i] == out.scores[perm[i]]);
    for (int f = 0; f < out.features.c; ++f) {
      CHECK(out2.features.at(i, f, 0, 0) == out.features.at(perm[i], f, 0, 0));
    }
  }

  DiscOut out3 = disc.forward(x, false, nullptr);
  CHECK(out3.scores == out.scores);

  CHECK_THROWS(disc.forward(Tensor(1, 6, 16, 16), false, nullptr));
}

TEST_CASE("classifier: independent per-class probabilities, permutation equivariance") {
  ClfNetConfig cfg;
  cfg.num_classes = 5;
  cfg.width = 4;
  cfg.depth = 2;
  Rng init(13);
  ClfNet net(cfg, init);

  Rng rng(14);
  Tensor x = random_tensor(3, 3, 16, 16, rng, 0.6);
  Tensor y = net.forward(x, false, nullptr);
  REQUIRE(y.n == 3);
  REQUIRE(y.c == 5);
  double row_sum = 0.0;
  for (double v : y.v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  for (int c = 0; c < 5; ++c) row_sum += y.at(0, c, 0, 0);
  CHECK(row_sum != doctest::Approx(1.0).epsilon(1e-9));  // not softmax-coupled

  Tensor swapped = x;
  std::vector<int> perm = {1, 2, 0};
  for (int i = 0; i < 3; ++i) {
    const double* src = x.sample(perm[i]);
    std::copy(src, src + x.sample_size(), swapped.sample(i));
  }
  Tensor y2 = net.forward(swapped, false, nullptr);
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < 5; ++c) CHECK(y2.at(i, c, 0, 0) == y.at(perm[i], c, 0, 0));
  }

  Tensor y3 = net.forward(x, false, nullptr);
  CHECK(y3.v == y.v);
}

TEST_CASE("copy_params transfers values and checks shapes") {
  SegNetConfig cfg;
  cfg.width = 2;
  cfg.depth = 1;
  Rng i1(15), i2(16);
  SegNet a(cfg, i1), b(cfg, i2);
  auto pa = a.params(), pb = b.params();
  REQUIRE(pa.size() == pb.size());
  bool differ = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value.v != pb[i]->value.v) differ = true;
  }
  CHECK(differ);
  copy_params(pa, pb);  // a -> b
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pb[i]->value.v == pa[i]->value.v);
}

TEST_SUITE_END();

}  // namespace
