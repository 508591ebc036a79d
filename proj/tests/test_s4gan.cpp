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
#include "semiseg/data.hpp"
#include "semiseg/hyperparams.hpp"
#include "semiseg/rng.hpp"
#include "semiseg/s4gan.hpp"

namespace {

using namespace semiseg;

Tensor random_probs(int n, int c, int h, int w, Rng& rng) {
  Tensor t(n, c, h, w);
  for (int i = 0; i < n; ++i)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int k = 0; k < c; ++k) {
          double v = rng.uniform(0.01, 1.0);
          t.at(i, k, y, x) = v;
          s += v;
        }
        for (int k = 0; k < c; ++k) t.at(i, k, y, x) /= s;
      }
  return t;
}

std::vector<Mask> random_masks(int n, int c, int h, int w, Rng& rng) {
  std::vector<Mask> ms;
  for (int i = 0; i < n; ++i) {
    Mask m(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) m.at(y, x) = static_cast<std::uint8_t>(rng.uniform_index(c));
    ms.push_back(m);
  }
  return ms;
}

Tensor random_images(int n, int c, int h, int w, Rng& rng) {
  Tensor t(n, c, h, w);
  for (double& v : t.v) v = rng.uniform(0.0, 1.0);
  return t;
}

// Independent scalar-loop oracle for the pixel-mean cross-entropy.
double ce_oracle(const Tensor& probs, const std::vector<Mask>& masks) {
  double total = 0.0;
  for (int i = 0; i < probs.n; ++i)
    for (int y = 0; y < probs.h; ++y)
      for (int x = 0; x < probs.w; ++x)
        total += -std::log(std::max(probs.at(i, masks[i].at(y, x), y, x), 1e-8));
  return total / (static_cast<double>(probs.n) * probs.h * probs.w);
}

HyperParams tiny_hp() {
  HyperParams hp;
  hp.max_iter = 100;
  hp.batch_size = 2;
  return hp;
}

S4GanConfig tiny_cfg(int num_classes = 4) {
  S4GanConfig cfg;
  cfg.gen.num_classes = num_classes;
  cfg.gen.width = 4;
  cfg.gen.depth = 2;
  cfg.disc.in_ch = num_classes + 3;
  cfg.disc.widths = {4, 4, 8, 8};
  return cfg;
}

TEST_SUITE_BEGIN("s4gan");

TEST_CASE("one_hot_masks places a single one at the labeled class") {
  Mask m(2, 2);
  m.at(0, 0) = 0;
  m.at(0, 1) = 2;
  m.at(1, 0) = 1;
  m.at(1, 1) = 2;
  Tensor oh = one_hot_masks({m}, 3);
  REQUIRE(oh.n == 1);
  REQUIRE(oh.c == 3);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += oh.at(0, c, y, x);
      CHECK(s == 1.0);
      CHECK(oh.at(0, m.at(y, x), y, x) == 1.0);
    }
  CHECK_THROWS(one_hot_masks({m}, 2));  // class 2 out of range
  CHECK_THROWS(one_hot_masks({}, 3));
  Mask other(3, 2);
  CHECK_THROWS(one_hot_masks({m, other}, 3));
}

TEST_CASE("disc_input stacks segmentation channels before image channels") {
  Tensor seg(1, 2, 2, 2), img(1, 3, 2, 2);
  for (std::size_t i = 0; i < seg.size(); ++i) seg.v[i] = 10.0 + static_cast<double>(i);
  for (std::size_t i = 0; i < img.size(); ++i) img.v[i] = 100.0 + static_cast<double>(i);
  Tensor x = disc_input(seg, img);
  REQUIRE(x.c == 5);
  CHECK(x.at(0, 0, 0, 0) == 10.0);
  CHECK(x.at(0, 1, 1, 1) == seg.at(0, 1, 1, 1));
  CHECK(x.at(0, 2, 0, 0) == 100.0);
  CHECK(x.at(0, 4, 1, 1) == img.at(0, 2, 1, 1));
}

TEST_CASE("loss_ce on uniform predictions is ln(num_classes)") {
  const int c = 4;
  Tensor probs(2, c, 3, 3);
  probs.fill(1.0 / c);
  Mask m(3, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) m.at(y, x) = static_cast<std::uint8_t>((y + x) % c);
  CHECK(loss_ce(probs, {m, m}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("loss_ce matches the scalar-loop oracle on random batches") {
  Rng rng(21);
  for (int t = 0; t < 5; ++t) {
    Tensor probs = random_probs(3, 5, 6, 4, rng);
    auto masks = random_masks(3, 5, 6, 4, rng);
    double got = loss_ce(probs, masks);
    double want = ce_oracle(probs, masks);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("loss_ce clamps vanishing probabilities") {
  Tensor probs(1, 2, 1, 1);
  probs.at(0, 0, 0, 0) = 0.0;  // the labeled class has probability zero
  probs.at(0, 1, 0, 0) = 1.0;
  Mask m(1, 1);
  m.at(0, 0) = 0;
  double l = loss_ce(probs, {m});
  CHECK(std::isfinite(l));
  CHECK(l == doctest::Approx(-std::log(1e-8)).epsilon(1e-12));
}

TEST_CASE("loss_ce rejects malformed batches") {
  Tensor probs(1, 3, 2, 2);
  probs.fill(1.0 / 3);
  Mask wrong_shape(3, 2);
  CHECK_THROWS(loss_ce(probs, {wrong_shape}));
  Mask bad_class(2, 2);
  bad_class.at(0, 0) = 7;
  CHECK_THROWS(loss_ce(probs, {bad_class}));
  CHECK_THROWS(loss_ce(probs, {}));
}

TEST_CASE("loss_ce_grad: same value, finite-difference gradient, accumulation") {
  Rng rng(22);
  Tensor probs = random_probs(2, 3, 3, 3, rng);
  auto masks = random_masks(2, 3, 3, 3, rng);

  Tensor g(2, 3, 3, 3);
  double v = loss_ce_grad(probs, masks, 1.0, g);
  CHECK(v == loss_ce(probs, masks));

  const double eps = 1e-7;
  for (int i = 0; i < 2; ++i)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        int c = masks[i].at(y, x);
        Tensor p2 = probs;
        p2.at(i, c, y, x) += eps;
        double lp = loss_ce(p2, masks);
        p2.at(i, c, y, x) -= 2 * eps;
        double lm = loss_ce(p2, masks);
        CHECK(g.at(i, c, y, x) == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-5));
        // Off-target classes carry no gradient.
        CHECK(g.at(i, (c + 1) % 3, y, x) == 0.0);
      }

  // weight scales, and grads accumulate into a pre-filled buffer.
  Tensor g2(2, 3, 3, 3);
  loss_ce_grad(probs, masks, 2.0, g2);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g2.v[i] == doctest::Approx(2.0 * g.v[i]));
  Tensor g3 = g;
  loss_ce_grad(probs, masks, 1.0, g3);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g3.v[i] == doctest::Approx(2.0 * g.v[i]));
}

TEST_CASE("feature_matching hand values") {
  Tensor real(1, 2, 1, 1), fake(1, 2, 1, 1);
  real.v = {1.0, 2.0};
  fake.v = {1.0, 4.0};
  CHECK(feature_matching(real, fake, FmNorm::kL1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(feature_matching(real, fake, FmNorm::kL2) == doctest::Approx(2.0).epsilon(1e-12));

  // Batch means drive the value, not per-sample pairs.
  Tensor real2(2, 2, 1, 1);
  real2.v = {0.0, 0.0, 2.0, 4.0};  // means (1, 2)
  CHECK(feature_matching(real2, fake, FmNorm::kL1) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(feature_matching(real, real, FmNorm::kL1) == 0.0);
  Tensor bad(1, 3, 1, 1);
  CHECK_THROWS(feature_matching(real, bad, FmNorm::kL1));
}

TEST_CASE("feature_matching_grad matches finite differences on the fake side") {
  Rng rng(23);
  for (FmNorm norm : {FmNorm::kL1, FmNorm::kL2}) {
    Tensor real(3, 4, 1, 1), fake(2, 4, 1, 1);
    for (double& v : real.v) v = rng.uniform(-1.0, 1.0);
    for (double& v : fake.v) v = rng.uniform(-1.0, 1.0);
    Tensor g(2, 4, 1, 1);
    double base = feature_matching_grad(real, fake, norm, 1.0, g);
    CHECK(base == feature_matching(real, fake, norm));
    const double eps = 1e-6;
    for (std::size_t i = 0; i < fake.size(); ++i) {
      Tensor f2 = fake;
      f2.v[i] += eps;
      double lp = feature_matching(real, f2, norm);
      f2.v[i] -= 2 * eps;
      double lm = feature_matching(real, f2, norm);
      CHECK(g.v[i] == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-4));
    }
  }
}

TEST_CASE("loss_fm equals feature_matching on the discriminator's pooled features") {
  DiscNetConfig dcfg;
  dcfg.in_ch = 7;
  dcfg.widths = {4, 4, 8, 8};
  Rng init(24);
  DiscNet disc(dcfg, init);
  Rng rng(25);
  Tensor a = random_images(2, 7, 16, 16, rng);
  Tensor b = random_images(3, 7, 16, 16, rng);
  Tensor fa = disc.forward(a, false, nullptr).features;
  Tensor fb = disc.forward(b, false, nullptr).features;
  CHECK(loss_fm(disc, a, b, FmNorm::kL1) ==
        doctest::Approx(feature_matching(fa, fb, FmNorm::kL1)).epsilon(1e-12));
  CHECK(loss_fm(disc, a, b, FmNorm::kL2) ==
        doctest::Approx(feature_matching(fa, fb, FmNorm::kL2)).epsilon(1e-12));
}

TEST_CASE("pseudo-label gate honors gamma with the score clamp") {
  Tensor probs(1, 3, 2, 2);
  probs.fill(1.0 / 3);
  probs.at(0, 2, 0, 0) = 0.9;  // make one confident pixel

  CHECK(!make_pseudo_labels(probs, 0.59, 0.6).has_value());
  auto pl = make_pseudo_labels(probs, 0.6, 0.6);
  REQUIRE(pl.has_value());
  CHECK(pl->confidence == doctest::Approx(0.6));
  CHECK(pl->mask.at(0, 0) == 2);

  // gamma = 1.0 never opens: even a raw score of 1.0 clamps below it.
  CHECK(!make_pseudo_labels(probs, 1.0, 1.0).has_value());
  // gamma = 0.0 always opens, even at a raw score of 0.0.
  CHECK(make_pseudo_labels(probs, 0.0, 0.0).has_value());

  // Ties pick the lowest class index.
  Tensor tied(1, 4, 1, 2);
  tied.fill(0.25);
  auto tp = make_pseudo_labels(tied, 0.9, 0.5);
  REQUIRE(tp.has_value());
  CHECK(tp->mask.at(0, 0) == 0);
  CHECK(tp->mask.at(0, 1) == 0);

  Tensor batch2(2, 3, 2, 2);
  CHECK_THROWS(make_pseudo_labels(batch2, 0.9, 0.5));
}

TEST_CASE("loss_st equals cross-entropy against the admitted mask, zero otherwise") {
  Rng rng(26);
  Tensor probs = random_probs(1, 3, 4, 4, rng);
  auto pl = make_pseudo_labels(probs, 0.95, 0.5);
  REQUIRE(pl.has_value());
  CHECK(loss_st(probs, pl) == doctest::Approx(loss_ce(probs, {pl->mask})).epsilon(1e-12));
  CHECK(loss_st(probs, std::nullopt) == 0.0);
}

TEST_CASE("d_objective hand values and clamping") {
  std::vector<double> half = {0.5, 0.5};
  CHECK(d_objective(half, half) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(d_objective({0.8}, {0.3}) ==
        doctest::Approx(-(std::log(0.8) + std::log(0.7))).epsilon(1e-12));
  // Degenerate scores stay finite through the clamp.
  double l = d_objective({1.0}, {1.0});
  CHECK(std::isfinite(l));
  CHECK(l == doctest::Approx(-std::log(1.0 - 1e-7) - std::log(1e-7)).epsilon(1e-9));
  CHECK(std::isfinite(d_objective({0.0}, {0.0})));
  CHECK_THROWS(d_objective({}, {0.5}));
  CHECK_THROWS(d_objective({0.5}, {}));
}

TEST_CASE("trainer rejects a mismatched discriminator input width") {
  S4GanConfig cfg = tiny_cfg();
  cfg.disc.in_ch = 5;  // should be 4 + 3
  CHECK_THROWS(S4ganTrainer(cfg, tiny_hp(), 1));
}

TEST_CASE("trainer: zero lambdas reduce the total to pure cross-entropy") {
  HyperParams hp = tiny_hp();
  hp.lambda_fm = 0.0;
  hp.lambda_st = 0.0;
  S4ganTrainer tr(tiny_cfg(), hp, 7);
  Rng rng(27);
  Tensor xl = random_images(2, 3, 8, 8, rng);
  auto ml = random_masks(2, 4, 8, 8, rng);
  Tensor xu = random_images(2, 3, 8, 8, rng);
  for (int it = 0; it < 3; ++it) {
    auto l = tr.step(xl, ml, xu, it);
    CHECK(l.total == l.ce);
    CHECK(l.fm == 0.0);
    CHECK(l.st == 0.0);
  }
}

TEST_CASE("trainer: a zero learning rate leaves every parameter bitwise unchanged") {
  HyperParams hp = tiny_hp();
  hp.lr_seg = 0.0;
  hp.lr_disc = 0.0;
  S4ganTrainer tr(tiny_cfg(), hp, 8);
  Rng rng(28);
  Tensor xl = random_images(2, 3, 8, 8, rng);
  auto ml = random_masks(2, 4, 8, 8, rng);
  Tensor xu = random_images(2, 3, 8, 8, rng);

  std::vector<std::vector<double>> before;
  for (Param* p : tr.generator().params()) before.push_back(p->value.v);
  for (Param* p : tr.discriminator().params()) before.push_back(p->value.v);

  tr.step(xl, ml, xu, 0);

  std::size_t k = 0;
  for (Param* p : tr.generator().params()) CHECK(p->value.v == before[k++]);
  for (Param* p : tr.discriminator().params()) CHECK(p->value.v == before[k++]);
}

TEST_CASE("trainer: logged total composes from the logged terms") {
  HyperParams hp = tiny_hp();
  S4ganTrainer tr(tiny_cfg(), hp, 9);
  Rng rng(29);
  for (int it = 0; it < 20; ++it) {
    Tensor xl = random_images(2, 3, 8, 8, rng);
    auto ml = random_masks(2, 4, 8, 8, rng);
    Tensor xu = random_images(2, 3, 8, 8, rng);
    auto l = tr.step(xl, ml, xu, it);
    double recomposed = l.ce + hp.lambda_fm * l.fm + hp.lambda_st * l.st;
    CHECK(l.total == doctest::Approx(recomposed).epsilon(1e-6));
  }
}

TEST_CASE("trainer: gamma at the extremes closes or opens the self-training gate") {
  Rng rng(30);
  Tensor xl = random_images(2, 3, 8, 8, rng);
  auto ml = random_masks(2, 4, 8, 8, rng);
  Tensor xu = random_images(3, 3, 8, 8, rng);

  HyperParams closed = tiny_hp();
  closed.gamma = 1.0;
  S4ganTrainer tc(tiny_cfg(), closed, 10);
  for (int it = 0; it < 5; ++it) {
    auto l = tc.step(xl, ml, xu, it);
    CHECK(l.st == 0.0);
    CHECK(l.admitted == 0);
  }

  HyperParams open = tiny_hp();
  open.gamma = 0.0;
  S4ganTrainer to(tiny_cfg(), open, 10);
  for (int it = 0; it < 5; ++it) {
    auto l = to.step(xl, ml, xu, it);
    CHECK(l.admitted == 3);
    CHECK(l.st > 0.0);
  }
}

TEST_CASE("trainer: identical seeds give bitwise-identical training traces") {
  HyperParams hp = tiny_hp();
  S4ganTrainer a(tiny_cfg(), hp, 11), b(tiny_cfg(), hp, 11);
  Rng rng(31);
  for (int it = 0; it < 4; ++it) {
    Tensor xl = random_images(2, 3, 8, 8, rng);
    auto ml = random_masks(2, 4, 8, 8, rng);
    Tensor xu = random_images(2, 3, 8, 8, rng);
    auto la = a.step(xl, ml, xu, it);
    auto lb = b.step(xl, ml, xu, it);
    CHECK(la.total == lb.total);
    CHECK(la.d_loss == lb.d_loss);
    CHECK(la.d_real_mean == lb.d_real_mean);
  }
  auto pa = a.generator().params(), pb = b.generator().params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.v == pb[i]->value.v);
}

TEST_CASE("trainer: an empty unlabeled batch degenerates to supervised training") {
  HyperParams hp = tiny_hp();
  S4ganTrainer tr(tiny_cfg(), hp, 12);
  Rng rng(32);
  Tensor xl = random_images(2, 3, 8, 8, rng);
  auto ml = random_masks(2, 4, 8, 8, rng);

  std::vector<std::vector<double>> disc_before;
  for (Param* p : tr.discriminator().params()) disc_before.push_back(p->value.v);

  auto l = tr.step(xl, ml, Tensor(), 0);
  CHECK(l.fm == 0.0);
  CHECK(l.st == 0.0);
  CHECK(l.d_loss == 0.0);
  CHECK(l.total == l.ce);

  std::size_t k = 0;
  for (Param* p : tr.discriminator().params()) CHECK(p->value.v == disc_before[k++]);
}

TEST_CASE("trainer: step rejects out-of-range iterations and bad batches") {
  HyperParams hp = tiny_hp();
  S4ganTrainer tr(tiny_cfg(), hp, 13);
  Rng rng(33);
  Tensor xl = random_images(1, 3, 8, 8, rng);
  auto ml = random_masks(1, 4, 8, 8, rng);
  CHECK_THROWS(tr.step(xl, ml, Tensor(), -1));
  CHECK_THROWS(tr.step(xl, ml, Tensor(), hp.max_iter));
  CHECK_THROWS(tr.step(Tensor(), {}, Tensor(), 0));
  CHECK_THROWS(tr.step(xl, {}, Tensor(), 0));  // mask count mismatch
}

TEST_SUITE_END();

}  // namespace
