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
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "semiseg/metrics.hpp"
#include "semiseg/rng.hpp"

namespace {

using namespace semiseg;

Mask mask_from(const std::vector<int>& vals, int h, int w) {
  Mask m(h, w);
  for (std::size_t i = 0; i < vals.size(); ++i) m.v[i] = static_cast<std::uint8_t>(vals[i]);
  return m;
}

Mask random_mask(int c, int h, int w, Rng& rng) {
  Mask m(h, w);
  for (auto& v : m.v) v = static_cast<std::uint8_t>(rng.uniform_index(c));
  return m;
}

// Scalar-loop mIoU oracle straight from the per-class definition.
double miou_oracle(const Mask& pred, const Mask& gt, int c) {
  double sum = 0.0;
  int included = 0;
  for (int k = 0; k < c; ++k) {
    long long inter = 0, in_pred = 0, in_gt = 0;
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
      bool pg = gt.v[i] == k, pp = pred.v[i] == k;
      if (pg && pp) ++inter;
      if (pp) ++in_pred;
      if (pg) ++in_gt;
    }
    long long uni = in_pred + in_gt - inter;
    if (uni == 0) continue;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++included;
  }
  return sum / included;
}

TEST_SUITE_BEGIN("metrics");

TEST_CASE("miou hand example: 5/12 on a five-pixel binary pair") {
  Mask gt = mask_from({0, 0, 0, 1, 1}, 1, 5);
  Mask pred = mask_from({0, 0, 1, 0, 1}, 1, 5);
  ConfusionMatrix cm(2);
  confusion_update(cm, pred, gt);
  CHECK(cm.at(0, 0) == 2);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(miou(cm) == doctest::Approx(5.0 / 12.0).epsilon(1e-12));
}

TEST_CASE("miou extremes: disjoint predictions score 0, perfect ones score 1") {
  Mask gt = mask_from({0, 0, 0, 0}, 2, 2);
  Mask pred = mask_from({1, 1, 1, 1}, 2, 2);
  ConfusionMatrix cm(2);
  confusion_update(cm, pred, gt);
  CHECK(miou(cm) == 0.0);

  ConfusionMatrix cm2(3);
  Mask same = mask_from({0, 1, 2, 1}, 2, 2);
  confusion_update(cm2, same, same);
  CHECK(miou(cm2) == 1.0);
}

TEST_CASE("miou excludes classes with an empty union") {
  // Class 2 never appears in gt or pred: the mean runs over two classes.
  Mask gt = mask_from({0, 0, 1, 1}, 2, 2);
  Mask pred = mask_from({0, 1, 1, 1}, 2, 2);
  ConfusionMatrix cm(3);
  confusion_update(cm, pred, gt);
  // IoU_0 = 1/2, IoU_1 = 2/3.
  CHECK(miou(cm) == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("confusion_update honors the ignore index") {
  Mask gt = mask_from({0, 2, 1, 1}, 2, 2);
  Mask pred = mask_from({0, 0, 2, 1}, 2, 2);
  ConfusionMatrix cm(3);
  confusion_update(cm, pred, gt, 2);
  CHECK(cm.total() == 2);  // pixels 1 and 2 are skipped
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(1, 1) == 1);
}

TEST_CASE("confusion_update validates shapes and class range") {
  ConfusionMatrix cm(2);
  Mask a(2, 2), b(2, 3);
  CHECK_THROWS(confusion_update(cm, a, b));
  Mask big = mask_from({0, 0, 0, 5}, 2, 2);
  CHECK_THROWS(confusion_update(cm, big, a));
  CHECK_THROWS(miou(ConfusionMatrix(2)));  // empty matrix
  CHECK_THROWS(miou(ConfusionMatrix()));
}

TEST_CASE("miou matches the scalar-loop oracle on random pairs") {
  Rng rng(60);
  for (int t = 0; t < 20; ++t) {
    int c = 2 + static_cast<int>(rng.uniform_index(5));
    Mask gt = random_mask(c, 6, 6, rng);
    Mask pred = random_mask(c, 6, 6, rng);
    ConfusionMatrix cm(c);
    confusion_update(cm, pred, gt);
    CHECK(miou(cm) == doctest::Approx(miou_oracle(pred, gt, c)).epsilon(1e-12));
  }
}

TEST_CASE("confusion merge is additive: fan-out equals one pass") {
  Rng rng(61);
  Mask gt1 = random_mask(3, 4, 4, rng), pred1 = random_mask(3, 4, 4, rng);
  Mask gt2 = random_mask(3, 4, 4, rng), pred2 = random_mask(3, 4, 4, rng);

  ConfusionMatrix whole(3);
  confusion_update(whole, pred1, gt1);
  confusion_update(whole, pred2, gt2);

  ConfusionMatrix a(3), b(3);
  confusion_update(a, pred1, gt1);
  confusion_update(b, pred2, gt2);
  a.merge(b);

  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(a.at(i, j) == whole.at(i, j));
  CHECK(miou(a) == miou(whole));

  ConfusionMatrix wrong(4);
  CHECK_THROWS(a.merge(wrong));
}

TEST_CASE("miou is invariant under a class relabeling applied to both masks") {
  Rng rng(62);
  const int c = 4;
  Mask gt = random_mask(c, 5, 5, rng);
  Mask pred = random_mask(c, 5, 5, rng);
  std::vector<int> perm = {2, 0, 3, 1};

  ConfusionMatrix cm(c);
  confusion_update(cm, pred, gt);

  Mask gt2 = gt, pred2 = pred;
  for (auto& v : gt2.v) v = static_cast<std::uint8_t>(perm[v]);
  for (auto& v : pred2.v) v = static_cast<std::uint8_t>(perm[v]);
  ConfusionMatrix cm2(c);
  confusion_update(cm2, pred2, gt2);

  CHECK(miou(cm) == doctest::Approx(miou(cm2)).epsilon(1e-12));
}

TEST_CASE("roc: perfect separation passes through (0,1) with AUC 1") {
  std::vector<std::pair<std::vector<double>, std::vector<std::uint8_t>>> data = {
      {{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}}};
  auto curve = roc_curve(data);
  bool hits_corner = false;
  for (const auto& p : curve)
    if (p.fpr == 0.0 && p.tpr == 1.0) hits_corner = true;
  CHECK(hits_corner);
  CHECK(roc_auc(curve) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(curve.front().fpr == 0.0);
  CHECK(curve.front().tpr == 0.0);
  CHECK(curve.back().fpr == doctest::Approx(1.0));
  CHECK(curve.back().tpr == doctest::Approx(1.0));
}

TEST_CASE("roc: random scores give AUC near one half") {
  Rng rng(63);
  std::vector<double> scores(2000);
  std::vector<std::uint8_t> labels(2000);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform(0.0, 1.0);
    labels[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  double auc = roc_auc(roc_curve({{scores, labels}}));
  CHECK(auc == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(auc - 0.5) < 0.05);
}

TEST_CASE("roc: reflecting the scores reflects the AUC") {
  Rng rng(64);
  std::vector<double> scores(300);
  std::vector<std::uint8_t> labels(300);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform(0.0, 1.0);
    labels[i] = rng.bernoulli(scores[i]) ? 1 : 0;  // informative scores
  }
  double auc = roc_auc(roc_curve({{scores, labels}}));
  std::vector<double> flipped(scores);
  for (double& s : flipped) s = 1.0 - s;
  double auc_flipped = roc_auc(roc_curve({{flipped, labels}}));
  CHECK(auc_flipped == doctest::Approx(1.0 - auc).epsilon(1e-9));
  CHECK(auc > 0.5);  // sanity: the scores really are informative
}

TEST_CASE("roc: curve coordinates are monotone and ties move together") {
  Rng rng(65);
  std::vector<double> scores(100);
  std::vector<std::uint8_t> labels(100);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform_index(10) / 10.0;  // deliberate ties
    labels[i] = rng.bernoulli(0.4) ? 1 : 0;
  }
  auto curve = roc_curve({{scores, labels}});
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].fpr >= curve[i - 1].fpr);
    CHECK(curve[i].tpr >= curve[i - 1].tpr);
  }
  CHECK(curve.size() <= 11 + 1);  // at most one point per distinct score, plus the origin

  // All-equal scores: straight diagonal, AUC one half.
  std::vector<double> flat(50, 0.5);
  std::vector<std::uint8_t> l2(50);
  for (std::size_t i = 0; i < l2.size(); ++i) l2[i] = i % 2;
  auto diag = roc_curve({{flat, l2}});
  REQUIRE(diag.size() == 2);
  CHECK(roc_auc(diag) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("roc input validation") {
  CHECK_THROWS(roc_curve({}));
  CHECK_THROWS(roc_curve({{{0.5}, {1, 0}}}));                 // length mismatch
  CHECK_THROWS(roc_curve({{{0.5, 0.6}, {1, 1}}}));            // no negatives
  CHECK_THROWS(roc_curve({{{0.5, 0.6}, {0, 0}}}));            // no positives
  CHECK_THROWS(roc_auc(std::vector<RocPoint>{{0.0, 0.0}}));   // degenerate curve
}

TEST_CASE("score trace: constant and alternating windows") {
  ScoreTrace constant;
  for (int i = 0; i < ScoreTrace::kWindow; ++i) constant.add(i, 0.7, 0.7);
  REQUIRE(constant.rows().size() == 1);
  CHECK(constant.rows()[0].iter == 0);
  CHECK(constant.rows()[0].mean_real == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(constant.rows()[0].mean_fake == doctest::Approx(0.7).epsilon(1e-12));

  ScoreTrace alt;
  for (int i = 0; i < ScoreTrace::kWindow; ++i) {
    double v = (i % 2 == 0) ? 0.4 : 0.6;
    alt.add(i, v, v);
  }
  REQUIRE(alt.rows().size() == 1);
  CHECK(alt.rows()[0].mean_real == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("score trace: partial trailing windows are dropped; replay is exact") {
  ScoreTrace t;
  for (int i = 0; i < 250; ++i) t.add(i, 0.5 + 0.001 * i, 0.5 - 0.001 * i);
  REQUIRE(t.rows().size() == 2);  // 250 adds -> two full windows + 50 dropped
  CHECK(t.rows()[0].iter == 0);
  CHECK(t.rows()[1].iter == 100);

  ScoreTrace u;
  for (int i = 0; i < 250; ++i) u.add(i, 0.5 + 0.001 * i, 0.5 - 0.001 * i);
  REQUIRE(u.rows().size() == t.rows().size());
  for (std::size_t i = 0; i < t.rows().size(); ++i) {
    CHECK(u.rows()[i].mean_real == t.rows()[i].mean_real);
    CHECK(u.rows()[i].mean_fake == t.rows()[i].mean_fake);
  }
}

TEST_CASE("score trace CSV carries the exact header and shortest-round-trip numbers") {
  ScoreTrace t;
  for (int i = 0; i < ScoreTrace::kWindow; ++i) t.add(i, 0.25, 0.75);
  std::string csv = score_trace_csv(t);
  CHECK(csv.rfind("iter, mean_real, mean_fake\n", 0) == 0);
  CHECK(csv.find("0, 0.25, 0.75\n") != std::string::npos);
}

TEST_SUITE_END();

}  // namespace
