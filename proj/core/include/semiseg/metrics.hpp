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
#ifndef SEMISEG_METRICS_HPP_
#define SEMISEG_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semiseg/data.hpp"

namespace semiseg {

// counts[gt][pred] = pixel tally; supports merge so evaluation can fan out
// over samples and reduce.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes)
      : c_(num_classes),
        counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

  int num_classes() const { return c_; }
  std::int64_t& at(int gt, int pred) { return counts_[static_cast<std::size_t>(gt) * c_ + pred]; }
  std::int64_t at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * c_ + pred];
  }
  std::int64_t total() const;

  void merge(const ConfusionMatrix& other);

 private:
  int c_ = 0;
  std::vector<std::int64_t> counts_;
};

void confusion_update(ConfusionMatrix& cm, const Mask& pred, const Mask& gt,
                      std::optional<int> ignore_index = std::nullopt);

// Mean over classes with nonzero union of diag / (row + col - diag);
// zero-union classes are excluded from the mean.
double miou(const ConfusionMatrix& cm);

// ---------------------------------------------------------------------------
// ROC
// ---------------------------------------------------------------------------

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Flattens (sample, class) pairs into one binary problem and sweeps the
// threshold over the observed scores, highest first; (0,0) is prepended.
std::vector<RocPoint> roc_curve(const std::vector<std::pair<std::vector<double>,
                                                            std::vector<std::uint8_t>>>& scores);

// Trapezoidal area under the curve.
double roc_auc(const std::vector<RocPoint>& curve);

// ---------------------------------------------------------------------------
// Discriminator-score trace
// ---------------------------------------------------------------------------

// Accumulates per-iteration real/fake discriminator scores and emits one
// (window start iteration, mean real, mean fake) row per completed
// 100-iteration window; a trailing partial window is dropped.
class ScoreTrace {
 public:
  struct Row {
    long long iter = 0;  // first iteration of the window
    double mean_real = 0.0;
    double mean_fake = 0.0;
  };

  static constexpr int kWindow = 100;

  void add(long long iter, double score, bool is_real);
  void add(long long iter, double real_score, double fake_score) {
    add(iter, real_score, true);
    add(iter, fake_score, false);
  }
  const std::vector<Row>& rows() const { return rows_; }

 private:
  std::vector<double> real_, fake_;
  long long window_start_ = 0;
  bool have_start_ = false;
  std::vector<Row> rows_;
};

// CSV serialization of a trace: header "iter, mean_real, mean_fake".
std::string score_trace_csv(const ScoreTrace& trace);

}  // namespace semiseg

#endif  // SEMISEG_METRICS_HPP_
