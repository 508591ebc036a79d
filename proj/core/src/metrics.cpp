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
#include "semiseg/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include "semiseg/format.hpp"

namespace semiseg {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (std::int64_t v : counts_) t += v;
  return t;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.c_ != c_) throw std::invalid_argument("ConfusionMatrix::merge: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

void confusion_update(ConfusionMatrix& cm, const Mask& pred, const Mask& gt,
                      std::optional<int> ignore_index) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw std::invalid_argument("confusion_update: mask shape mismatch");
  const int c = cm.num_classes();
  for (std::size_t i = 0; i < gt.v.size(); ++i) {
    const int g = gt.v[i];
    const int p = pred.v[i];
    if (ignore_index && (g == *ignore_index || p == *ignore_index)) continue;
    if (g >= c || p >= c)
      throw std::invalid_argument("confusion_update: class index out of range");
    ++cm.at(g, p);
  }
}

double miou(const ConfusionMatrix& cm) {
  const int c = cm.num_classes();
  if (c == 0 || cm.total() == 0) throw std::invalid_argument("miou: empty confusion matrix");
  double sum = 0.0;
  int included = 0;
  for (int k = 0; k < c; ++k) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < c; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    const std::int64_t inter = cm.at(k, k);
    const std::int64_t uni = row + col - inter;
    if (uni == 0) continue;  // class never seen: excluded from the mean
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++included;
  }
  return sum / included;
}

// ---------------------------------------------------------------------------
// ROC
// ---------------------------------------------------------------------------

std::vector<RocPoint> roc_curve(
    const std::vector<std::pair<std::vector<double>, std::vector<std::uint8_t>>>& scores) {
  std::vector<std::pair<double, int>> flat;  // (score, label)
  for (const auto& [probs, labels] : scores) {
    if (probs.size() != labels.size())
      throw std::invalid_argument("roc_curve: probs/labels length mismatch");
    for (std::size_t i = 0; i < probs.size(); ++i)
      flat.emplace_back(probs[i], labels[i] ? 1 : 0);
  }
  if (flat.empty()) throw std::invalid_argument("roc_curve: empty input");
  std::int64_t pos = 0;
  for (const auto& [s, l] : flat) pos += l;
  const std::int64_t neg = static_cast<std::int64_t>(flat.size()) - pos;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("roc_curve: needs both positive and negative labels");

  std::sort(flat.begin(), flat.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<RocPoint> curve;
  curve.push_back({0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < flat.size()) {
    const double s = flat[i].first;
    // Equal scores cross the threshold together.
    while (i < flat.size() && flat[i].first == s) {
      if (flat[i].second)
        ++tp;
      else
        ++fp;
      ++i;
    }
    curve.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  return curve;
}

double roc_auc(const std::vector<RocPoint>& curve) {
  if (curve.size() < 2) throw std::invalid_argument("roc_auc: need at least two points");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  return area;
}

// ---------------------------------------------------------------------------
// ScoreTrace
// ---------------------------------------------------------------------------

void ScoreTrace::add(long long iter, double score, bool is_real) {
  if (!have_start_) {
    window_start_ = iter;
    have_start_ = true;
  }
  (is_real ? real_ : fake_).push_back(score);
  if (real_.size() >= kWindow && fake_.size() >= kWindow) {
    Row row;
    row.iter = window_start_;
    for (double s : real_) row.mean_real += s;
    for (double s : fake_) row.mean_fake += s;
    row.mean_real /= static_cast<double>(real_.size());
    row.mean_fake /= static_cast<double>(fake_.size());
    rows_.push_back(row);
    real_.clear();
    fake_.clear();
    have_start_ = false;
  }
}

std::string score_trace_csv(const ScoreTrace& trace) {
  std::string out = "iter, mean_real, mean_fake\n";
  for (const auto& row : trace.rows()) {
    out += std::to_string(row.iter);
    out += ", " + format_double(row.mean_real);
    out += ", " + format_double(row.mean_fake);
    out += '\n';
  }
  return out;
}

}  // namespace semiseg
