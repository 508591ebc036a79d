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
#ifndef SEMISEG_S4GAN_HPP_
#define SEMISEG_S4GAN_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "semiseg/data.hpp"
#include "semiseg/hyperparams.hpp"
#include "semiseg/nn.hpp"
#include "semiseg/optim.hpp"
#include "semiseg/rng.hpp"
#include "semiseg/tensor.hpp"

namespace semiseg {

// One-hot encoding of dense masks: (B, C, h, w).
Tensor one_hot_masks(const std::vector<Mask>& masks, int num_classes);

// Discriminator input: segmentation maps (probabilities or one-hot ground
// truth) concatenated channel-wise with the image.
Tensor disc_input(const Tensor& seg, const Tensor& image);
DiscOut discriminate(DiscNet& disc, const Tensor& seg, const Tensor& image, bool train = false,
                     Rng* rng = nullptr);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Per-pixel cross-entropy, averaged over every pixel of every sample.
// Probabilities are clamped to >= 1e-8 before the log, so the value is always
// finite; the gradient is zero in the clamped region.
double loss_ce(const Tensor& probs, const std::vector<Mask>& masks);

// Same value; additionally accumulates weight * dL/dprobs into dprobs.
double loss_ce_grad(const Tensor& probs, const std::vector<Mask>& masks, double weight,
                    Tensor& dprobs);

enum class FmNorm { kL1, kL2 };

// Discrepancy between batch-mean feature vectors, averaged over the feature
// dimension: L1 uses |d|, L2 uses d^2. Inputs are (B, F, 1, 1).
double feature_matching(const Tensor& real_feats, const Tensor& fake_feats, FmNorm norm);

// Same value; accumulates weight * dL/dfake_feats into dfake (the real side
// is a constant target — no gradient).
double feature_matching_grad(const Tensor& real_feats, const Tensor& fake_feats, FmNorm norm,
                             double weight, Tensor& dfake);

// Feature-matching through the discriminator (evaluation mode): batches are
// already concatenated (C+3)-channel inputs.
double loss_fm(DiscNet& disc, const Tensor& labeled_batch, const Tensor& unlabeled_batch,
               FmNorm norm = FmNorm::kL1);

struct PseudoLabel {
  Mask mask;
  double confidence = 0.0;
};

// Admits the argmax mask of a single-sample probability map when the
// discriminator score passes the gate (score >= gamma); ties broken by the
// lowest class index.
std::optional<PseudoLabel> make_pseudo_labels(const Tensor& probs, double score, double gamma);

// Cross-entropy against the pseudo mask when present, 0 otherwise. The pseudo
// mask is a constant (no gradient through the argmax).
double loss_st(const Tensor& probs, const std::optional<PseudoLabel>& pseudo);

// Binary GAN objective on sigmoid scores, negated for minimization:
// -[mean log s_real + mean log(1 - s_fake)], scores clamped to
// [1e-7, 1 - 1e-7].
double d_objective(const std::vector<double>& real_scores, const std::vector<double>& fake_scores);

// d_objective evaluated through the discriminator (evaluation mode).
double loss_discriminator(DiscNet& disc, const Tensor& labeled_batch,
                          const Tensor& unlabeled_pred_batch);

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

struct S4GanConfig {
  SegNetConfig gen;
  DiscNetConfig disc;  // disc.in_ch must equal gen.num_classes + gen.in_ch
  FmNorm fm_norm = FmNorm::kL1;
  // Replaces the feature-matching term with the standard generator
  // adversarial loss -mean log D(fake), logged in the fm slot.
  bool sgan_generator_loss = false;

  bool operator==(const S4GanConfig&) const = default;
};

struct S4GanLosses {
  double ce = 0.0;
  double fm = 0.0;
  double st = 0.0;
  double total = 0.0;
  double d_loss = 0.0;
  double d_real_mean = 0.0;  // training-mode D score means, logged per step
  double d_fake_mean = 0.0;
  int admitted = 0;  // unlabeled samples that passed the self-training gate
};

// Alternating GAN update: discriminator step on real (one-hot mask + image)
// vs. generated (prediction + image) pairs, then a generator step on
// ce + lambda_fm*fm + lambda_st*st. Generator uses momentum-SGD, the
// discriminator an adaptive-moment optimizer; both on a poly LR schedule.
class S4ganTrainer {
 public:
  S4ganTrainer(const S4GanConfig& cfg, const HyperParams& hp, std::uint64_t seed);

  // One alternating update. `unlabeled_images` may be empty (n = 0): the step
  // degenerates to supervised CE training and the discriminator is untouched.
  S4GanLosses step(const Tensor& labeled_images, const std::vector<Mask>& labeled_masks,
                   const Tensor& unlabeled_images, long long iter);

  Tensor predict(const Tensor& images) { return gen_.forward(images, false, nullptr); }

  SegNet& generator() { return gen_; }
  DiscNet& discriminator() { return disc_; }
  SgdMomentum& generator_opt() { return gen_opt_; }
  Adam& discriminator_opt() { return disc_opt_; }
  Rng& dropout_rng() { return dropout_rng_; }
  const S4GanConfig& config() const { return cfg_; }
  const HyperParams& hyperparams() const { return hp_; }

 private:
  // Declaration order fixes construction order: nets draw their init from
  // init_rng_ in sequence.
  S4GanConfig cfg_;
  HyperParams hp_;
  Rng init_rng_;
  SegNet gen_;
  DiscNet disc_;
  SgdMomentum gen_opt_;
  Adam disc_opt_;
  Rng dropout_rng_;
};

}  // namespace semiseg

#endif  // SEMISEG_S4GAN_HPP_
