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
#include "semiseg/s4gan.hpp"

#include <cmath>
#include <stdexcept>

namespace semiseg {

namespace {

constexpr double kCeEps = 1e-8;  // cross-entropy probability clamp
constexpr double kDEps = 1e-7;   // discriminator score clamp

double clamp_score(double s) { return std::min(std::max(s, kDEps), 1.0 - kDEps); }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sum over pixels of -log(max(p_target, eps)) for one sample; optionally
// accumulates grad_weight * dL/dp into dprobs (zero where the clamp bites).
double ce_pixel_sum(const Tensor& probs, int i, const Mask& mask, double grad_weight,
                    Tensor* dprobs) {
  if (mask.h != probs.h || mask.w != probs.w)
    throw std::invalid_argument("cross-entropy: mask/prediction shape mismatch");
  double sum = 0.0;
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) {
      const int c = mask.at(y, x);
      if (c >= probs.c)
        throw std::invalid_argument("cross-entropy: mask class out of range");
      const double p = probs.at(i, c, y, x);
      sum -= std::log(std::max(p, kCeEps));
      if (dprobs != nullptr && p >= kCeEps) dprobs->at(i, c, y, x) -= grad_weight / p;
    }
  return sum;
}

}  // namespace

Tensor one_hot_masks(const std::vector<Mask>& masks, int num_classes) {
  if (masks.empty()) throw std::invalid_argument("one_hot_masks: empty batch");
  const int h = masks[0].h, w = masks[0].w;
  Tensor out(static_cast<int>(masks.size()), num_classes, h, w);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].h != h || masks[i].w != w)
      throw std::invalid_argument("one_hot_masks: inconsistent mask shapes");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int c = masks[i].at(y, x);
        if (c >= num_classes) throw std::invalid_argument("one_hot_masks: class out of range");
        out.at(static_cast<int>(i), c, y, x) = 1.0;
      }
  }
  return out;
}

Tensor disc_input(const Tensor& seg, const Tensor& image) { return concat_channels(seg, image); }

DiscOut discriminate(DiscNet& disc, const Tensor& seg, const Tensor& image, bool train, Rng* rng) {
  return disc.forward(disc_input(seg, image), train, rng);
}

double loss_ce(const Tensor& probs, const std::vector<Mask>& masks) {
  Tensor unused;
  if (probs.n == 0 || masks.size() != static_cast<std::size_t>(probs.n))
    throw std::invalid_argument("loss_ce: batch/mask count mismatch");
  double sum = 0.0;
  for (int i = 0; i < probs.n; ++i) sum += ce_pixel_sum(probs, i, masks[i], 0.0, nullptr);
  return sum / (static_cast<double>(probs.n) * probs.h * probs.w);
}

double loss_ce_grad(const Tensor& probs, const std::vector<Mask>& masks, double weight,
                    Tensor& dprobs) {
  if (probs.n == 0 || masks.size() != static_cast<std::size_t>(probs.n))
    throw std::invalid_argument("loss_ce: batch/mask count mismatch");
  if (!dprobs.same_shape(probs)) throw std::invalid_argument("loss_ce_grad: dprobs shape");
  const double denom = static_cast<double>(probs.n) * probs.h * probs.w;
  double sum = 0.0;
  for (int i = 0; i < probs.n; ++i)
    sum += ce_pixel_sum(probs, i, masks[i], weight / denom, &dprobs);
  return sum / denom;
}

double feature_matching(const Tensor& real_feats, const Tensor& fake_feats, FmNorm norm) {
  Tensor unused;
  return feature_matching_grad(real_feats, fake_feats, norm, 0.0, unused);
}

double feature_matching_grad(const Tensor& real_feats, const Tensor& fake_feats, FmNorm norm,
                             double weight, Tensor& dfake) {
  if (real_feats.n == 0 || fake_feats.n == 0)
    throw std::invalid_argument("feature_matching: empty batch");
  if (real_feats.c != fake_feats.c)
    throw std::invalid_argument("feature_matching: feature dimension mismatch");
  const int f = real_feats.c;
  const bool want_grad = weight != 0.0;
  if (want_grad && !dfake.same_shape(fake_feats))
    throw std::invalid_argument("feature_matching_grad: dfake shape");

  double loss = 0.0;
  for (int j = 0; j < f; ++j) {
    double mr = 0.0, mf = 0.0;
    for (int i = 0; i < real_feats.n; ++i) mr += real_feats.at(i, j, 0, 0);
    for (int i = 0; i < fake_feats.n; ++i) mf += fake_feats.at(i, j, 0, 0);
    mr /= real_feats.n;
    mf /= fake_feats.n;
    const double d = mr - mf;
    double dloss_dmf = 0.0;
    if (norm == FmNorm::kL1) {
      loss += std::abs(d) / f;
      dloss_dmf = (d > 0.0 ? -1.0 : (d < 0.0 ? 1.0 : 0.0)) / f;
    } else {
      loss += d * d / f;
      dloss_dmf = -2.0 * d / f;
    }
    if (want_grad) {
      const double g = weight * dloss_dmf / fake_feats.n;
      for (int i = 0; i < fake_feats.n; ++i) dfake.at(i, j, 0, 0) += g;
    }
  }
  return loss;
}

double loss_fm(DiscNet& disc, const Tensor& labeled_batch, const Tensor& unlabeled_batch,
               FmNorm norm) {
  if (labeled_batch.n == 0 || unlabeled_batch.n == 0)
    throw std::invalid_argument("loss_fm: empty batch");
  const Tensor real = disc.forward(labeled_batch, false, nullptr).features;
  const Tensor fake = disc.forward(unlabeled_batch, false, nullptr).features;
  return feature_matching(real, fake, norm);
}

std::optional<PseudoLabel> make_pseudo_labels(const Tensor& probs, double score, double gamma) {
  if (probs.n != 1) throw std::invalid_argument("make_pseudo_labels: expects a single sample");
  // Clamped score keeps the gate strictly below 1, so gamma = 1.0 never opens.
  const double s = clamp_score(score);
  if (s < gamma) return std::nullopt;
  PseudoLabel out;
  out.confidence = s;
  out.mask = Mask(probs.h, probs.w);
  for (int y = 0; y < probs.h; ++y)
    for (int x = 0; x < probs.w; ++x) {
      int best = 0;
      double bp = probs.at(0, 0, y, x);
      for (int c = 1; c < probs.c; ++c) {
        const double p = probs.at(0, c, y, x);
        if (p > bp) {  // strict: ties keep the lowest class index
          bp = p;
          best = c;
        }
      }
      out.mask.at(y, x) = static_cast<std::uint8_t>(best);
    }
  return out;
}

double loss_st(const Tensor& probs, const std::optional<PseudoLabel>& pseudo) {
  if (!pseudo) return 0.0;
  if (probs.n != 1) throw std::invalid_argument("loss_st: expects a single sample");
  return ce_pixel_sum(probs, 0, pseudo->mask, 0.0, nullptr) /
         (static_cast<double>(probs.h) * probs.w);
}

double d_objective(const std::vector<double>& real_scores,
                   const std::vector<double>& fake_scores) {
  if (real_scores.empty() || fake_scores.empty())
    throw std::invalid_argument("d_objective: empty batch");
  double lr = 0.0, lf = 0.0;
  for (double s : real_scores) lr += std::log(clamp_score(s));
  for (double s : fake_scores) lf += std::log(1.0 - clamp_score(s));
  return -(lr / static_cast<double>(real_scores.size()) +
           lf / static_cast<double>(fake_scores.size()));
}

double loss_discriminator(DiscNet& disc, const Tensor& labeled_batch,
                          const Tensor& unlabeled_pred_batch) {
  if (labeled_batch.n == 0 || unlabeled_pred_batch.n == 0)
    throw std::invalid_argument("loss_discriminator: empty batch");
  const auto real = disc.forward(labeled_batch, false, nullptr);
  const auto fake = disc.forward(unlabeled_pred_batch, false, nullptr);
  return d_objective(real.scores, fake.scores);
}

// ---------------------------------------------------------------------------
// S4ganTrainer
// ---------------------------------------------------------------------------

S4ganTrainer::S4ganTrainer(const S4GanConfig& cfg, const HyperParams& hp, std::uint64_t seed)
    : cfg_(cfg),
      hp_(hp),
      init_rng_(mix_seed(seed, 0x51)),
      gen_(cfg_.gen, init_rng_),
      disc_(cfg_.disc, init_rng_),
      gen_opt_(gen_.params(), 0.9, 5e-4),
      disc_opt_(disc_.params(), 0.9, 0.99),
      dropout_rng_(mix_seed(seed, 0xD0)) {
  if (cfg_.disc.in_ch != cfg_.gen.num_classes + cfg_.gen.in_ch)
    throw std::invalid_argument(
        "S4ganTrainer: discriminator input channels must equal num_classes + image channels");
}

S4GanLosses S4ganTrainer::step(const Tensor& labeled_images,
                               const std::vector<Mask>& labeled_masks,
                               const Tensor& unlabeled_images, long long iter) {
  if (iter < 0 || iter >= hp_.max_iter)
    throw std::invalid_argument("S4ganTrainer::step: iter outside [0, max_iter)");
  if (labeled_images.n == 0 ||
      labeled_masks.size() != static_cast<std::size_t>(labeled_images.n))
    throw std::invalid_argument("S4ganTrainer::step: bad labeled batch");

  const int num_classes = cfg_.gen.num_classes;
  const int bl = labeled_images.n;
  const int bu = unlabeled_images.n;
  const bool gan_active =
      bu > 0 && (hp_.lambda_fm > 0.0 || hp_.lambda_st > 0.0 || cfg_.sgan_generator_loss);

  S4GanLosses out;
  auto check_finite = [&](double v, const char* term) {
    if (!std::isfinite(v))
      throw std::runtime_error(std::string("training aborted: ") + term +
                               " is not finite at iteration " + std::to_string(iter));
  };

  // Generator forward once on the combined batch; every layer is per-sample,
  // so this matches separate forwards while leaving one cache for backward.
  const Tensor x_all = gan_active ? concat_samples(labeled_images, unlabeled_images)
                                  : labeled_images;
  const Tensor probs = gen_.forward(x_all, true, nullptr);
  const Tensor probs_u = gan_active ? slice_samples(probs, bl, bl + bu) : Tensor();

  Tensor real_in, fake_in;
  if (gan_active) {
    // Discriminator step: real = one-hot ground truth + image, fake =
    // generated maps + image (values only; no gradient to the generator).
    real_in = disc_input(one_hot_masks(labeled_masks, num_classes), labeled_images);
    fake_in = disc_input(probs_u, unlabeled_images);
    const DiscOut d_out =
        disc_.forward(concat_samples(real_in, fake_in), true, &dropout_rng_);
    const std::vector<double> sr(d_out.scores.begin(), d_out.scores.begin() + bl);
    const std::vector<double> sf(d_out.scores.begin() + bl, d_out.scores.end());
    out.d_loss = d_objective(sr, sf);
    out.d_real_mean = mean(sr);
    out.d_fake_mean = mean(sf);
    check_finite(out.d_loss, "loss_d");

    std::vector<double> ds(static_cast<std::size_t>(bl + bu), 0.0);
    for (int i = 0; i < bl; ++i)
      if (sr[i] > kDEps && sr[i] < 1.0 - kDEps) ds[i] = -1.0 / (bl * sr[i]);
    for (int j = 0; j < bu; ++j)
      if (sf[j] > kDEps && sf[j] < 1.0 - kDEps) ds[bl + j] = 1.0 / (bu * (1.0 - sf[j]));
    disc_.backward(ds, Tensor());
    disc_opt_.step(poly_lr(hp_.lr_disc, iter, hp_.max_iter, hp_.pow));
    disc_opt_.zero_grad();
  }

  // Generator step.
  Tensor dprobs(probs.n, probs.c, probs.h, probs.w);
  {
    Tensor probs_l = gan_active ? slice_samples(probs, 0, bl) : probs;
    Tensor dprobs_l(bl, num_classes, probs.h, probs.w);
    out.ce = loss_ce_grad(probs_l, labeled_masks, 1.0, dprobs_l);
    check_finite(out.ce, "loss_ce");
    std::copy(dprobs_l.v.begin(), dprobs_l.v.end(), dprobs.v.begin());
  }

  if (gan_active) {
    Tensor dprobs_u(bu, num_classes, probs.h, probs.w);
    // Evaluation-mode discriminator passes: the real side is a constant
    // feature target; the fake pass (last, so its cache is live for
    // backward) supplies features, gate scores, and adversarial scores.
    const DiscOut real_eval = disc_.forward(real_in, false, nullptr);
    const DiscOut fake_eval = disc_.forward(fake_in, false, nullptr);

    std::vector<double> dscores_g;
    Tensor dfeat;
    if (cfg_.sgan_generator_loss) {
      // Standard generator adversarial loss in the fm slot.
      double g = 0.0;
      if (hp_.lambda_fm > 0.0) dscores_g.assign(static_cast<std::size_t>(bu), 0.0);
      for (int j = 0; j < bu; ++j) {
        const double s = fake_eval.scores[j];
        g -= std::log(clamp_score(s)) / bu;
        if (!dscores_g.empty() && s > kDEps && s < 1.0 - kDEps)
          dscores_g[j] = hp_.lambda_fm * (-1.0 / (bu * s));
      }
      out.fm = g;
    } else {
      if (hp_.lambda_fm > 0.0) {
        dfeat = Tensor(bu, disc_.feature_dim(), 1, 1);
        out.fm = feature_matching_grad(real_eval.features, fake_eval.features, cfg_.fm_norm,
                                       hp_.lambda_fm, dfeat);
      } else {
        out.fm = feature_matching(real_eval.features, fake_eval.features, cfg_.fm_norm);
      }
    }
    check_finite(out.fm, "loss_fm");

    // Self-training: per-sample gate on the (clamped) discriminator score.
    double st_sum = 0.0;
    const double hw = static_cast<double>(probs.h) * probs.w;
    for (int j = 0; j < bu; ++j) {
      const Tensor pj = slice_samples(probs_u, j, j + 1);
      const auto pseudo = make_pseudo_labels(pj, fake_eval.scores[j], hp_.gamma);
      if (!pseudo) continue;
      ++out.admitted;
      const double gw = hp_.lambda_st > 0.0 ? hp_.lambda_st / (bu * hw) : 0.0;
      st_sum += ce_pixel_sum(probs_u, j, pseudo->mask, gw, gw > 0.0 ? &dprobs_u : nullptr) / hw;
    }
    out.st = st_sum / bu;
    check_finite(out.st, "loss_st");

    if (!dscores_g.empty() || !dfeat.empty()) {
      const Tensor dinput = disc_.backward(dscores_g, dfeat);
      disc_opt_.zero_grad();  // generator pass must leave D's grads clean
      for (int j = 0; j < bu; ++j)
        for (int c = 0; c < num_classes; ++c)
          for (int y = 0; y < probs.h; ++y)
            for (int x = 0; x < probs.w; ++x)
              dprobs_u.at(j, c, y, x) += dinput.at(j, c, y, x);
    }
    std::copy(dprobs_u.v.begin(), dprobs_u.v.end(),
              dprobs.v.begin() + static_cast<std::ptrdiff_t>(bl) * dprobs_u.sample_size());
  }

  out.total = out.ce + hp_.lambda_fm * out.fm + hp_.lambda_st * out.st;

  gen_.backward(dprobs);
  gen_opt_.step(poly_lr(hp_.lr_seg, iter, hp_.max_iter, hp_.pow));
  gen_opt_.zero_grad();
  return out;
}

}  // namespace semiseg
