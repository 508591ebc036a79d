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
#ifndef SEMISEG_HYPERPARAMS_HPP_
#define SEMISEG_HYPERPARAMS_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace semiseg {

// Training hyperparameters. Field names double as the config-file keys.
struct HyperParams {
  double lambda_fm = 0.1;    // feature-matching weight
  double lambda_st = 1.0;    // self-training weight
  double lambda_cons = 1.0;  // teacher-consistency weight
  double gamma = 0.6;        // discriminator-score gate for self-training
  double tau = 0.2;          // class-probability threshold for fusion
  double lr_seg = 2.5e-4;
  double lr_disc = 1e-4;
  double pow = 0.9;  // poly LR exponent
  long long max_iter = 1000;
  long long batch_size = 4;
  double ema_decay = 0.99;
  long long seed = 0;

  bool operator==(const HyperParams&) const = default;
};

// Hard range violations throw; returns soft warnings (e.g. a gate below
// chance level admits arbitrary pseudo-labels).
std::vector<std::string> validate_hyperparams(const HyperParams& hp);

// Applies `key = value` lines onto hp. '#' starts a comment. An unknown key
// throws, listing the valid keys.
void apply_config_file(HyperParams& hp, const std::string& path);
void apply_config_text(HyperParams& hp, const std::string& text, const std::string& origin);

// Canonical key=value text (shortest round-trip number formatting); also the
// hash input, so equal text <=> equal parameters.
std::string serialize_config(const HyperParams& hp);
std::uint64_t config_hash(const HyperParams& hp);

const std::vector<std::string>& config_keys();

}  // namespace semiseg

#endif  // SEMISEG_HYPERPARAMS_HPP_
